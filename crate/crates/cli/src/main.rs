use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use log::info;
use serde_json::json;
use tsge::harness::{run_experiment, ExperimentConfig, RunSettings};

const SEED_VAR: &str = "TSGE_SEED";

#[derive(Parser)]
#[command(name = "tsge", version, about = "Non-stationary bandit simulation lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config file.
    Run {
        config: PathBuf,
        /// Base seed; replication i uses seed + i.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replications: Option<u64>,
        /// Output directory (default: the config's `output_dir`, else `results`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
}

/// A failure with a stable tag for the JSON error record.
struct Failure {
    kind: &'static str,
    message: String,
    code: u8,
}

impl From<tsge::error::Error> for Failure {
    fn from(e: tsge::error::Error) -> Self {
        let code = match e {
            tsge::error::Error::Config(_) | tsge::error::Error::InvalidArgument(_) | tsge::error::Error::Domain(_) => 2,
            _ => 1,
        };
        Self {
            kind: e.kind(),
            message: e.to_string(),
            code,
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast::<tsge::error::Error>() {
            Ok(inner) => inner.into(),
            Err(e) => Self {
                kind: "runtime",
                message: format!("{e:#}"),
                code: 1,
            },
        }
    }
}

fn env_seed() -> Result<Option<u64>, Failure> {
    match std::env::var(SEED_VAR) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| Failure {
            kind: "config",
            message: format!("{SEED_VAR}={v:?} is not an unsigned integer"),
            code: 2,
        }),
        Err(_) => Ok(None),
    }
}

fn run(
    config: PathBuf,
    seed: Option<u64>,
    replications: Option<u64>,
    out: Option<PathBuf>,
    threads: Option<usize>,
) -> Result<(), Failure> {
    let mut cfg = ExperimentConfig::load(&config)?;
    if let Some(s) = env_seed()? {
        info!("{SEED_VAR} overrides base seed {} -> {s}", cfg.base_seed);
        cfg.base_seed = s;
    }
    if let Some(s) = seed {
        info!("--seed overrides base seed {} -> {s}", cfg.base_seed);
        cfg.base_seed = s;
    }
    if let Some(r) = replications {
        cfg.replications = r;
    }
    if threads == Some(0) {
        return Err(tsge::error::Error::Config("--threads must be at least 1".into()).into());
    }
    cfg.validate()?;
    let out_dir = out
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("results"));
    info!(
        "running {} with {} replication(s), base seed {}, into {}",
        cfg.experiment.name(),
        cfg.replications,
        cfg.base_seed,
        out_dir.display()
    );
    let outcome = run_experiment(&cfg, &out_dir, &RunSettings { threads })?;
    let text = serde_json::to_string_pretty(&outcome).context("serializing the run summary")?;
    println!("{text}");
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            seed,
            replications,
            out,
            threads,
        } => run(config, seed, replications, out, threads),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", json!({ "error": f.kind, "message": f.message }));
            ExitCode::from(f.code)
        }
    }
}
