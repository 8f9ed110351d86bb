//! Seeded experiment runner: config ingestion, replication fan-out and
//! CSV/JSON persistence.
//!
//! Replication `i` uses seed `base_seed + i`. Results are collected in
//! replication order, so the worker count never changes the output bytes.

mod bounds;
mod case;
mod race;
mod validation;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub use bounds::{run_bound_comparison, BoundComparisonConfig, BoundComparisonSummary, PanelCrossings};
pub use case::{run_case_study_experiment, CaseStudySummary, CaseStudySummaryRow};
pub use race::{episode_start_slot, run_regret_race, EpisodeChange, RaceAlgorithmSummary, RegretRaceConfig, RegretRaceSummary};
pub use validation::{
    localization_failure_rate, mandatory_probing, planted_detection_rate, run_validation_suite, stationary_false_alarms,
    CheckResult, MandatoryProbingReport, Plant, ValidationConfig, ValidationReport,
};

/// Version tag written as the first line of every CSV file.
pub const CSV_VERSION: &str = "tsge-csv v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Experiment {
    BoundComparison(BoundComparisonConfig),
    RegretRace(RegretRaceConfig),
    CaseStudy(crate::swipt::CaseStudyConfig),
    ValidationSuite(ValidationConfig),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::BoundComparison(_) => "bound_comparison",
            Experiment::RegretRace(_) => "regret_race",
            Experiment::CaseStudy(_) => "case_study",
            Experiment::ValidationSuite(_) => "validation_suite",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default = "one")]
    pub replications: u64,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn one() -> u64 {
    1
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        let checked = match &self.experiment {
            Experiment::BoundComparison(c) => c.validate(),
            Experiment::RegretRace(c) => c.validate(),
            Experiment::CaseStudy(c) => c.validate(),
            Experiment::ValidationSuite(c) => c.validate(),
        };
        checked.map_err(|e| match e {
            Error::InvalidArgument(m) | Error::Domain(m) => Error::Config(m),
            other => other,
        })
    }

    /// Seed of replication `i`.
    pub fn seed(&self, i: u64) -> u64 {
        self.base_seed.wrapping_add(i)
    }
}

/// Runtime knobs that never affect results.
#[derive(Debug, Clone, Default)]
pub struct RunSettings {
    /// Worker threads; `None` uses every core.
    pub threads: Option<usize>,
}

/// What a run produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOutcome {
    pub experiment: String,
    pub files: Vec<PathBuf>,
    pub summary: serde_json::Value,
}

/// Runs the configured experiment and writes its files into `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path, settings: &RunSettings) -> Result<RunOutcome> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    let run = || -> Result<RunOutcome> {
        let (files, summary) = match &cfg.experiment {
            Experiment::BoundComparison(c) => {
                let (files, s) = run_bound_comparison(c, out_dir)?;
                (files, serde_json::to_value(s)?)
            }
            Experiment::RegretRace(c) => {
                let (files, s) = run_regret_race(c, cfg, out_dir)?;
                (files, serde_json::to_value(s)?)
            }
            Experiment::CaseStudy(c) => {
                let (files, s) = run_case_study_experiment(c, cfg, out_dir)?;
                (files, serde_json::to_value(s)?)
            }
            Experiment::ValidationSuite(c) => {
                let (files, s) = run_validation_suite(c, cfg, out_dir)?;
                (files, serde_json::to_value(s)?)
            }
        };
        Ok(RunOutcome {
            experiment: cfg.experiment.name().to_owned(),
            files,
            summary,
        })
    };
    with_threads(settings.threads, run)
}

#[cfg(feature = "parallel")]
fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {n} worker threads: {e}")))?
            .install(f),
        None => f(),
    }
}

#[cfg(not(feature = "parallel"))]
fn with_threads<T>(_threads: Option<usize>, f: impl FnOnce() -> Result<T>) -> Result<T> {
    f()
}

/// Maps `f` over `0..n`, in parallel when enabled, returning results in
/// index order.
pub fn par_map<T, F>(n: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Writes `rows` as CSV under a `# tsge-csv v1 <name>` comment line.
pub fn write_csv<S: Serialize>(path: &Path, name: &str, rows: &[S]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "# {CSV_VERSION} {name}")?;
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

/// Mean and 95% normal half-width.
pub fn mean_ci(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}

pub(crate) fn ensure(cond: bool, msg: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        invalid(msg)
    }
}
