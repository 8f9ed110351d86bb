use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ensure, mean_ci, par_map, write_csv, write_json, ExperimentConfig};
use crate::agent::{TsgeAgent, TsgeConfig};
use crate::baselines::{ClassicTs, Mucb, MucbConfig};
use crate::env::{EnvConfig, GaussianEnv, ScheduledChange};
use crate::error::Result;
use crate::sim::{run_policy, Policy, RunOptions, RunResult};

/// A change pinned to the first slot of a (nominal) episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeChange {
    pub episode: u64,
    pub arm: usize,
    pub new_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegretRaceConfig {
    pub env: EnvConfig,
    pub tsge: TsgeConfig,
    pub mucb: MucbConfig,
    pub changes: Vec<EpisodeChange>,
    pub checkpoint_every: u64,
    /// Also export the slot trace, episode log and change log of
    /// replication 0.
    pub export_trace: bool,
}

impl Default for RegretRaceConfig {
    fn default() -> Self {
        let env = EnvConfig {
            initial_means: vec![0.4, 0.9],
            sigma: 0.1,
            change_prob: 0.0,
            ..EnvConfig::default()
        };
        let change = |episode, arm, new_mean| EpisodeChange { episode, arm, new_mean };
        Self {
            env,
            tsge: TsgeConfig {
                delta: 0.05,
                loc_fail_prob: 0.05,
                ..TsgeConfig::default()
            },
            mucb: MucbConfig::default(),
            changes: vec![
                change(30, 1, 0.1),
                change(60, 1, 0.6),
                change(90, 0, 0.9),
                change(120, 1, 0.1),
                change(150, 0, 0.1),
            ],
            checkpoint_every: 1000,
            export_trace: false,
        }
    }
}

/// First slot of nominal episode `e` when episodes start after the warm-up.
pub fn episode_start_slot(etc_slots: u64, episode_len: u64, episode: u64) -> u64 {
    etc_slots + (episode.max(1) - 1) * episode_len + 1
}

impl RegretRaceConfig {
    pub fn validate(&self) -> Result<()> {
        self.env_for_seed(0)?;
        ensure(self.checkpoint_every > 0, "checkpoint interval must be positive")?;
        let k = self.env.num_arms();
        self.tsge.schedule(k.next_power_of_two())?;
        self.mucb.validate(self.env.num_real_arms())
    }

    fn tsge_config(&self, seed: u64) -> TsgeConfig {
        TsgeConfig { horizon: self.env.horizon, seed, ..self.tsge.clone() }
    }

    /// Padded environment with the episode changes scheduled.
    pub fn env_for_seed(&self, seed: u64) -> Result<EnvConfig> {
        let mut env = crate::env::pad_to_power_of_two(&EnvConfig { seed, ..self.env.clone() });
        let sched = self.tsge_config(seed).schedule(env.num_arms())?;
        let etc = sched.etc_slots(env.num_real_arms());
        env.change_start = etc;
        env.scheduled_changes.extend(self.changes.iter().map(|c| ScheduledChange {
            slot: episode_start_slot(etc, sched.episode_len, c.episode),
            arm: c.arm,
            new_mean: c.new_mean,
        }));
        env.validate()?;
        Ok(env)
    }
}

#[derive(Serialize)]
struct CurveRow<'a> {
    slot: u64,
    algorithm: &'a str,
    mean_regret: f64,
    ci_low: f64,
    ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaceAlgorithmSummary {
    pub algorithm: String,
    pub final_mean_regret: f64,
    pub ci_half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretRaceSummary {
    pub replications: u64,
    pub horizon: u64,
    pub change_slots: Vec<u64>,
    pub algorithms: Vec<RaceAlgorithmSummary>,
    /// TS-GE < TS < M-UCB with pairwise disjoint 95% intervals.
    pub ordering_holds: bool,
}

const ALGORITHMS: [&str; 3] = ["TS-GE", "TS", "M-UCB"];

fn run_one<P: Policy>(policy: &mut P, env_cfg: &EnvConfig, opts: &RunOptions) -> Result<(RunResult, GaussianEnv)> {
    let mut env = GaussianEnv::new(env_cfg.clone())?;
    let res = run_policy(policy, &mut env, opts)?;
    Ok((res, env))
}

/// One replication of all three agents on identically seeded environments.
fn replicate(cfg: &RegretRaceConfig, seed: u64, keep_trace: bool) -> Result<(Vec<RunResult>, Option<Trace>)> {
    let env_cfg = cfg.env_for_seed(seed)?;
    let opts = RunOptions {
        checkpoint_every: cfg.checkpoint_every,
        keep_trace,
        ..RunOptions::new(env_cfg.horizon)
    };
    let probe = GaussianEnv::new(env_cfg.clone())?;
    let mut tsge = TsgeAgent::for_bandit(cfg.tsge_config(seed), &probe)?;
    let (r_tsge, env_tsge) = run_one(&mut tsge, &env_cfg, &opts)?;
    let mut ts = ClassicTs::new(env_cfg.num_real_arms(), seed);
    let (r_ts, _) = run_one(&mut ts, &env_cfg, &RunOptions { keep_trace: false, ..opts.clone() })?;
    let mucb_cfg = MucbConfig { horizon: env_cfg.horizon, ..cfg.mucb.clone() };
    let mut mucb = Mucb::new(&mucb_cfg, env_cfg.num_real_arms())?;
    let (r_mucb, _) = run_one(&mut mucb, &env_cfg, &RunOptions { keep_trace: false, ..opts })?;
    let trace = keep_trace.then(|| Trace {
        rows: r_tsge.trace.clone(),
        episodes: tsge.episodes().to_vec(),
        changes: env_tsge.change_log().to_vec(),
    });
    Ok((vec![r_tsge, r_ts, r_mucb], trace))
}

struct Trace {
    rows: Vec<crate::sim::TraceRow>,
    episodes: Vec<crate::agent::EpisodeSummary>,
    changes: Vec<crate::env::ChangeRecord>,
}

#[derive(Serialize)]
struct EpisodeRow {
    episode: u64,
    first_slot: u64,
    last_slot: u64,
    detected: bool,
    identified_arm: Option<usize>,
    true_changed_arm: Option<usize>,
}

pub fn run_regret_race(
    cfg: &RegretRaceConfig,
    exp: &ExperimentConfig,
    out: &Path,
) -> Result<(Vec<PathBuf>, RegretRaceSummary)> {
    cfg.validate()?;
    let reps = par_map(exp.replications, |i| replicate(cfg, exp.seed(i), cfg.export_trace && i == 0))?;
    let n_ck = reps[0].0[0].checkpoints.len();
    let mut rows = Vec::new();
    let mut algorithms = Vec::new();
    for (a, name) in ALGORITHMS.iter().enumerate() {
        for c in 0..n_ck {
            let vals: Vec<f64> = reps.iter().map(|(r, _)| r[a].checkpoints[c].1).collect();
            let (m, h) = mean_ci(&vals);
            rows.push(CurveRow {
                slot: reps[0].0[a].checkpoints[c].0,
                algorithm: name,
                mean_regret: m,
                ci_low: m - h,
                ci_high: m + h,
            });
        }
        let finals: Vec<f64> = reps.iter().map(|(r, _)| r[a].total_regret).collect();
        let (m, h) = mean_ci(&finals);
        algorithms.push(RaceAlgorithmSummary {
            algorithm: name.to_string(),
            final_mean_regret: m,
            ci_half_width: h,
        });
    }
    let disjoint_below = |a: &RaceAlgorithmSummary, b: &RaceAlgorithmSummary| {
        a.final_mean_regret + a.ci_half_width < b.final_mean_regret - b.ci_half_width
    };
    let ordering_holds = disjoint_below(&algorithms[0], &algorithms[1]) && disjoint_below(&algorithms[1], &algorithms[2]);
    let env0 = cfg.env_for_seed(exp.seed(0))?;
    let summary = RegretRaceSummary {
        replications: exp.replications,
        horizon: env0.horizon,
        change_slots: env0.scheduled_changes.iter().map(|c| c.slot).collect(),
        algorithms,
        ordering_holds,
    };

    let mut files = Vec::new();
    let curves = out.join("regret_race.csv");
    write_csv(&curves, "regret_race", &rows)?;
    files.push(curves);
    let json = out.join("regret_race_summary.json");
    write_json(&json, &summary)?;
    files.push(json);

    if let Some((_, Some(trace))) = reps.first() {
        let p = out.join("tsge_trace.csv");
        write_csv(&p, "tsge_trace", &trace.rows)?;
        files.push(p);
        let rows: Vec<EpisodeRow> = trace
            .episodes
            .iter()
            .map(|e| EpisodeRow {
                episode: e.episode,
                first_slot: e.first_slot,
                last_slot: e.last_slot,
                detected: e.detected,
                identified_arm: e.identified_arm,
                true_changed_arm: trace
                    .changes
                    .iter()
                    .find(|c| (e.first_slot..=e.last_slot).contains(&c.slot))
                    .map(|c| c.arm),
            })
            .collect();
        let p = out.join("tsge_episodes.csv");
        write_csv(&p, "tsge_episodes", &rows)?;
        files.push(p);
        let p = out.join("change_log.csv");
        write_csv(&p, "change_log", &trace.changes)?;
        files.push(p);
    }
    Ok((files, summary))
}
