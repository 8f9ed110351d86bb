use std::path::{Path, PathBuf};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{ensure, par_map, write_json, ExperimentConfig};
use crate::agent::{TsgeAgent, TsgeConfig};
use crate::analysis::{p_false_alarm, sigma_nc, BoundParams, Tail};
use crate::env::{min_change_prob, pad_to_power_of_two, Bandit, EnvConfig, GaussianEnv, ScheduledChange};
use crate::error::Result;
use crate::sim::{run_policy, RunOptions};
use crate::{seeded_rng, streams};

/// Settings of the statistical self-checks run by the validation suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationConfig {
    pub env: EnvConfig,
    /// Agent settings; `delta = sigma / 2` and `p_L = 1/T` when absent.
    pub tsge: Option<TsgeConfig>,
    pub localization_delta: f64,
    pub localization_fail_prob: f64,
    pub localization_trials: u64,
    pub false_alarm_episodes: u64,
    pub ts_plants: u64,
    /// Slots into the TS phase at which a TS plant lands.
    pub ts_plant_offset: u64,
    /// TS plant magnitude in units of sigma.
    pub ts_plant_sigmas: f64,
    pub bp_plants_per_case: u64,
    pub bp_plant_change: f64,
    pub bp_early_t_minus: u64,
    pub bp_late_t_minus: u64,
    pub probing_runs: u64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            env: EnvConfig::default(),
            tsge: None,
            localization_delta: 0.1,
            localization_fail_prob: 0.05,
            localization_trials: 10_000,
            false_alarm_episodes: 10_000,
            ts_plants: 1000,
            ts_plant_offset: 10,
            ts_plant_sigmas: 2.0,
            bp_plants_per_case: 250,
            bp_plant_change: 0.5,
            bp_early_t_minus: 10,
            bp_late_t_minus: 90,
            probing_runs: 100,
        }
    }
}

impl ValidationConfig {
    pub fn validate(&self) -> Result<()> {
        let env = self.stationary_env(0);
        env.validate()?;
        self.agent_config(0).schedule(env.num_arms())?;
        crate::agent::etc_length(self.localization_delta, self.localization_fail_prob)?;
        ensure(self.ts_plant_sigmas > 0.0, "TS plant size must be positive")?;
        ensure(self.bp_plant_change > 0.0, "BP plant size must be positive")?;
        let sched = self.agent_config(0).schedule(env.num_arms())?;
        ensure(
            self.ts_plant_offset < sched.ts_len,
            format!("TS plant offset {} is outside the {}-slot TS phase", self.ts_plant_offset, sched.ts_len),
        )?;
        ensure(
            self.bp_early_t_minus < sched.bp_len && self.bp_late_t_minus < sched.bp_len,
            "BP plant offsets must lie inside the probing phase",
        )
    }

    /// Padded, change-free copy of the desk environment.
    pub fn stationary_env(&self, seed: u64) -> EnvConfig {
        pad_to_power_of_two(&EnvConfig {
            seed,
            change_prob: 0.0,
            scheduled_changes: Vec::new(),
            enforce_min_change_prob: false,
            ..self.env.clone()
        })
    }

    pub fn agent_config(&self, seed: u64) -> TsgeConfig {
        let base = self
            .tsge
            .clone()
            .unwrap_or_else(|| TsgeConfig::for_sigma(self.env.sigma, self.env.horizon, seed));
        TsgeConfig {
            horizon: self.env.horizon,
            seed,
            ..base
        }
    }
}

/// One named pass/fail line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub observed: f64,
    pub bound: f64,
    /// `"<="` or `">="`.
    pub relation: String,
    pub pass: bool,
}

impl CheckResult {
    fn at_most(name: &str, observed: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            observed,
            bound,
            relation: "<=".into(),
            pass: observed <= bound,
        }
    }

    fn at_least(name: &str, observed: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            observed,
            bound,
            relation: ">=".into(),
            pass: observed >= bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
    pub probing: MandatoryProbingReport,
    pub all_pass: bool,
}

/// Fraction of warm-ups after which some arm estimate misses its mean by
/// more than `delta`.
pub fn localization_failure_rate(env: &EnvConfig, delta: f64, p_l: f64, trials: u64, base_seed: u64) -> Result<f64> {
    let failures = par_map(trials, |i| {
        let seed = base_seed.wrapping_add(i);
        let env_cfg = EnvConfig { seed, ..env.clone() };
        let mut bandit = GaussianEnv::new(env_cfg)?;
        let cfg = TsgeConfig {
            delta,
            loc_fail_prob: p_l,
            horizon: env.horizon,
            seed,
            ..TsgeConfig::default()
        };
        let mut agent = TsgeAgent::for_bandit(cfg, &bandit)?;
        agent.run_etc(&mut bandit)?;
        let means = bandit.true_means();
        let miss = (0..bandit.num_real_arms()).any(|k| (agent.beliefs()[k].mu_hat - means[k]).abs() > delta);
        Ok(u64::from(miss))
    })?;
    Ok(failures.iter().sum::<u64>() as f64 / trials.max(1) as f64)
}

/// Alarm rate over `episodes` change-free episodes, together with the
/// one-sided closed-form bound.
pub fn stationary_false_alarms(cfg: &ValidationConfig, episodes: u64, base_seed: u64) -> Result<(f64, f64)> {
    let env0 = cfg.stationary_env(base_seed);
    let sched = cfg.agent_config(base_seed).schedule(env0.num_arms())?;
    let per_run = (cfg.env.horizon.saturating_sub(sched.etc_slots(env0.num_real_arms())) / sched.episode_len).max(1);
    let runs = episodes.div_ceil(per_run);
    let alarms = par_map(runs, |r| {
        let seed = base_seed.wrapping_add(r);
        let todo = per_run.min(episodes - r * per_run);
        let mut env = GaussianEnv::new(cfg.stationary_env(seed))?;
        let mut agent = TsgeAgent::for_bandit(cfg.agent_config(seed), &env)?;
        agent.run_etc(&mut env)?;
        let mut n = 0u64;
        for _ in 0..todo {
            n += u64::from(agent.run_episode(&mut env)?.summary.detected);
        }
        Ok(n)
    })?;
    let rate = alarms.iter().sum::<u64>() as f64 / episodes.max(1) as f64;

    let k = env0.num_arms();
    let params = BoundParams {
        num_arms: k,
        horizon: cfg.env.horizon,
        sigma: cfg.env.sigma,
        delta: cfg.agent_config(base_seed).delta,
        n_etc: sched.n_etc,
        t_bp: sched.bp_len,
        t_ts: sched.ts_len,
        ..BoundParams::default()
    };
    let s = sigma_nc(&params, 1, &vec![sched.n_etc; k])?;
    Ok((rate, p_false_alarm(&params, s, Tail::OneSided)))
}

/// Where a planted change lands in episode 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Plant {
    /// `offset` slots into the TS phase; uniformly random arm and sign.
    Ts { offset: u64, magnitude: f64 },
    /// After `t_minus` broadcasts; arm `arm` moves by `change`.
    Bp { t_minus: u64, arm: usize, change: f64 },
}

/// Fraction of runs in which episode 2 raises the broadcast alarm.
pub fn planted_detection_rate(cfg: &ValidationConfig, plant: Plant, runs: u64, base_seed: u64) -> Result<f64> {
    let hits = par_map(runs, |i| {
        let seed = base_seed.wrapping_add(i);
        let mut env_cfg = cfg.stationary_env(seed);
        let agent_cfg = cfg.agent_config(seed);
        let sched = agent_cfg.schedule(env_cfg.num_arms())?;
        let ep2 = sched.etc_slots(env_cfg.num_real_arms()) + sched.episode_len;
        let (slot, arm, change) = match plant {
            Plant::Ts { offset, magnitude } => {
                let mut rng = seeded_rng(seed, streams::PLANT);
                let arm = rng.random_range(0..env_cfg.num_real_arms());
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                (ep2 + offset + 1, arm, sign * magnitude)
            }
            Plant::Bp { t_minus, arm, change } => (ep2 + sched.ts_len + t_minus + 1, arm, change),
        };
        let new_mean = env_cfg.initial_means[arm] + change;
        env_cfg.scheduled_changes.push(ScheduledChange { slot, arm, new_mean });
        let mut env = GaussianEnv::new(env_cfg)?;
        let mut agent = TsgeAgent::for_bandit(agent_cfg, &env)?;
        agent.run_etc(&mut env)?;
        agent.run_episode(&mut env)?;
        Ok(u64::from(agent.run_episode(&mut env)?.summary.detected))
    })?;
    Ok(hits.iter().sum::<u64>() as f64 / runs.max(1) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MandatoryProbingReport {
    pub runs: u64,
    pub episode_len: u64,
    /// `T_l + d n_ge`.
    pub age_bound: u64,
    pub max_age: u64,
    pub runs_without_ge: u64,
    /// Largest age among runs in which group exploration never ran.
    pub max_age_without_ge: u64,
}

fn probe_ages(env_cfg: EnvConfig, agent_cfg: TsgeConfig) -> Result<(u64, bool)> {
    let mut env = GaussianEnv::new(env_cfg.clone())?;
    let mut agent = TsgeAgent::for_bandit(agent_cfg, &env)?;
    let opts = RunOptions {
        age_from_slot: agent.schedule().etc_slots(env_cfg.num_real_arms()),
        ..RunOptions::new(env_cfg.horizon)
    };
    let res = run_policy(&mut agent, &mut env, &opts)?;
    Ok((res.max_probe_age, agent.episodes().iter().any(|e| e.detected)))
}

/// Sampling ages after the warm-up, once under the slowest admissible
/// change rate and once with no changes at all.
pub fn mandatory_probing(cfg: &ValidationConfig, runs: u64, base_seed: u64) -> Result<MandatoryProbingReport> {
    let changing = par_map(runs, |i| {
        let seed = base_seed.wrapping_add(i);
        let env_cfg = pad_to_power_of_two(&EnvConfig {
            seed,
            change_prob: cfg.env.change_prob.max(min_change_prob(cfg.env.horizon)),
            enforce_min_change_prob: true,
            ..cfg.env.clone()
        });
        probe_ages(env_cfg, cfg.agent_config(seed))
    })?;
    let quiet = par_map(runs, |i| {
        let seed = base_seed.wrapping_add(i);
        probe_ages(cfg.stationary_env(seed), cfg.agent_config(seed))
    })?;
    let sched = cfg.agent_config(base_seed).schedule(cfg.stationary_env(base_seed).num_arms())?;
    let all = changing.iter().chain(&quiet);
    let no_ge: Vec<u64> = all.clone().filter(|r| !r.1).map(|r| r.0).collect();
    Ok(MandatoryProbingReport {
        runs: 2 * runs,
        episode_len: sched.episode_len,
        age_bound: sched.episode_len + sched.ge_slots(),
        max_age: all.map(|r| r.0).max().unwrap_or(0),
        runs_without_ge: no_ge.len() as u64,
        max_age_without_ge: no_ge.into_iter().max().unwrap_or(0),
    })
}

pub fn run_validation_suite(
    cfg: &ValidationConfig,
    exp: &ExperimentConfig,
    out: &Path,
) -> Result<(Vec<PathBuf>, ValidationReport)> {
    cfg.validate()?;
    let seed = exp.seed(0);
    let mut checks = Vec::new();

    let n = cfg.localization_trials as f64;
    let p = cfg.localization_fail_prob;
    let env = cfg.stationary_env(seed);
    let loc = localization_failure_rate(&env, cfg.localization_delta, p, cfg.localization_trials, seed)?;
    checks.push(CheckResult::at_most("localization_failure_rate", loc, p + 3.0 * (p * (1.0 - p) / n).sqrt()));

    let (fa, bound) = stationary_false_alarms(cfg, cfg.false_alarm_episodes, seed)?;
    checks.push(CheckResult::at_most("stationary_false_alarm_rate", fa, 3.0 * bound));

    let ts = Plant::Ts {
        offset: cfg.ts_plant_offset,
        magnitude: cfg.ts_plant_sigmas * cfg.env.sigma,
    };
    let rate = planted_detection_rate(cfg, ts, cfg.ts_plants, seed)?;
    checks.push(CheckResult::at_least("ts_phase_detection_rate", rate, 0.99));

    let (low, high) = desk_extremes(&env.initial_means[..env.num_real_arms()]);
    let d = cfg.bp_plant_change;
    let cases = [
        ("bp_case1_detection_rate", cfg.bp_early_t_minus, low, d),
        ("bp_case2_detection_rate", cfg.bp_late_t_minus, low, d),
        ("bp_case3_detection_rate", cfg.bp_early_t_minus, high, -d),
        ("bp_case4_detection_rate", cfg.bp_late_t_minus, high, -d),
    ];
    for (name, t_minus, arm, change) in cases {
        let plant = Plant::Bp { t_minus, arm, change };
        let rate = planted_detection_rate(cfg, plant, cfg.bp_plants_per_case, seed)?;
        let late = t_minus == cfg.bp_late_t_minus;
        checks.push(if late {
            CheckResult::at_most(name, rate, 0.05)
        } else {
            CheckResult::at_least(name, rate, 0.95)
        });
    }

    let probing = mandatory_probing(cfg, cfg.probing_runs, seed)?;
    checks.push(CheckResult::at_most("max_age_after_warm_up", probing.max_age as f64, probing.age_bound as f64));
    checks.push(CheckResult::at_most(
        "max_age_without_group_exploration",
        probing.max_age_without_ge as f64,
        probing.episode_len as f64,
    ));

    let all_pass = checks.iter().all(|c| c.pass);
    let report = ValidationReport { checks, probing, all_pass };
    let json = out.join("validation.json");
    write_json(&json, &report)?;
    Ok((vec![json], report))
}

/// Indices of the lowest and highest means.
fn desk_extremes(means: &[f64]) -> (usize, usize) {
    let by = |better: fn(f64, f64) -> bool| {
        (0..means.len())
            .reduce(|a, b| if better(means[b], means[a]) { b } else { a })
            .unwrap_or(0)
    };
    (by(|x, y| x < y), by(|x, y| x > y))
}
