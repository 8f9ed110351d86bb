//! Browser front-end: three operations exported through wasm-bindgen, each
//! returning a JSON string that `www/index.html` plots on a canvas.

use serde_json::{json, Value};
use tsge::agent::{TsgeAgent, TsgeConfig};
use tsge::analysis::{crossing_points, log_grid, regret_bound_competitor, regret_bound_tsge, BoundParams};
use tsge::baselines::{ClassicTs, Mucb, MucbConfig};
use tsge::env::{pad_to_power_of_two, EnvConfig, GaussianEnv, ScheduledChange};
use tsge::error::Result;
use tsge::sim::{run_policy, Policy, RunOptions};
use tsge::swipt::{b_l, b_n, nearest_los_ccdf, nearest_nlos_ccdf, prob_best_is_los, SwiptScenario};
use wasm_bindgen::prelude::*;

fn to_js(r: Result<Value>) -> std::result::Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e.to_string()))
}

/// Both regret bounds on a log grid plus their crossing points.
pub fn bound_curves_value(num_arms: usize, num_changes: f64, horizon: f64, points: usize) -> Result<Value> {
    let p = BoundParams {
        num_arms,
        num_changes,
        horizon: horizon as u64,
        ..BoundParams::default()
    };
    p.validate()?;
    let grid = log_grid(1.0, horizon, points.max(2));
    let c = crossing_points(&p, horizon);
    Ok(json!({
        "t": grid,
        "tsge": grid.iter().map(|&t| regret_bound_tsge(&p, t)).collect::<Vec<_>>(),
        "competitor": grid.iter().map(|&t| regret_bound_competitor(&p, t)).collect::<Vec<_>>(),
        "t1": c.t1,
        "t2": c.t2,
        "t3": c.t3,
    }))
}

#[wasm_bindgen]
pub fn bound_curves(num_arms: usize, num_changes: f64, horizon: f64, points: usize) -> std::result::Result<String, JsError> {
    to_js(bound_curves_value(num_arms, num_changes, horizon, points))
}

/// Nearest-LOS and nearest-NLOS distance CCDFs and the LOS-best probability.
pub fn geometry_value(num_devices: usize, radius: f64, blockage_rate: f64, points: usize) -> Result<Value> {
    let s = SwiptScenario {
        num_devices,
        radius,
        blockage_rate,
        ..SwiptScenario::default()
    };
    s.validate()?;
    let n = points.max(2);
    let x: Vec<f64> = (1..=n).map(|i| radius * i as f64 / (n + 1) as f64).collect();
    let los = x.iter().map(|&r| nearest_los_ccdf(&s, r)).collect::<Result<Vec<_>>>()?;
    let nlos = x.iter().map(|&r| nearest_nlos_ccdf(&s, r)).collect::<Result<Vec<_>>>()?;
    Ok(json!({
        "x": x,
        "los_ccdf": los,
        "nlos_ccdf": nlos,
        "b_l": b_l(&s),
        "b_n": b_n(&s),
        "p_best_los": prob_best_is_los(&s)?,
    }))
}

#[wasm_bindgen]
pub fn geometry(num_devices: usize, radius: f64, blockage_rate: f64, points: usize) -> std::result::Result<String, JsError> {
    to_js(geometry_value(num_devices, radius, blockage_rate, points))
}

fn curve<P: Policy>(policy: &mut P, env: &EnvConfig, opts: &RunOptions) -> Result<Value> {
    let mut bandit = GaussianEnv::new(env.clone())?;
    let res = run_policy(policy, &mut bandit, opts)?;
    Ok(json!({
        "slot": res.checkpoints.iter().map(|c| c.0).collect::<Vec<_>>(),
        "regret": res.checkpoints.iter().map(|c| c.1).collect::<Vec<_>>(),
    }))
}

/// One seeded run of TS-GE, TS and M-UCB on a four-arm bandit whose best
/// arm collapses at `change_slot`.
pub fn regret_race_value(seed: u64, horizon: u64, change_slot: u64) -> Result<Value> {
    let mut env = pad_to_power_of_two(&EnvConfig {
        initial_means: vec![0.9, 0.6, 0.5, 0.4],
        horizon,
        seed,
        ..EnvConfig::default()
    });
    env.scheduled_changes.push(ScheduledChange {
        slot: change_slot,
        arm: 0,
        new_mean: 0.0,
    });
    env.validate()?;
    let opts = RunOptions {
        checkpoint_every: (horizon / 200).max(1),
        ..RunOptions::new(horizon)
    };
    let tsge_cfg = TsgeConfig {
        delta: 0.05,
        loc_fail_prob: 0.05,
        horizon,
        seed,
        ..TsgeConfig::default()
    };
    let probe = GaussianEnv::new(env.clone())?;
    let mut tsge = TsgeAgent::for_bandit(tsge_cfg, &probe)?;
    let mut ts = ClassicTs::new(env.num_real_arms(), seed);
    let mut mucb = Mucb::new(
        &MucbConfig {
            horizon,
            ..MucbConfig::default()
        },
        env.num_real_arms(),
    )?;
    Ok(json!({
        "TS-GE": curve(&mut tsge, &env, &opts)?,
        "TS": curve(&mut ts, &env, &opts)?,
        "M-UCB": curve(&mut mucb, &env, &opts)?,
    }))
}

#[wasm_bindgen]
pub fn regret_race(seed: u64, horizon: u64, change_slot: u64) -> std::result::Result<String, JsError> {
    to_js(regret_race_value(seed, horizon, change_slot))
}
