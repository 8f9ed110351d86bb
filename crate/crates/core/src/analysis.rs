//! Closed-form probability and regret bounds, crossing-point solvers and
//! the empirical regret of a recorded trace.

use serde::{Deserialize, Serialize};

use crate::env::{Action, ChangeRecord, DUMMY_ARM_MEAN};
use crate::error::{invalid, Error, Result};
use crate::sim::TraceRow;

/// Standard Gaussian upper tail `Q(x) = erfc(x / sqrt 2) / 2`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Which variance the missed-detection statistics use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceForm {
    /// `sigma^2 / K^2 * (...)`, as in the missed-detection derivations.
    #[default]
    OverKSquared,
    /// `sigma^2 / K * (...)`, matching the no-change statistic.
    OverK,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    #[default]
    OneSided,
    TwoSided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundParams {
    pub num_arms: usize,
    pub horizon: u64,
    pub num_changes: f64,
    pub sigma: f64,
    pub delta: f64,
    pub n_etc: u64,
    pub t_bp: u64,
    pub t_ts: u64,
    pub delta_max: f64,
    /// Magnitude of the change under study (signed).
    pub change: f64,
    /// Per-episode change probability.
    pub p_c: f64,
    pub variance_form: VarianceForm,
}

impl Default for BoundParams {
    fn default() -> Self {
        Self {
            num_arms: 8,
            horizon: 100_000,
            num_changes: 10.0,
            sigma: 0.1,
            delta: 0.05,
            n_etc: 100,
            t_bp: 100,
            t_ts: 216,
            delta_max: 0.5,
            change: 0.2,
            p_c: 0.0,
            variance_form: VarianceForm::OverKSquared,
        }
    }
}

impl BoundParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_arms == 0 || self.horizon == 0 {
            return invalid("arm count and horizon must be positive");
        }
        if !(self.sigma >= 0.0 && self.delta > 0.0) {
            return invalid("sigma must be non-negative and delta positive");
        }
        if self.num_changes < 0.0 || self.num_changes > (self.horizon as f64).sqrt() {
            return invalid(format!(
                "change count {} outside [0, sqrt(T)]",
                self.num_changes
            ));
        }
        Ok(())
    }

    fn log2_k(&self) -> f64 {
        (self.num_arms as f64).log2()
    }
}

/// Standard deviation of the no-change broadcast statistic after `m` probing
/// phases: `sqrt(sigma^2/K * (1/n_ETC + 1/(m T_BP) + sum_j 1/n_j))`.
pub fn sigma_nc(p: &BoundParams, m: u64, per_arm_counts: &[u64]) -> Result<f64> {
    if p.n_etc == 0 || m == 0 || p.t_bp == 0 || per_arm_counts.contains(&0) {
        return invalid("all sample counts must be positive");
    }
    let inv: f64 = per_arm_counts.iter().map(|&n| 1.0 / n as f64).sum();
    let var = p.sigma * p.sigma / p.num_arms as f64
        * (1.0 / p.n_etc as f64 + 1.0 / (m * p.t_bp) as f64 + inv);
    Ok(var.sqrt())
}

/// False-alarm probability of the broadcast test, `Q(4 delta / sigma_NC)`.
pub fn p_false_alarm(p: &BoundParams, sigma_nc: f64, tail: Tail) -> f64 {
    let one = if sigma_nc > 0.0 {
        q_function(4.0 * p.delta / sigma_nc)
    } else {
        0.0
    };
    match tail {
        Tail::OneSided => one,
        Tail::TwoSided => (2.0 * one).min(1.0),
    }
}

/// Standard deviation of the post-change statistic with `t_minus + t_plus`
/// samples of the changed arm.
pub fn sigma_post_change(p: &BoundParams, samples: u64) -> Result<f64> {
    if p.n_etc == 0 || samples == 0 || p.t_bp == 0 {
        return invalid("all sample counts must be positive");
    }
    let k = p.num_arms as f64;
    let scale = match p.variance_form {
        VarianceForm::OverKSquared => k * k,
        VarianceForm::OverK => k,
    };
    let var = p.sigma * p.sigma / scale
        * (1.0 / p.n_etc as f64 + 1.0 / samples as f64 + 1.0 / p.t_bp as f64);
    Ok(var.sqrt())
}

/// Missed-detection probability for a change inside the TS phase:
/// `Q((|Delta| - 2 delta) / sigma_Z')`.
pub fn p_missed_ts(p: &BoundParams, t_minus: u64, t_plus: u64) -> Result<f64> {
    let gap = p.change.abs() - 2.0 * p.delta;
    if gap < -1e-12 {
        return Err(Error::Domain(format!(
            "change {} below the 2 delta = {} threshold",
            p.change,
            2.0 * p.delta
        )));
    }
    let s = sigma_post_change(p, t_minus + t_plus)?;
    Ok(if s > 0.0 { q_function(gap.max(0.0) / s) } else { 0.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BpCase {
    /// Increase early enough that the mean shift clears `4 delta`.
    Case1,
    /// Increase too late in the probing phase.
    Case2,
    /// Decrease early enough.
    Case3,
    /// Decrease too late.
    Case4,
}

impl BpCase {
    /// Cases 2 and 4 have missed-detection probability above one half.
    pub fn is_high(self) -> bool {
        matches!(self, BpCase::Case2 | BpCase::Case4)
    }

    pub fn label(self) -> &'static str {
        match self {
            BpCase::Case1 => "case1",
            BpCase::Case2 => "case2",
            BpCase::Case3 => "case3",
            BpCase::Case4 => "case4",
        }
    }
}

/// Latest pre-change broadcast count for which the shifted mean still
/// reaches `4 delta`: `T_BP (|Delta| - 4 delta) / |Delta|`.
pub fn bp_case_boundary(p: &BoundParams) -> f64 {
    let d = p.change.abs();
    if d == 0.0 {
        return f64::NEG_INFINITY;
    }
    p.t_bp as f64 * (d - 4.0 * p.delta) / d
}

pub fn classify_bp_case(p: &BoundParams, t_minus: u64) -> BpCase {
    let early = p.change.abs() > 4.0 * p.delta && (t_minus as f64) <= bp_case_boundary(p) + 1e-9;
    match (p.change >= 0.0, early) {
        (true, true) => BpCase::Case1,
        (true, false) => BpCase::Case2,
        (false, true) => BpCase::Case3,
        (false, false) => BpCase::Case4,
    }
}

/// Missed-detection probability for a change inside the probing phase.
///
/// The statistic has mean `t_plus |Delta| / T_BP`; the returned value is
/// `Q((mean - 4 delta) / sigma_Z')`, which exceeds one half in Cases 2/4.
pub fn p_missed_bp(p: &BoundParams, t_minus: u64, t_plus: u64) -> Result<(BpCase, f64)> {
    if t_minus + t_plus != p.t_bp {
        return invalid(format!(
            "t_minus + t_plus = {} must equal T_BP = {}",
            t_minus + t_plus,
            p.t_bp
        ));
    }
    let case = classify_bp_case(p, t_minus);
    let mean = t_plus as f64 * p.change.abs() / p.t_bp as f64;
    let s = sigma_post_change(p, p.t_bp)?;
    let prob = if s > 0.0 {
        q_function((mean - 4.0 * p.delta) / s)
    } else if mean >= 4.0 * p.delta {
        0.0
    } else {
        1.0
    };
    Ok((case, prob))
}

/// `K ln t + sqrt(t) * max(N_C (1 + log2 K), t^(2/5))`.
pub fn regret_bound_tsge(p: &BoundParams, t: f64) -> f64 {
    let t = t.max(1.0);
    p.num_arms as f64 * t.ln() + t.sqrt() * (p.num_changes * (1.0 + p.log2_k())).max(t.powf(0.4))
}

/// `sqrt(N_C K t ln t)`.
pub fn regret_bound_competitor(p: &BoundParams, t: f64) -> f64 {
    let t = t.max(1.0);
    (p.num_changes * p.num_arms as f64 * t * t.ln()).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCurve {
    pub label: String,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![hi];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

pub fn bound_curves(p: &BoundParams, grid: &[f64]) -> (BoundCurve, BoundCurve) {
    let curve = |label: &str, f: fn(&BoundParams, f64) -> f64| BoundCurve {
        label: label.to_owned(),
        grid: grid.to_vec(),
        values: grid.iter().map(|&t| f(p, t)).collect(),
    };
    (
        curve("tsge", regret_bound_tsge),
        curve("competitor", regret_bound_competitor),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossings {
    /// Where `N_C (1 + log2 K) = t^(2/5)`.
    pub t1: f64,
    pub t2: Option<f64>,
    pub t3: Option<f64>,
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let f_lo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (f_lo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Every sign change of `tsge - competitor` on `[2, t_max]`, in order.
pub fn bound_sign_changes(p: &BoundParams, t_max: f64) -> Vec<f64> {
    let diff = |t: f64| regret_bound_tsge(p, t) - regret_bound_competitor(p, t);
    let grid = log_grid(2.0, t_max.max(2.0), 4096);
    grid.windows(2)
        .filter(|w| (diff(w[0]) > 0.0) != (diff(w[1]) > 0.0))
        .map(|w| bisect(diff, w[0], w[1]))
        .collect()
}

/// `T1` in closed form and the first two sign changes as `T2 <= T3`.
pub fn crossing_points(p: &BoundParams, t_max: f64) -> Crossings {
    let roots = bound_sign_changes(p, t_max);
    Crossings {
        t1: (p.num_changes * (1.0 + p.log2_k())).powf(2.5),
        t2: roots.first().copied(),
        t3: roots.get(1).copied(),
    }
}

/// Cumulative regret of a trace whose true means start at `initial_means`
/// and move as recorded in `changes`. Group actions are charged the
/// average over their real members.
pub fn empirical_regret(
    initial_means: &[f64],
    num_real: usize,
    trace: &[TraceRow],
    changes: &[ChangeRecord],
) -> Result<BoundCurve> {
    if num_real == 0 || num_real > initial_means.len() {
        return invalid("real arm count out of range");
    }
    if let Some(c) = changes.iter().find(|c| c.slot as usize > trace.len() || c.arm >= num_real) {
        return invalid(format!("change at slot {} arm {} lies outside the trace", c.slot, c.arm));
    }
    let mut means = initial_means.to_vec();
    let mut pending = changes.iter().peekable();
    let mut total = 0.0;
    let mut grid = Vec::with_capacity(trace.len());
    let mut values = Vec::with_capacity(trace.len());
    for (i, row) in trace.iter().enumerate() {
        let slot = i as u64 + 1;
        if row.slot != slot {
            return invalid(format!("trace row {i} has slot {}, expected {slot}", row.slot));
        }
        while let Some(c) = pending.next_if(|c| c.slot <= slot) {
            means[c.arm] = c.new_mean;
        }
        let best = means[..num_real].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let played = action_mean(&means, num_real, row.action);
        total += best - played;
        grid.push(slot as f64);
        values.push(total);
    }
    Ok(BoundCurve {
        label: "empirical".to_owned(),
        grid,
        values,
    })
}

fn action_mean(means: &[f64], num_real: usize, action: Action) -> f64 {
    let (sum, n) = action
        .members(means.len())
        .filter(|&i| i < num_real)
        .fold((0.0, 0usize), |(s, n), i| (s + means[i], n + 1));
    if n == 0 {
        DUMMY_ARM_MEAN
    } else {
        sum / n as f64
    }
}
