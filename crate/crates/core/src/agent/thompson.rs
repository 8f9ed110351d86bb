//! Beta-Bernoulli Thompson sampling kernel shared by TS-GE and classic TS.

use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::env::PullOutcome;

/// Per-arm belief: Beta posterior plus the running mean of raw rewards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmBelief {
    /// One plus the number of Bernoulli successes.
    pub alpha: f64,
    /// One plus the number of Bernoulli failures.
    pub beta: f64,
    pub mu_hat: f64,
    /// Samples behind `mu_hat`.
    pub pull_count: u64,
    pub last_probed_slot: u64,
}

impl Default for ArmBelief {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            mu_hat: 0.0,
            pull_count: 0,
            last_probed_slot: 0,
        }
    }
}

impl ArmBelief {
    /// Folds one raw reward into the running mean.
    pub fn record_reward(&mut self, reward: f64) {
        self.pull_count += 1;
        self.mu_hat += (reward - self.mu_hat) / self.pull_count as f64;
    }

    /// Replaces the estimate, weighting it as `weight` samples.
    pub fn reset_estimate(&mut self, mu_hat: f64, weight: u64) {
        self.mu_hat = mu_hat;
        self.pull_count = weight.max(1);
    }
}

/// Draws one Beta variate per belief and returns the index of the largest;
/// ties go to the lowest index.
pub fn ts_select<R: rand::Rng + ?Sized>(beliefs: &[ArmBelief], rng: &mut R) -> usize {
    let mut best = 0;
    let mut best_theta = f64::NEG_INFINITY;
    for (i, b) in beliefs.iter().enumerate() {
        // alpha, beta >= 1 always, so the parameters are valid.
        let theta = Beta::new(b.alpha, b.beta)
            .expect("Beta parameters are at least 1")
            .sample(rng);
        if theta > best_theta {
            best_theta = theta;
            best = i;
        }
    }
    best
}

/// Bernoulli trial on the normalized reward, then the posterior, count and
/// running-mean updates.
pub fn ts_update<R: rand::Rng + ?Sized>(belief: &mut ArmBelief, outcome: &PullOutcome, rng: &mut R) {
    let success = rng.random_bool(outcome.normalized_reward);
    if success {
        belief.alpha += 1.0;
    } else {
        belief.beta += 1.0;
    }
    belief.record_reward(outcome.reward);
    belief.last_probed_slot = outcome.slot;
}
