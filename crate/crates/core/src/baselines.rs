//! Comparator agents: stationarity-oblivious Thompson sampling and M-UCB.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::agent::{ts_select, ts_update, ArmBelief};
use crate::env::{Action, Bandit};
use crate::error::{invalid, Result};
use crate::sim::{Phase, Policy, SlotRecord};
use crate::{seeded_rng, streams, Rng};

/// Beta-Bernoulli Thompson sampling over the real arms, never probing or
/// resetting.
#[derive(Debug, Clone)]
pub struct ClassicTs {
    beliefs: Vec<ArmBelief>,
    rng: Rng,
}

impl ClassicTs {
    pub fn new(num_real: usize, seed: u64) -> Self {
        Self {
            beliefs: vec![ArmBelief::default(); num_real.max(1)],
            rng: seeded_rng(seed, streams::AGENT),
        }
    }

    pub fn beliefs(&self) -> &[ArmBelief] {
        &self.beliefs
    }
}

impl Policy for ClassicTs {
    fn label(&self) -> &'static str {
        "TS"
    }

    fn play_slot<B: Bandit>(&mut self, env: &mut B) -> Result<SlotRecord> {
        env.advance();
        let arm = ts_select(&self.beliefs, &mut self.rng);
        let outcome = env.play(Action::Arm(arm))?;
        ts_update(&mut self.beliefs[arm], &outcome, &mut self.rng);
        Ok(SlotRecord {
            slot: outcome.slot,
            phase: Phase::Ts,
            action: Action::Arm(arm),
            outcome,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MucbConfig {
    /// Detection window per arm; must be even.
    pub window: usize,
    /// Restart threshold on the half-window sum difference. `None` derives
    /// `sqrt(w/2 * ln(2 K T^2))`.
    pub threshold: Option<f64>,
    /// Forced-exploration rate. `None` derives
    /// `min(1, sqrt(K ln T / T)) * exploration_scale`.
    pub exploration_rate: Option<f64>,
    pub exploration_scale: f64,
    pub horizon: u64,
}

impl Default for MucbConfig {
    fn default() -> Self {
        Self {
            window: 100,
            threshold: None,
            exploration_rate: None,
            exploration_scale: 1.0,
            horizon: 100_000,
        }
    }
}

impl MucbConfig {
    pub fn resolved_threshold(&self, num_arms: usize) -> f64 {
        self.threshold.unwrap_or_else(|| {
            let t = self.horizon as f64;
            (self.window as f64 / 2.0 * (2.0 * num_arms as f64 * t * t).ln()).sqrt()
        })
    }

    pub fn resolved_exploration_rate(&self, num_arms: usize) -> f64 {
        self.exploration_rate.unwrap_or_else(|| {
            let t = (self.horizon.max(2)) as f64;
            (num_arms as f64 * t.ln() / t).sqrt().min(1.0) * self.exploration_scale
        })
    }

    pub fn validate(&self, num_arms: usize) -> Result<()> {
        if self.window == 0 || !self.window.is_multiple_of(2) {
            return invalid(format!("window must be even and positive, got {}", self.window));
        }
        let g = self.resolved_exploration_rate(num_arms);
        if !(0.0..=1.0).contains(&g) {
            return invalid(format!("exploration rate {g} outside [0, 1]"));
        }
        let b = self.resolved_threshold(num_arms);
        if b.is_nan() || b <= 0.0 {
            return invalid(format!("threshold must be positive, got {b}"));
        }
        Ok(())
    }
}

/// Monitored UCB: UCB1 with a deterministic forced-exploration schedule and
/// a per-arm two-half window test that flushes every arm on alarm.
#[derive(Debug, Clone)]
pub struct Mucb {
    num_arms: usize,
    threshold: f64,
    /// Forced-exploration period `floor(K / gamma)`; `None` when gamma = 0.
    period: Option<u64>,
    window: usize,
    counts: Vec<u64>,
    sums: Vec<f64>,
    recent: Vec<VecDeque<f64>>,
    last_restart: u64,
    restarts: Vec<u64>,
}

impl Mucb {
    pub fn new(cfg: &MucbConfig, num_real: usize) -> Result<Self> {
        if num_real == 0 {
            return invalid("M-UCB needs at least one arm");
        }
        cfg.validate(num_real)?;
        let gamma = cfg.resolved_exploration_rate(num_real);
        let period = (gamma > 0.0).then(|| ((num_real as f64 / gamma).floor() as u64).max(num_real as u64));
        Ok(Self {
            num_arms: num_real,
            threshold: cfg.resolved_threshold(num_real),
            period,
            window: cfg.window,
            counts: vec![0; num_real],
            sums: vec![0.0; num_real],
            recent: vec![VecDeque::with_capacity(cfg.window); num_real],
            last_restart: 0,
            restarts: Vec::new(),
        })
    }

    /// Slots at which the detector fired.
    pub fn restarts(&self) -> &[u64] {
        &self.restarts
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    fn choose(&self, slot: u64) -> (Phase, usize) {
        if let Some(period) = self.period {
            let offset = (slot - self.last_restart - 1) % period;
            if offset < self.num_arms as u64 {
                return (Phase::Forced, offset as usize);
            }
        }
        if let Some(i) = self.counts.iter().position(|&n| n == 0) {
            return (Phase::Ucb, i);
        }
        let total: u64 = self.counts.iter().sum();
        let ln_n = (total as f64).ln();
        let mut best = 0;
        let mut best_index = f64::NEG_INFINITY;
        for i in 0..self.num_arms {
            let n = self.counts[i] as f64;
            let index = self.sums[i] / n + (2.0 * ln_n / n).sqrt();
            if index > best_index {
                best_index = index;
                best = i;
            }
        }
        (Phase::Ucb, best)
    }

    fn change_detected(&self, arm: usize) -> bool {
        let buf = &self.recent[arm];
        if buf.len() < self.window {
            return false;
        }
        let half = self.window / 2;
        let first: f64 = buf.iter().take(half).sum();
        let second: f64 = buf.iter().skip(half).sum();
        (second - first).abs() > self.threshold
    }

    fn restart(&mut self, slot: u64) {
        self.counts.iter_mut().for_each(|n| *n = 0);
        self.sums.iter_mut().for_each(|s| *s = 0.0);
        self.recent.iter_mut().for_each(VecDeque::clear);
        self.last_restart = slot;
        self.restarts.push(slot);
    }
}

impl Policy for Mucb {
    fn label(&self) -> &'static str {
        "M-UCB"
    }

    fn play_slot<B: Bandit>(&mut self, env: &mut B) -> Result<SlotRecord> {
        env.advance();
        let (phase, arm) = self.choose(env.slot());
        let outcome = env.play(Action::Arm(arm))?;
        self.counts[arm] += 1;
        self.sums[arm] += outcome.reward;
        let buf = &mut self.recent[arm];
        if buf.len() == self.window {
            buf.pop_front();
        }
        buf.push_back(outcome.reward);
        if self.change_detected(arm) {
            self.restart(outcome.slot);
        }
        Ok(SlotRecord {
            slot: outcome.slot,
            phase,
            action: Action::Arm(arm),
            outcome,
        })
    }
}
