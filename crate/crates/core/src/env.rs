//! Piecewise-stationary K-armed Gaussian bandit.
//!
//! Time is slotted. Every slot starts with [`Bandit::advance`], which runs the
//! change process, followed by exactly one play: a single arm, the broadcast
//! of all arms, or a binary-coded super-arm. Multi-arm plays observe the
//! average of one fresh sample per member arm.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::{seeded_rng, streams, Rng};

/// Mean given to padding arms. A finite stand-in for minus infinity.
pub const DUMMY_ARM_MEAN: f64 = -1.0e6;

/// What the agent plays in one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    Arm(usize),
    /// All arms at once.
    Broadcast,
    /// Every arm whose 0-based code has bit `k` set.
    SuperArm(u32),
}

impl Action {
    /// Iterates the arm indices played by this action among `num_arms` arms.
    pub fn members(self, num_arms: usize) -> impl Iterator<Item = usize> {
        let (lo, hi, bit) = match self {
            Action::Arm(i) => (i, i + 1, None),
            Action::Broadcast => (0, num_arms, None),
            Action::SuperArm(k) => (0, num_arms, Some(k)),
        };
        (lo..hi).filter(move |i| bit.is_none_or(|k| (i >> k) & 1 == 1))
    }

    pub fn is_single(self) -> bool {
        matches!(self, Action::Arm(_))
    }
}

/// Result of one play.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PullOutcome {
    /// Raw observed reward (average over members for multi-arm plays).
    pub reward: f64,
    /// `clamp(reward / reward_cap, 0, 1)`, the success probability used for
    /// Beta updates.
    pub normalized_reward: f64,
    pub slot: u64,
}

impl PullOutcome {
    pub fn new(reward: f64, reward_cap: f64, slot: u64) -> Self {
        Self {
            reward,
            normalized_reward: (reward / reward_cap).clamp(0.0, 1.0),
            slot,
        }
    }
}

/// One entry of the environment's change log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChangeRecord {
    pub slot: u64,
    pub arm: usize,
    pub old_mean: f64,
    pub new_mean: f64,
}

/// A change forced at a fixed slot, independent of the Bernoulli process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduledChange {
    pub slot: u64,
    pub arm: usize,
    pub new_mean: f64,
}

/// Interface shared by every bandit the agents can face.
pub trait Bandit {
    /// Arm count seen by agents, a power of two after padding.
    fn num_arms(&self) -> usize;

    /// Arms `0..num_real_arms()` are real; the rest are padding.
    fn num_real_arms(&self) -> usize {
        self.num_arms()
    }

    fn reward_cap(&self) -> f64;

    /// Index of the current slot (1-based once the first slot has begun).
    fn slot(&self) -> u64;

    /// Begins the next slot and runs the change process.
    fn advance(&mut self);

    fn play(&mut self, action: Action) -> Result<PullOutcome>;

    /// True means in the current slot. Only regret bookkeeping may read this.
    fn true_means(&self) -> &[f64];

    /// Largest true mean among real arms.
    fn oracle_best_mean(&self) -> f64 {
        self.true_means()[..self.num_real_arms()]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Mean of the true means of the real arms an action plays.
    fn action_mean(&self, action: Action) -> f64 {
        let real = self.num_real_arms();
        let means = self.true_means();
        let (sum, n) = action
            .members(self.num_arms())
            .filter(|&i| i < real)
            .fold((0.0, 0usize), |(s, n), i| (s + means[i], n + 1));
        if n == 0 {
            DUMMY_ARM_MEAN
        } else {
            sum / n as f64
        }
    }
}

fn default_episode_len(horizon: u64) -> u64 {
    (horizon as f64).sqrt().floor().max(1.0) as u64
}

/// Configuration of a [`GaussianEnv`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub initial_means: Vec<f64>,
    /// Common reward standard deviation.
    pub sigma: f64,
    pub horizon: u64,
    /// Episode length of the change process; `floor(sqrt(horizon))` when 0.
    pub episode_len: u64,
    /// Per-slot change probability `p_b`.
    pub change_prob: f64,
    /// `[min, max]` of the change magnitude `|Δ|`.
    pub change_magnitude: [f64; 2],
    pub reward_cap: f64,
    pub seed: u64,
    /// No Bernoulli change happens at or before this slot.
    pub change_start: u64,
    pub scheduled_changes: Vec<ScheduledChange>,
    /// Reject `change_prob` values below the lower bound tied to the horizon.
    pub enforce_min_change_prob: bool,
    /// Trailing padding arms, set by [`pad_to_power_of_two`].
    pub num_dummy_arms: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            initial_means: vec![0.1, 0.3, 0.5, 0.7, 0.2, 0.4, 0.6, 0.8],
            sigma: 0.1,
            horizon: 100_000,
            episode_len: 0,
            change_prob: 0.0,
            change_magnitude: [0.2, 0.5],
            reward_cap: 1.0,
            seed: 0,
            change_start: 0,
            scheduled_changes: Vec::new(),
            enforce_min_change_prob: false,
            num_dummy_arms: 0,
        }
    }
}

/// Smallest per-slot change probability compatible with `horizon`:
/// `1 - (1/T)^(1/(sqrt(T) - T^(2/5)))`.
pub fn min_change_prob(horizon: u64) -> f64 {
    let t = horizon as f64;
    let span = t.sqrt() - t.powf(0.4);
    if span <= 0.0 {
        return 1.0;
    }
    -((-t.ln() / span).exp_m1())
}

/// Probability that an episode of `episode_len` slots sees a change:
/// `sum_{k=1}^{T_l} (1-p_b)^(k-1) p_b`.
pub fn episode_change_prob(change_prob: f64, episode_len: u64) -> f64 {
    (1..=episode_len)
        .map(|k| (1.0 - change_prob).powi(k as i32 - 1) * change_prob)
        .sum()
}

impl EnvConfig {
    pub fn num_arms(&self) -> usize {
        self.initial_means.len()
    }

    pub fn num_real_arms(&self) -> usize {
        self.num_arms() - self.num_dummy_arms
    }

    pub fn effective_episode_len(&self) -> u64 {
        if self.episode_len == 0 {
            default_episode_len(self.horizon)
        } else {
            self.episode_len
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.initial_means.is_empty() {
            return bad("at least one arm is required".into());
        }
        if self.num_dummy_arms >= self.num_arms() {
            return bad("every arm is a padding arm".into());
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be finite and non-negative, got {}", self.sigma));
        }
        if self.horizon == 0 {
            return bad("horizon must be positive".into());
        }
        if !(self.reward_cap > 0.0) {
            return bad("reward_cap must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.change_prob) {
            return bad(format!("change_prob {} outside [0, 1]", self.change_prob));
        }
        let [lo, hi] = self.change_magnitude;
        if self.change_prob > 0.0 {
            if !(lo > 0.0 && lo <= hi) {
                return bad(format!("change magnitude range [{lo}, {hi}] is not a positive interval"));
            }
            if lo < 2.0 * self.sigma {
                return bad(format!("minimum change {lo} is below 2 sigma = {}", 2.0 * self.sigma));
            }
        }
        if let Some(m) = self
            .initial_means
            .iter()
            .take(self.num_real_arms())
            .find(|&&m| m > self.reward_cap)
        {
            return bad(format!("initial mean {m} exceeds reward_cap {}", self.reward_cap));
        }
        if self.enforce_min_change_prob {
            let floor = min_change_prob(self.horizon);
            if self.change_prob < floor {
                return bad(format!("change_prob {} below the minimum {floor}", self.change_prob));
            }
        }
        for c in &self.scheduled_changes {
            if c.arm >= self.num_real_arms() {
                return bad(format!("scheduled change targets arm {} out of range", c.arm));
            }
        }
        Ok(())
    }
}

/// Pads the arm set up to the next power of two with [`DUMMY_ARM_MEAN`] arms.
pub fn pad_to_power_of_two(cfg: &EnvConfig) -> EnvConfig {
    let k = cfg.num_arms().max(1);
    let target = k.next_power_of_two();
    let mut out = cfg.clone();
    out.initial_means.resize(target, DUMMY_ARM_MEAN);
    out.num_dummy_arms += target - k;
    out
}

/// Mutable state of a [`GaussianEnv`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub current_means: Vec<f64>,
    pub t: u64,
    /// 0 before the change process starts, then 1, 2, ...
    pub episode_index: u64,
    pub change_log: Vec<ChangeRecord>,
    pub episode_changed: bool,
}

/// Gaussian bandit with the episodic single-change process.
#[derive(Debug, Clone)]
pub struct GaussianEnv {
    cfg: EnvConfig,
    state: EnvState,
    episode_len: u64,
    rng: Rng,
}

impl GaussianEnv {
    pub fn new(cfg: EnvConfig) -> Result<Self> {
        cfg.validate()?;
        let mut cfg = cfg;
        cfg.scheduled_changes.sort_by_key(|c| c.slot);
        let state = EnvState {
            current_means: cfg.initial_means.clone(),
            t: 0,
            episode_index: 0,
            change_log: Vec::new(),
            episode_changed: false,
        };
        Ok(Self {
            episode_len: cfg.effective_episode_len(),
            rng: seeded_rng(cfg.seed, streams::ENV),
            state,
            cfg,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn change_log(&self) -> &[ChangeRecord] {
        &self.state.change_log
    }

    /// Starts a new slot: episode bookkeeping, scheduled changes, then the
    /// Bernoulli change process.
    pub fn step_change_process(&mut self) {
        let st = &mut self.state;
        st.t += 1;
        let t = st.t;
        if t > self.cfg.change_start {
            let episode = (t - self.cfg.change_start - 1) / self.episode_len + 1;
            if episode != st.episode_index {
                st.episode_index = episode;
                st.episode_changed = false;
            }
        }

        let due = self
            .cfg
            .scheduled_changes
            .iter()
            .filter(|c| c.slot == t)
            .copied()
            .collect::<Vec<_>>();
        for c in due {
            self.apply_change(c.arm, c.new_mean);
        }

        let st = &self.state;
        if t <= self.cfg.change_start || st.episode_changed || self.cfg.change_prob <= 0.0 {
            return;
        }
        if !self.rng.random_bool(self.cfg.change_prob) {
            return;
        }
        let arm = self.rng.random_range(0..self.cfg.num_real_arms());
        let [lo, hi] = self.cfg.change_magnitude;
        let magnitude = if hi > lo { self.rng.random_range(lo..=hi) } else { lo };
        let sign = if self.rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let new_mean = (self.state.current_means[arm] + sign * magnitude).min(self.cfg.reward_cap);
        self.apply_change(arm, new_mean);
    }

    fn apply_change(&mut self, arm: usize, new_mean: f64) {
        let st = &mut self.state;
        let old_mean = st.current_means[arm];
        st.current_means[arm] = new_mean;
        st.change_log.push(ChangeRecord {
            slot: st.t,
            arm,
            old_mean,
            new_mean,
        });
        st.episode_changed = true;
    }

    fn sample(&mut self, arm: usize) -> f64 {
        let mean = self.state.current_means[arm];
        if self.cfg.sigma == 0.0 {
            return mean;
        }
        let z: f64 = self.rng.sample(StandardNormal);
        mean + self.cfg.sigma * z
    }

    /// One Gaussian sample of `arm`.
    pub fn pull(&mut self, arm: usize) -> Result<PullOutcome> {
        if arm >= self.cfg.num_arms() {
            return invalid(format!("arm {arm} out of range for {} arms", self.cfg.num_arms()));
        }
        let r = self.sample(arm);
        Ok(PullOutcome::new(r, self.cfg.reward_cap, self.state.t))
    }

    /// Average of one fresh sample per arm in `arms`.
    pub fn pull_set(&mut self, arms: &[usize]) -> Result<PullOutcome> {
        if arms.is_empty() {
            return invalid("cannot play an empty arm set");
        }
        if let Some(&a) = arms.iter().find(|&&a| a >= self.cfg.num_arms()) {
            return invalid(format!("arm {a} out of range for {} arms", self.cfg.num_arms()));
        }
        let sum: f64 = arms.iter().map(|&a| self.sample(a)).sum();
        Ok(PullOutcome::new(
            sum / arms.len() as f64,
            self.cfg.reward_cap,
            self.state.t,
        ))
    }
}

impl Bandit for GaussianEnv {
    fn num_arms(&self) -> usize {
        self.cfg.num_arms()
    }

    fn num_real_arms(&self) -> usize {
        self.cfg.num_real_arms()
    }

    fn reward_cap(&self) -> f64 {
        self.cfg.reward_cap
    }

    fn slot(&self) -> u64 {
        self.state.t
    }

    fn advance(&mut self) {
        self.step_change_process();
    }

    fn play(&mut self, action: Action) -> Result<PullOutcome> {
        match action {
            Action::Arm(i) => self.pull(i),
            _ => {
                let k = self.cfg.num_arms();
                if let Action::SuperArm(b) = action {
                    if (1usize << b) >= k {
                        return invalid(format!("super-arm bit {b} out of range for {k} arms"));
                    }
                }
                let arms: Vec<usize> = action.members(k).collect();
                self.pull_set(&arms)
            }
        }
    }

    fn true_means(&self) -> &[f64] {
        &self.state.current_means
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cfg(means: &[f64], sigma: f64) -> EnvConfig {
        EnvConfig {
            initial_means: means.to_vec(),
            sigma,
            horizon: 10_000,
            ..EnvConfig::default()
        }
    }

    #[test]
    fn zero_change_prob_never_changes() {
        let mut env = GaussianEnv::new(cfg(&[0.2, 0.8], 0.1)).unwrap();
        for _ in 0..10_000 {
            env.step_change_process();
        }
        assert!(env.change_log().is_empty());
        assert_eq!(env.true_means(), &[0.2, 0.8]);
    }

    #[test]
    fn certain_change_lands_in_first_slot_of_each_episode() {
        let c = EnvConfig {
            change_prob: 1.0,
            change_magnitude: [0.2, 0.2],
            episode_len: 10,
            reward_cap: 100.0,
            ..cfg(&[0.0; 4], 0.1)
        };
        let mut env = GaussianEnv::new(c).unwrap();
        for _ in 0..50 {
            env.step_change_process();
        }
        let slots: Vec<u64> = env.change_log().iter().map(|c| c.slot).collect();
        assert_eq!(slots, vec![1, 11, 21, 31, 41]);
        assert_abs_diff_eq!(episode_change_prob(1.0, 10), 1.0);
    }

    #[test]
    fn paused_episode_keeps_means() {
        let c = EnvConfig {
            change_prob: 1.0,
            change_magnitude: [0.3, 0.3],
            episode_len: 100,
            ..cfg(&[0.5; 4], 0.1)
        };
        let mut env = GaussianEnv::new(c).unwrap();
        env.step_change_process();
        let after_first = env.true_means().to_vec();
        for _ in 0..99 {
            env.step_change_process();
            assert_eq!(env.true_means(), &after_first[..]);
        }
        assert_eq!(env.change_log().len(), 1);
    }

    #[test]
    fn no_change_before_start_slot() {
        let c = EnvConfig {
            change_prob: 1.0,
            change_start: 25,
            episode_len: 10,
            ..cfg(&[0.5; 2], 0.1)
        };
        let mut env = GaussianEnv::new(c).unwrap();
        for _ in 0..25 {
            env.step_change_process();
        }
        assert!(env.change_log().is_empty());
        env.step_change_process();
        assert_eq!(env.change_log()[0].slot, 26);
    }

    #[test]
    fn change_is_recapped() {
        let c = EnvConfig {
            change_prob: 1.0,
            change_magnitude: [0.4, 0.4],
            ..cfg(&[0.9], 0.1)
        };
        for seed in 0..20 {
            let mut env = GaussianEnv::new(EnvConfig { seed, ..c.clone() }).unwrap();
            env.step_change_process();
            let m = env.true_means()[0];
            assert!(m == 1.0 || (m - 0.5).abs() < 1e-12, "{m}");
        }
    }

    #[test]
    fn noiseless_pull_returns_mean() {
        let mut env = GaussianEnv::new(cfg(&[1.0, 0.0], 0.0)).unwrap();
        env.advance();
        assert_eq!(env.pull(0).unwrap().reward, 1.0);
    }

    #[test]
    fn pull_out_of_range_is_rejected() {
        let mut env = GaussianEnv::new(cfg(&[0.1, 0.2], 0.1)).unwrap();
        assert!(matches!(env.pull(2), Err(Error::InvalidArgument(_))));
        assert!(matches!(env.pull_set(&[]), Err(Error::InvalidArgument(_))));
        assert!(env.play(Action::SuperArm(1)).is_err());
    }

    #[test]
    fn normalized_reward_is_clamped() {
        let o = PullOutcome::new(1.25, 1.0, 3);
        assert_eq!(o.normalized_reward, 1.0);
        assert_eq!(PullOutcome::new(-0.2, 1.0, 3).normalized_reward, 0.0);
        assert_eq!(PullOutcome::new(0.25, 0.5, 3).normalized_reward, 0.5);
    }

    #[test]
    fn empirical_mean_concentrates() {
        let mut env = GaussianEnv::new(cfg(&[0.5], 0.1)).unwrap();
        let n = 100_000;
        let mean = (0..n).map(|_| env.pull(0).unwrap().reward).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.002, "{mean}");
    }

    #[test]
    fn noiseless_broadcast_is_average_of_means() {
        let mut env = GaussianEnv::new(cfg(&[0.1, 0.2, 0.3, 0.9], 0.0)).unwrap();
        let r = env.play(Action::Broadcast).unwrap().reward;
        assert_abs_diff_eq!(r, 0.375, epsilon = 1e-15);
        let r = env.play(Action::SuperArm(0)).unwrap().reward;
        assert_abs_diff_eq!(r, 0.55, epsilon = 1e-15);
    }

    #[test]
    fn broadcast_variance_is_sigma_squared_over_k() {
        let mut env = GaussianEnv::new(cfg(&[0.0, 0.0, 0.0, 1.0], 0.1)).unwrap();
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| env.play(Action::Broadcast).unwrap().reward).collect();
        let m = xs.iter().sum::<f64>() / n as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((v - 0.0025).abs() < 0.0025 * 0.05, "{v}");
    }

    #[test]
    fn oracle_best_mean_ignores_dummies() {
        let env = GaussianEnv::new(cfg(&[0.1, 0.9, 0.5], 0.1)).unwrap();
        assert_eq!(env.oracle_best_mean(), 0.9);
        let padded = GaussianEnv::new(pad_to_power_of_two(&cfg(&[-5.0, -3.0, -4.0], 0.1))).unwrap();
        assert_eq!(padded.num_arms(), 4);
        assert_eq!(padded.oracle_best_mean(), -3.0);
        let flat = GaussianEnv::new(cfg(&[0.4, 0.4], 0.1)).unwrap();
        assert_eq!(flat.oracle_best_mean(), 0.4);
    }

    #[test]
    fn oracle_tracks_change_on_best_arm() {
        let c = EnvConfig {
            scheduled_changes: vec![ScheduledChange { slot: 3, arm: 1, new_mean: 1.0 }],
            ..cfg(&[0.1, 0.7, 0.5], 0.1)
        };
        let mut env = GaussianEnv::new(c).unwrap();
        for _ in 0..3 {
            env.advance();
        }
        assert_abs_diff_eq!(env.oracle_best_mean(), 1.0);
        assert_eq!(env.change_log()[0].old_mean, 0.7);
    }

    #[test]
    fn padding_rounds_up() {
        let p = pad_to_power_of_two(&cfg(&[0.1; 5], 0.1));
        assert_eq!(p.num_arms(), 8);
        assert_eq!(p.num_dummy_arms, 3);
        assert!(p.initial_means[5..].iter().all(|&m| m == DUMMY_ARM_MEAN));
        assert_eq!(pad_to_power_of_two(&cfg(&[0.1; 8], 0.1)).num_arms(), 8);
        assert_eq!(pad_to_power_of_two(&cfg(&vec![0.1; 1000], 0.1)).num_arms(), 1024);
    }

    #[test]
    fn validation_rejects_small_changes_and_high_means() {
        let c = EnvConfig {
            change_prob: 0.1,
            change_magnitude: [0.1, 0.3],
            ..cfg(&[0.5; 2], 0.1)
        };
        assert!(matches!(GaussianEnv::new(c), Err(Error::Config(_))));
        assert!(GaussianEnv::new(cfg(&[1.5], 0.1)).is_err());
        let c = EnvConfig {
            change_prob: 1e-9,
            change_magnitude: [0.2, 0.3],
            enforce_min_change_prob: true,
            ..cfg(&[0.5; 2], 0.1)
        };
        assert!(GaussianEnv::new(c).is_err());
    }

    #[test]
    fn min_change_prob_decreases_with_horizon() {
        let a = min_change_prob(10_000);
        let b = min_change_prob(100_000);
        assert!(a > b && b > 0.0);
        // 1 - (1/T)^(1/(sqrt T - T^0.4)) at T = 1e4
        let t: f64 = 1e4;
        let direct = 1.0 - (1.0 / t).powf(1.0 / (t.sqrt() - t.powf(0.4)));
        assert_abs_diff_eq!(a, direct, epsilon = 1e-12);
    }
}
