//! Policy trait and a runner that tracks regret and probing age.

use serde::{Deserialize, Serialize};

use crate::env::{Action, Bandit, PullOutcome};
use crate::error::Result;

/// Which part of its schedule a policy was in when it played a slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Phase {
    Etc,
    Ts,
    Bp,
    Ge,
    Ucb,
    Forced,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Etc => "ETC",
            Phase::Ts => "TS",
            Phase::Bp => "BP",
            Phase::Ge => "GE",
            Phase::Ucb => "UCB",
            Phase::Forced => "FORCED",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotRecord {
    pub slot: u64,
    pub phase: Phase,
    pub action: Action,
    pub outcome: PullOutcome,
}

/// A bandit policy that plays one slot at a time.
///
/// `play_slot` must call [`Bandit::advance`] exactly once before playing.
pub trait Policy {
    fn label(&self) -> &'static str;

    fn play_slot<B: Bandit>(&mut self, env: &mut B) -> Result<SlotRecord>;
}

/// One row of a per-slot trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub slot: u64,
    pub phase: Phase,
    #[serde(serialize_with = "serialize_action")]
    pub action: Action,
    pub reward: f64,
    pub regret_increment: f64,
}

pub(crate) fn action_label(a: Action) -> String {
    match a {
        Action::Arm(i) => i.to_string(),
        Action::Broadcast => "all".to_owned(),
        Action::SuperArm(k) => format!("B{}", k + 1),
    }
}

fn serialize_action<S: serde::Serializer>(a: &Action, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&action_label(*a))
}

/// Largest sampling age seen per arm: slots elapsed since the arm was last
/// played, individually or inside a group.
#[derive(Debug, Clone)]
pub struct ProbeAgeTracker {
    last: Vec<u64>,
    /// Gaps are only recorded for probes after this slot.
    from_slot: u64,
    max_age: u64,
}

impl ProbeAgeTracker {
    pub fn new(num_arms: usize, from_slot: u64) -> Self {
        Self {
            last: vec![0; num_arms],
            from_slot,
            max_age: 0,
        }
    }

    pub fn set_from_slot(&mut self, from_slot: u64) {
        self.from_slot = from_slot;
    }

    pub fn observe(&mut self, slot: u64, action: Action) {
        let n = self.last.len();
        for i in action.members(n) {
            if slot > self.from_slot {
                self.max_age = self.max_age.max(slot - self.last[i]);
            }
            self.last[i] = slot;
        }
    }

    /// Ages still open at `slot` count too.
    pub fn max_age_at(&self, slot: u64) -> u64 {
        self.last
            .iter()
            .map(|&l| slot.saturating_sub(l))
            .fold(self.max_age, u64::max)
    }

    pub fn last_probed(&self) -> &[u64] {
        &self.last
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub slots: u64,
    /// Cumulative regret is sampled every this many slots (and at the end).
    pub checkpoint_every: u64,
    pub keep_trace: bool,
    /// Probe ages are measured for slots after this one.
    pub age_from_slot: u64,
}

impl RunOptions {
    pub fn new(slots: u64) -> Self {
        Self {
            slots,
            checkpoint_every: slots.max(1),
            keep_trace: false,
            age_from_slot: 0,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunResult {
    /// `(slot, cumulative regret)` samples.
    pub checkpoints: Vec<(u64, f64)>,
    pub total_regret: f64,
    pub max_probe_age: u64,
    pub trace: Vec<TraceRow>,
}

/// Plays `opts.slots` slots, charging the gap between the best true mean
/// and the true mean of the played action (set average for group plays).
pub fn run_policy<P: Policy, B: Bandit>(
    policy: &mut P,
    env: &mut B,
    opts: &RunOptions,
) -> Result<RunResult> {
    let mut ages = ProbeAgeTracker::new(env.num_real_arms(), opts.age_from_slot);
    let mut out = RunResult::default();
    let mut cumulative = 0.0;
    let every = opts.checkpoint_every.max(1);
    for n in 1..=opts.slots {
        let rec = policy.play_slot(env)?;
        let regret = env.oracle_best_mean() - env.action_mean(rec.action);
        cumulative += regret;
        ages.observe(rec.slot, rec.action);
        if opts.keep_trace {
            out.trace.push(TraceRow {
                slot: rec.slot,
                phase: rec.phase,
                action: rec.action,
                reward: rec.outcome.reward,
                regret_increment: regret,
            });
        }
        if n % every == 0 || n == opts.slots {
            out.checkpoints.push((rec.slot, cumulative));
        }
    }
    out.total_regret = cumulative;
    out.max_probe_age = ages.max_age_at(env.slot());
    Ok(out)
}
