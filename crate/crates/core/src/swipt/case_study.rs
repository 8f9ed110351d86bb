//! Time-slotted IIoT simulation: unicast to the chosen device, broadcast or
//! grouped power transfer, and slow LOS/NLOS flips of single devices.

use rand::Rng as _;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use super::geometry::DeviceRealization;
use super::{harvested_power, SwiptScenario};
use crate::agent::{TsgeAgent, TsgeConfig};
use crate::baselines::{Mucb, MucbConfig};
use crate::env::{Action, Bandit, PullOutcome, DUMMY_ARM_MEAN};
use crate::error::{invalid, Result};
use crate::sim::{Phase, Policy, ProbeAgeTracker};
use crate::{seeded_rng, streams, Rng};

/// Devices as bandit arms. A device's mean reward is its fading-averaged
/// received power normalized by that of a LOS link at the nearest drop
/// distance; each play multiplies it by an `Exp(1)` fading power.
#[derive(Debug, Clone)]
pub struct NetworkBandit {
    scenario: SwiptScenario,
    devices: DeviceRealization,
    num_arms: usize,
    means: Vec<f64>,
    norm: f64,
    slot: u64,
    flip_every: u64,
    flips: Vec<(u64, usize)>,
    last_fading: Vec<(usize, f64)>,
    rng: Rng,
}

impl NetworkBandit {
    /// Drops the devices and pads the arm count to a power of two.
    pub fn new(scenario: SwiptScenario, flip_every: u64, seed: u64) -> Result<Self> {
        scenario.validate()?;
        let devices = DeviceRealization::sample(&scenario, &mut seeded_rng(seed, streams::GEOMETRY));
        Self::with_devices(scenario, devices, flip_every, seed)
    }

    pub fn with_devices(
        scenario: SwiptScenario,
        devices: DeviceRealization,
        flip_every: u64,
        seed: u64,
    ) -> Result<Self> {
        if devices.is_empty() {
            return invalid("at least one device is required");
        }
        let r_min = devices.distances.iter().copied().fold(f64::INFINITY, f64::min);
        let norm = scenario.received_power(r_min, true, 1.0);
        if !(norm > 0.0) {
            return invalid("transmit power must be positive");
        }
        let num_arms = devices.len().next_power_of_two();
        let mut bandit = Self {
            scenario,
            num_arms,
            means: vec![DUMMY_ARM_MEAN; num_arms],
            norm,
            slot: 0,
            flip_every,
            flips: Vec::new(),
            last_fading: Vec::new(),
            rng: seeded_rng(seed, streams::ENV),
            devices,
        };
        for i in 0..bandit.devices.len() {
            bandit.refresh_mean(i);
        }
        Ok(bandit)
    }

    fn refresh_mean(&mut self, i: usize) {
        let p = self.scenario.received_power(self.devices.distances[i], self.devices.los[i], 1.0);
        self.means[i] = p / self.norm;
    }

    pub fn devices(&self) -> &DeviceRealization {
        &self.devices
    }

    /// `(slot, device)` of every visibility flip so far.
    pub fn flips(&self) -> &[(u64, usize)] {
        &self.flips
    }

    /// Shannon rate of the last single-device play.
    pub fn last_rate(&self) -> Option<f64> {
        match self.last_fading.as_slice() {
            [(i, h)] => {
                let p = self.scenario.received_power(self.devices.distances[*i], self.devices.los[*i], *h);
                Some(self.scenario.rate(p))
            }
            _ => None,
        }
    }

    /// Harvested power per scheduled real device in the current slot.
    pub fn harvest(&self, members: &[usize]) -> Vec<f64> {
        let n_j = members.len() as f64;
        let k = self.devices.len() as f64;
        members
            .iter()
            .map(|&j| harvested_power(&self.scenario, self.devices.distances[j], self.devices.los[j], n_j, k))
            .collect()
    }
}

impl Bandit for NetworkBandit {
    fn num_arms(&self) -> usize {
        self.num_arms
    }

    fn num_real_arms(&self) -> usize {
        self.devices.len()
    }

    fn reward_cap(&self) -> f64 {
        1.0
    }

    fn slot(&self) -> u64 {
        self.slot
    }

    fn advance(&mut self) {
        self.slot += 1;
        if self.flip_every > 0 && self.slot.is_multiple_of(self.flip_every) {
            let i = self.rng.random_range(0..self.devices.len());
            self.devices.los[i] = !self.devices.los[i];
            self.refresh_mean(i);
            self.flips.push((self.slot, i));
        }
    }

    fn play(&mut self, action: Action) -> Result<PullOutcome> {
        if let Action::Arm(i) = action {
            if i >= self.num_arms {
                return invalid(format!("arm {i} out of range for {} arms", self.num_arms));
            }
        }
        if let Action::SuperArm(b) = action {
            if (1usize << b) >= self.num_arms {
                return invalid(format!("super-arm bit {b} out of range for {} arms", self.num_arms));
            }
        }
        let real = self.devices.len();
        self.last_fading.clear();
        let mut sum = 0.0;
        let mut n = 0usize;
        for i in action.members(self.num_arms) {
            n += 1;
            if i < real {
                let h: f64 = self.rng.sample(Exp1);
                self.last_fading.push((i, h));
                sum += self.means[i] * h;
            } else {
                sum += DUMMY_ARM_MEAN;
            }
        }
        Ok(PullOutcome::new(sum / n as f64, 1.0, self.slot))
    }

    fn true_means(&self) -> &[f64] {
        &self.means
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CaseStudyConfig {
    pub scenario: SwiptScenario,
    pub device_counts: Vec<usize>,
    pub horizon: u64,
    /// One device toggles LOS/NLOS every this many slots.
    pub flip_every: u64,
    pub tsge: TsgeConfig,
    pub mucb: MucbConfig,
}

impl Default for CaseStudyConfig {
    fn default() -> Self {
        Self {
            scenario: SwiptScenario::default(),
            device_counts: vec![4, 8, 16, 32, 64, 128, 256, 512],
            horizon: 100_000,
            flip_every: 3_000,
            tsge: TsgeConfig {
                delta: 0.25,
                loc_fail_prob: 0.05,
                horizon: 100_000,
                ..TsgeConfig::default()
            },
            mucb: MucbConfig::default(),
        }
    }
}

impl CaseStudyConfig {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.device_counts.is_empty() || self.device_counts.contains(&0) {
            return invalid("device counts must be non-empty and positive");
        }
        if self.horizon == 0 {
            return invalid("horizon must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseStudyRow {
    pub num_devices: usize,
    pub algorithm: String,
    pub seed: u64,
    /// Unicast rate averaged over every slot of the horizon.
    pub mean_throughput_bps: f64,
    /// Unicast rate averaged over the information-transfer slots only.
    pub info_phase_throughput_bps: f64,
    /// Smallest average harvested power of any device over any measurement
    /// window.
    pub min_harvested_watts: f64,
    /// Largest gap between power deliveries to one device after warm-up.
    pub max_energy_age: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseStudyReport {
    pub window: u64,
    pub rows: Vec<CaseStudyRow>,
}

struct Metrics {
    throughput: f64,
    info_throughput: f64,
    min_harvest: f64,
    max_age: u64,
}

/// Plays `policy` for the horizon. Unicast counts only in slots where
/// `delivers_info(phase)`; windows of `window` slots start after
/// `measure_from`.
fn simulate<P: Policy>(
    policy: &mut P,
    env: &mut NetworkBandit,
    horizon: u64,
    measure_from: u64,
    window: u64,
    delivers_info: fn(Phase) -> bool,
) -> Result<Metrics> {
    let real = env.num_real_arms();
    let mut ages = ProbeAgeTracker::new(real, measure_from);
    let mut rate_sum = 0.0;
    let mut info_slots = 0u64;
    let mut energy = vec![0.0; real];
    let mut min_harvest = f64::INFINITY;
    let mut members = Vec::with_capacity(env.num_arms());
    for _ in 0..horizon {
        let rec = policy.play_slot(env)?;
        if delivers_info(rec.phase) {
            rate_sum += env.last_rate().unwrap_or(0.0);
            info_slots += 1;
        }
        members.clear();
        members.extend(rec.action.members(env.num_arms()).filter(|&i| i < real));
        if rec.slot > measure_from {
            for (&j, p) in members.iter().zip(env.harvest(&members)) {
                energy[j] += p;
            }
            if (rec.slot - measure_from).is_multiple_of(window) {
                let worst = energy.iter().copied().fold(f64::INFINITY, f64::min);
                min_harvest = min_harvest.min(worst / window as f64);
                energy.iter_mut().for_each(|e| *e = 0.0);
            }
        }
        for &j in &members {
            ages.observe(rec.slot, Action::Arm(j));
        }
    }
    if !min_harvest.is_finite() {
        min_harvest = 0.0;
    }
    Ok(Metrics {
        throughput: rate_sum / horizon as f64,
        info_throughput: if info_slots > 0 { rate_sum / info_slots as f64 } else { 0.0 },
        min_harvest,
        max_age: ages.max_age_at(env.slot()),
    })
}

/// Runs TS-GE and M-UCB on the same drop and flip sequence for every device
/// count.
pub fn run_case_study(cfg: &CaseStudyConfig, seed: u64) -> Result<CaseStudyReport> {
    cfg.validate()?;
    let episode_len = (cfg.horizon as f64).sqrt().floor() as u64;
    let mut rows = Vec::new();
    for &k in &cfg.device_counts {
        let scenario = SwiptScenario { num_devices: k, ..cfg.scenario.clone() };
        let drop_seed = seed.wrapping_add((k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let template = NetworkBandit::new(scenario, cfg.flip_every, drop_seed)?;

        let tsge_cfg = TsgeConfig { horizon: cfg.horizon, seed: drop_seed, ..cfg.tsge.clone() };
        let mut tsge = TsgeAgent::for_bandit(tsge_cfg, &template)?;
        let measure_from = tsge.schedule().etc_slots(k);
        if measure_from >= cfg.horizon {
            return invalid(format!("TS-GE warm-up of {measure_from} slots fills the horizon for K = {k}"));
        }

        let mut env = template.clone();
        let m = simulate(&mut tsge, &mut env, cfg.horizon, measure_from, episode_len, |p| p == Phase::Ts)?;
        rows.push(CaseStudyRow {
            num_devices: k,
            algorithm: "TS-GE".to_owned(),
            seed: drop_seed,
            mean_throughput_bps: m.throughput,
            info_phase_throughput_bps: m.info_throughput,
            min_harvested_watts: m.min_harvest,
            max_energy_age: m.max_age,
        });

        let mucb_cfg = MucbConfig { horizon: cfg.horizon, ..cfg.mucb.clone() };
        let mut mucb = Mucb::new(&mucb_cfg, k)?;
        let mut env = template.clone();
        let m = simulate(&mut mucb, &mut env, cfg.horizon, measure_from, episode_len, |_| true)?;
        rows.push(CaseStudyRow {
            num_devices: k,
            algorithm: "M-UCB".to_owned(),
            seed: drop_seed,
            mean_throughput_bps: m.throughput,
            info_phase_throughput_bps: m.info_throughput,
            min_harvested_watts: m.min_harvest,
            max_energy_age: m.max_age,
        });
    }
    Ok(CaseStudyReport { window: episode_len, rows })
}
