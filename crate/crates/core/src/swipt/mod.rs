//! SWIPT case study: a single access point serving IoT devices dropped
//! uniformly in a disk, with exponential LOS blockage, best-device unicast
//! and broadcast power transfer.

pub mod case_study;
pub mod geometry;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub use case_study::{run_case_study, CaseStudyConfig, CaseStudyReport, CaseStudyRow, NetworkBandit};
pub use geometry::{
    b_l, b_n, los_fraction_closed_form, los_fraction_within, nearest_los_ccdf, nearest_los_ccdf_displayed,
    nearest_nlos_ccdf, prob_best_is_los, DeviceRealization, GeometryMonteCarlo,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SwiptScenario {
    /// Disk radius in meters.
    pub radius: f64,
    /// Transmit power in watts.
    pub tx_power: f64,
    /// LOS probability decay `omega` in 1/m.
    pub blockage_rate: f64,
    /// Path-loss coefficient `kappa`.
    pub pathloss_coeff: f64,
    pub gamma_los: f64,
    pub gamma_nlos: f64,
    /// Bandwidth in hertz.
    pub bandwidth: f64,
    /// Noise power in watts.
    pub noise: f64,
    pub harvest_efficiency: f64,
    pub num_devices: usize,
    pub slot_seconds: f64,
}

impl Default for SwiptScenario {
    fn default() -> Self {
        Self {
            radius: 50.0,
            tx_power: 1.0,
            blockage_rate: 0.02,
            pathloss_coeff: 1e-3,
            gamma_los: 2.1,
            gamma_nlos: 3.4,
            bandwidth: 10e6,
            noise: 1e-13,
            harvest_efficiency: 0.5,
            num_devices: 10,
            slot_seconds: 0.01,
        }
    }
}

impl SwiptScenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) {
            return invalid("radius must be positive");
        }
        if !(self.blockage_rate >= 0.0) {
            return invalid("blockage rate must be non-negative");
        }
        if !(self.gamma_los > 0.0 && self.gamma_nlos >= self.gamma_los) {
            return invalid("path-loss exponents need gamma_nlos >= gamma_los > 0");
        }
        if self.num_devices == 0 {
            return invalid("at least one device is required");
        }
        if !(0.0..=1.0).contains(&self.harvest_efficiency) {
            return invalid("harvest efficiency outside [0, 1]");
        }
        if !(self.noise > 0.0 && self.bandwidth > 0.0 && self.tx_power >= 0.0) {
            return invalid("noise and bandwidth must be positive, power non-negative");
        }
        Ok(())
    }

    /// Ratio by which an NLOS distance is raised to compare it on the LOS
    /// path-loss scale.
    pub fn nlos_exponent_ratio(&self) -> f64 {
        self.gamma_nlos / self.gamma_los
    }

    /// Fading-averaged path gain, capped at 1 in the near field.
    pub fn path_gain(&self, r: f64, los: bool) -> f64 {
        let g = if los { self.gamma_los } else { self.gamma_nlos };
        r.powf(-g).min(1.0)
    }

    /// Received power `kappa P_t h min(1, r^-gamma)`.
    pub fn received_power(&self, r: f64, los: bool, fading: f64) -> f64 {
        self.pathloss_coeff * self.tx_power * fading * self.path_gain(r, los)
    }

    /// Shannon rate in bit/s at received power `p`.
    pub fn rate(&self, p: f64) -> f64 {
        self.bandwidth * (1.0 + p / self.noise).log2()
    }

    /// LOS-equivalent distance: NLOS links of length `r` are as strong as LOS
    /// links of length `r^(gamma_N / gamma_L)`.
    pub fn effective_distance(&self, r: f64, los: bool) -> f64 {
        if los {
            r
        } else {
            r.powf(self.nlos_exponent_ratio())
        }
    }
}

/// Time-share of the unicast phase over the probing overheads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseLengths {
    pub episodes: f64,
    pub ts_len: f64,
    pub bp_len: f64,
    pub etc_len: f64,
    pub num_changes: f64,
    pub ge_len: f64,
}

impl PhaseLengths {
    pub fn prefactor(&self) -> Result<f64> {
        let den = self.episodes * self.bp_len + self.etc_len + self.num_changes * self.ge_len;
        if !(den > 0.0) {
            return invalid("probing overhead is zero, the time-share prefactor is unbounded");
        }
        Ok(self.episodes * self.ts_len / den)
    }
}

/// Time-share prefactor times the expected best-device Shannon rate.
pub fn network_throughput(s: &SwiptScenario, phases: &PhaseLengths) -> Result<f64> {
    Ok(phases.prefactor()? * geometry::expected_best_rate(s)?)
}

/// Per-device harvested power for the scheduled set and its sum.
///
/// A LOS device gets `theta (N_J/K) kappa P min(1, r^-gamma_L)`, an NLOS
/// device `theta (N_J/K) B N_0 / N_J`.
pub fn harvested_energy(
    s: &SwiptScenario,
    devices: &DeviceRealization,
    subset: &[usize],
) -> Result<(Vec<f64>, f64)> {
    if subset.is_empty() {
        return invalid("the scheduled set is empty");
    }
    if let Some(&j) = subset.iter().find(|&&j| j >= devices.len()) {
        return invalid(format!("device {j} out of range"));
    }
    let n_j = subset.len() as f64;
    let k = devices.len() as f64;
    let per: Vec<f64> = subset
        .iter()
        .map(|&j| harvested_power(s, devices.distances[j], devices.los[j], n_j, k))
        .collect();
    let sum = per.iter().sum();
    Ok((per, sum))
}

pub(crate) fn harvested_power(s: &SwiptScenario, r: f64, los: bool, n_j: f64, k: f64) -> f64 {
    let share = s.harvest_efficiency * n_j / k;
    if los {
        share * s.pathloss_coeff * s.tx_power * s.path_gain(r, true)
    } else {
        share * s.bandwidth * s.noise / n_j
    }
}
