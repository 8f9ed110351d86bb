use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{par_map, write_csv, write_json, ExperimentConfig};
use crate::error::Result;
use crate::swipt::{run_case_study, CaseStudyConfig, CaseStudyRow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseStudySummaryRow {
    pub num_devices: usize,
    pub algorithm: String,
    pub mean_throughput_bps: f64,
    pub mean_info_phase_throughput_bps: f64,
    pub mean_min_harvested_watts: f64,
    /// Smallest per-seed minimum harvested power.
    pub worst_min_harvested_watts: f64,
    /// Seeds in which some device went a whole window without power.
    pub seeds_with_zero_energy: u64,
    pub max_energy_age: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseStudySummary {
    pub replications: u64,
    pub window_slots: u64,
    pub rows: Vec<CaseStudySummaryRow>,
    /// Device counts where M-UCB has the higher information-phase throughput.
    pub mucb_ahead: Vec<usize>,
    /// Device counts where TS-GE has the higher information-phase throughput.
    pub tsge_ahead: Vec<usize>,
}

impl CaseStudySummary {
    /// M-UCB leads at the smallest device count and TS-GE at the largest.
    pub fn has_crossover(&self) -> bool {
        let ks: Vec<usize> = self.rows.iter().map(|r| r.num_devices).collect();
        let (Some(&lo), Some(&hi)) = (ks.iter().min(), ks.iter().max()) else {
            return false;
        };
        self.mucb_ahead.contains(&lo) && self.tsge_ahead.contains(&hi)
    }

    pub fn tsge_energy_always_positive(&self) -> bool {
        self.rows
            .iter()
            .filter(|r| r.algorithm == "TS-GE")
            .all(|r| r.worst_min_harvested_watts > 0.0)
    }

    /// Device counts where M-UCB starved some device in at least one seed.
    pub fn mucb_starved(&self) -> Vec<usize> {
        self.rows
            .iter()
            .filter(|r| r.algorithm == "M-UCB" && r.seeds_with_zero_energy > 0)
            .map(|r| r.num_devices)
            .collect()
    }
}

pub fn summarize(rows: &[CaseStudyRow], replications: u64, window: u64, counts: &[usize]) -> CaseStudySummary {
    let mut out = Vec::new();
    let (mut mucb_ahead, mut tsge_ahead) = (Vec::new(), Vec::new());
    for &k in counts {
        let mut means = [0.0; 2];
        for (a, alg) in ["TS-GE", "M-UCB"].iter().enumerate() {
            let sel: Vec<&CaseStudyRow> = rows.iter().filter(|r| r.num_devices == k && r.algorithm == *alg).collect();
            let n = sel.len() as f64;
            let tp = sel.iter().map(|r| r.mean_throughput_bps).sum::<f64>() / n;
            let info = sel.iter().map(|r| r.info_phase_throughput_bps).sum::<f64>() / n;
            means[a] = info;
            out.push(CaseStudySummaryRow {
                num_devices: k,
                algorithm: alg.to_string(),
                mean_throughput_bps: tp,
                mean_info_phase_throughput_bps: info,
                mean_min_harvested_watts: sel.iter().map(|r| r.min_harvested_watts).sum::<f64>() / n,
                worst_min_harvested_watts: sel.iter().map(|r| r.min_harvested_watts).fold(f64::INFINITY, f64::min),
                seeds_with_zero_energy: sel.iter().filter(|r| r.min_harvested_watts == 0.0).count() as u64,
                max_energy_age: sel.iter().map(|r| r.max_energy_age).max().unwrap_or(0),
            });
        }
        if means[1] > means[0] {
            mucb_ahead.push(k);
        } else {
            tsge_ahead.push(k);
        }
    }
    CaseStudySummary {
        replications,
        window_slots: window,
        rows: out,
        mucb_ahead,
        tsge_ahead,
    }
}

pub fn run_case_study_experiment(
    cfg: &CaseStudyConfig,
    exp: &ExperimentConfig,
    out: &Path,
) -> Result<(Vec<PathBuf>, CaseStudySummary)> {
    let reports = par_map(exp.replications, |i| run_case_study(cfg, exp.seed(i)))?;
    let window = reports[0].window;
    let rows: Vec<CaseStudyRow> = reports.into_iter().flat_map(|r| r.rows).collect();
    let summary = summarize(&rows, exp.replications, window, &cfg.device_counts);
    let csv = out.join("case_study.csv");
    write_csv(&csv, "case_study", &rows)?;
    let json = out.join("case_study_summary.json");
    write_json(&json, &summary)?;
    Ok((vec![csv, json], summary))
}
