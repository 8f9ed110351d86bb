use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ensure, write_csv, write_json};
use crate::analysis::{crossing_points, log_grid, regret_bound_competitor, regret_bound_tsge, BoundParams};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundComparisonConfig {
    pub arm_counts: Vec<usize>,
    pub num_changes: f64,
    pub horizon: f64,
    pub grid_points: usize,
    /// Crossings are searched on `[2, search_max]`; the horizon when absent.
    pub search_max: Option<f64>,
}

impl Default for BoundComparisonConfig {
    fn default() -> Self {
        Self {
            arm_counts: vec![100, 500, 1000],
            num_changes: 10.0,
            horizon: 1e5,
            grid_points: 200,
            search_max: None,
        }
    }
}

impl BoundComparisonConfig {
    pub fn validate(&self) -> Result<()> {
        ensure(!self.arm_counts.is_empty() && !self.arm_counts.contains(&0), "arm counts must be positive")?;
        ensure(self.horizon >= 2.0, "horizon must be at least 2")?;
        ensure(self.grid_points >= 2, "at least two grid points are needed")?;
        ensure(self.num_changes >= 0.0, "change count must be non-negative")
    }

    fn params(&self, k: usize) -> BoundParams {
        BoundParams {
            num_arms: k,
            num_changes: self.num_changes,
            horizon: self.horizon as u64,
            ..BoundParams::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelCrossings {
    pub num_arms: usize,
    pub t1: f64,
    pub t2: Option<f64>,
    pub t3: Option<f64>,
    /// Largest `|tsge - competitor| / tsge` at the reported crossings.
    pub max_relative_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundComparisonSummary {
    pub horizon: f64,
    pub search_max: f64,
    pub panels: Vec<PanelCrossings>,
}

#[derive(Serialize)]
struct CurveRow {
    num_arms: usize,
    t: f64,
    tsge_bound: f64,
    competitor_bound: f64,
}

/// `(K, [t, TS-GE bound, competitor bound] per grid point)`.
pub type PanelCurve = (usize, Vec<[f64; 3]>);

/// Evaluates both bound curves on a log grid for each arm count and locates
/// their crossings.
pub fn bound_comparison(cfg: &BoundComparisonConfig) -> Result<(Vec<PanelCrossings>, Vec<PanelCurve>)> {
    cfg.validate()?;
    let search_max = cfg.search_max.unwrap_or(cfg.horizon);
    let grid = log_grid(1.0, cfg.horizon, cfg.grid_points);
    let mut panels = Vec::new();
    let mut curves = Vec::new();
    for &k in &cfg.arm_counts {
        let p = cfg.params(k);
        let c = crossing_points(&p, search_max);
        let max_relative_gap = [c.t2, c.t3]
            .into_iter()
            .flatten()
            .map(|t| {
                let a = regret_bound_tsge(&p, t);
                ((a - regret_bound_competitor(&p, t)) / a).abs()
            })
            .fold(0.0, f64::max);
        panels.push(PanelCrossings {
            num_arms: k,
            t1: c.t1,
            t2: c.t2,
            t3: c.t3,
            max_relative_gap,
        });
        let pts = grid
            .iter()
            .map(|&t| [t, regret_bound_tsge(&p, t), regret_bound_competitor(&p, t)])
            .collect();
        curves.push((k, pts));
    }
    Ok((panels, curves))
}

pub fn run_bound_comparison(cfg: &BoundComparisonConfig, out: &Path) -> Result<(Vec<PathBuf>, BoundComparisonSummary)> {
    let (panels, curves) = bound_comparison(cfg)?;
    let rows: Vec<CurveRow> = curves
        .iter()
        .flat_map(|(k, pts)| {
            pts.iter().map(move |p| CurveRow {
                num_arms: *k,
                t: p[0],
                tsge_bound: p[1],
                competitor_bound: p[2],
            })
        })
        .collect();
    let csv = out.join("bound_curves.csv");
    write_csv(&csv, "bound_curves", &rows)?;
    let summary = BoundComparisonSummary {
        horizon: cfg.horizon,
        search_max: cfg.search_max.unwrap_or(cfg.horizon),
        panels,
    };
    let json = out.join("crossings.json");
    write_json(&json, &summary)?;
    Ok((vec![csv, json], summary))
}
