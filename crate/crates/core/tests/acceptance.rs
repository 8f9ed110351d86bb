//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{grid, Oracle};
use tsge::agent::grouping::{construct_super_arms, ge_identify};
use tsge::agent::thompson::ArmBelief;
use tsge::harness::{
    run_experiment, BoundComparisonSummary, CaseStudySummary, ExperimentConfig, RegretRaceSummary, RunSettings,
    ValidationReport,
};
use tsge::swipt::{b_l, nearest_los_ccdf, nearest_nlos_ccdf, prob_best_is_los, SwiptScenario};

struct Line {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn config(name: &str) -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn run(cfg: &ExperimentConfig, out: &Path) -> (serde_json::Value, Duration) {
    let start = Instant::now();
    let outcome = run_experiment(cfg, out, &RunSettings::default()).expect("experiment failed");
    (outcome.summary, start.elapsed())
}

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (PathBuf::from(p.file_name().unwrap()), fs::read(&p).unwrap())
        })
        .collect()
}

fn coding() -> Line {
    let start = Instant::now();
    let (mut cases, mut ok) = (0u64, 0u64);
    let mut structure = true;
    for d in 1..=10u32 {
        let k = 1usize << d;
        let arms = construct_super_arms(k).unwrap();
        for b in &arms {
            structure &= b.members.len() == k / 2;
        }
        let means: Vec<f64> = (0..k).map(|i| 0.2 + 0.5 * i as f64 / k as f64).collect();
        let beliefs: Vec<ArmBelief> = means.iter().map(|&m| ArmBelief { mu_hat: m, ..ArmBelief::default() }).collect();
        let delta = 0.01;
        for j in 0..k {
            let sig = arms.iter().filter(|b| b.members.contains(&j)).fold(0, |c, b| c | (1 << b.bit));
            structure &= sig == j;
            let shift = 1.01 * delta * k as f64;
            let obs: Vec<f64> = arms
                .iter()
                .map(|b| b.members.iter().map(|&i| means[i] + if i == j { shift } else { 0.0 }).sum::<f64>() / (k / 2) as f64)
                .collect();
            // One identification per (K, arm); every code bit is exercised.
            cases += d as u64;
            ok += if ge_identify(&arms, &obs, &beliefs, delta) == j { d as u64 } else { 0 };
        }
    }
    let t = start.elapsed();
    Line {
        name: "super-arm coding",
        pass: structure && ok == cases && t < Duration::from_secs(10),
        detail: format!("{ok}/{cases} recovered, structure {structure}, {:.2}s", t.as_secs_f64()),
    }
}

fn validation_lines(report: &ValidationReport) -> Vec<Line> {
    let check = |name: &str| report.checks.iter().find(|c| c.name == name).unwrap_or_else(|| panic!("missing {name}"));
    let show = |names: &[&str]| {
        names
            .iter()
            .map(|n| {
                let c = check(n);
                format!("{n} {} {} {}", c.observed, c.relation, c.bound)
            })
            .collect::<Vec<_>>()
            .join("; ")
    };
    let all = |names: &[&str]| names.iter().all(|n| check(n).pass);
    let probing = ["max_age_after_warm_up", "max_age_without_group_exploration"];
    let detection = [
        "ts_phase_detection_rate",
        "bp_case1_detection_rate",
        "bp_case2_detection_rate",
        "bp_case3_detection_rate",
        "bp_case4_detection_rate",
    ];
    vec![
        Line {
            name: "mandatory probing",
            pass: all(&probing) && report.probing.runs_without_ge > 0,
            detail: format!("{} ({} runs without group exploration)", show(&probing), report.probing.runs_without_ge),
        },
        Line {
            name: "localization (ETC sizing)",
            pass: all(&["localization_failure_rate"]),
            detail: show(&["localization_failure_rate"]),
        },
        Line {
            name: "false alarm",
            pass: all(&["stationary_false_alarm_rate"]),
            detail: show(&["stationary_false_alarm_rate"]),
        },
        Line {
            name: "planted-change detection",
            pass: all(&detection),
            detail: show(&detection),
        },
    ]
}

fn bound_line(s: &BoundComparisonSummary, t: Duration) -> Line {
    let panel = |k: usize| s.panels.iter().find(|p| p.num_arms == k).unwrap();
    let small = panel(100).t2.is_some_and(|t2| t2 <= 0.1 * s.horizon);
    let interior = panel(500).t2.is_some_and(|t2| t2 > 2.0 && t2 < s.horizon);
    let absent = panel(1000).t2.is_none();
    let gaps = s.panels.iter().all(|p| p.max_relative_gap <= 1e-6);
    let fmt = |k: usize| format!("K={k} T2={:?}", panel(k).t2.map(|t| t.round()));
    Line {
        name: "bound comparison",
        pass: small && interior && absent && gaps && t < Duration::from_secs(1),
        detail: format!(
            "{} (small {small}), {} (interior {interior}), {} (absent {absent}), gaps ok {gaps}, {:.3}s",
            fmt(100),
            fmt(500),
            fmt(1000),
            t.as_secs_f64()
        ),
    }
}

fn race_line(s: &RegretRaceSummary, t: Duration) -> Line {
    let show = s
        .algorithms
        .iter()
        .map(|a| format!("{} {:.1}±{:.1}", a.algorithm, a.final_mean_regret, a.ci_half_width))
        .collect::<Vec<_>>()
        .join(", ");
    Line {
        name: "regret race",
        pass: s.ordering_holds && s.replications == 100 && t < Duration::from_secs(300),
        detail: format!("{show} over {} replications, {:.1}s", s.replications, t.as_secs_f64()),
    }
}

fn geometry_line() -> Line {
    let start = Instant::now();
    let s = SwiptScenario::default();
    let mc = Oracle::run(&s, 100_000, 2024);
    let mut worst = 0.0f64;
    let mut z = |exact: f64, est: f64| {
        let se = mc.se(exact);
        worst = worst.max(if se > 0.0 { (exact - est).abs() / se } else if exact == est { 0.0 } else { f64::INFINITY });
    };
    z(b_l(&s), mc.all_los);
    z(prob_best_is_los(&s).unwrap(), mc.best_los);
    for x in grid(&s, 20) {
        z(nearest_los_ccdf(&s, x).unwrap(), Oracle::ccdf(&mc.nearest_los, x));
        z(nearest_nlos_ccdf(&s, x).unwrap(), Oracle::ccdf(&mc.nearest_nlos, x));
    }
    let t = start.elapsed();
    Line {
        name: "geometry oracle",
        pass: worst <= 3.0 && t < Duration::from_secs(120),
        detail: format!("worst deviation {worst:.2} s.e. over 42 quantities, {:.1}s", t.as_secs_f64()),
    }
}

fn case_line(s: &CaseStudySummary) -> Line {
    let hi = s.rows.iter().map(|r| r.num_devices).max().unwrap_or(0);
    let starved = s.mucb_starved();
    let large_starved = starved.iter().any(|&k| k * 2 > hi);
    Line {
        name: "case study",
        pass: s.has_crossover() && s.tsge_energy_always_positive() && large_starved,
        detail: format!(
            "M-UCB ahead at {:?}, TS-GE ahead at {:?}, TS-GE energy > 0 everywhere {}, M-UCB starved at {:?}",
            s.mucb_ahead,
            s.tsge_ahead,
            s.tsge_energy_always_positive(),
            starved
        ),
    }
}

fn main() -> ExitCode {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let names = ["bound_comparison", "regret_race", "case_study", "validation"];
    let mut lines = vec![coding()];
    let mut identical = true;
    for name in names {
        let cfg = config(&format!("{name}.json"));
        let (a, b) = (first.path().join(name), second.path().join(name));
        let (summary, took) = run(&cfg, &a);
        run(&cfg, &b);
        identical &= snapshot(&a) == snapshot(&b);
        match name {
            "bound_comparison" => lines.push(bound_line(&serde_json::from_value(summary).unwrap(), took)),
            "regret_race" => lines.push(race_line(&serde_json::from_value(summary).unwrap(), took)),
            "case_study" => lines.push(case_line(&serde_json::from_value(summary).unwrap())),
            _ => lines.extend(validation_lines(&serde_json::from_value(summary).unwrap())),
        }
    }
    lines.push(geometry_line());
    lines.push(Line {
        name: "determinism",
        pass: identical,
        detail: format!("shipped configs re-run byte-identical: {identical}"),
    });
    let failed = lines.iter().filter(|l| !l.pass).count();
    for l in &lines {
        println!("{} {}: {}", if l.pass { "PASS" } else { "FAIL" }, l.name, l.detail);
    }
    println!("acceptance: {} passed, {failed} failed", lines.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
