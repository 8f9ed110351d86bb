use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use tsge::harness::{run_experiment, ExperimentConfig, RunSettings};

const CONFIGS: [&str; 4] = [
    r#"{"experiment": {"kind": "bound_comparison", "grid_points": 50}}"#,
    r#"{"experiment": {"kind": "regret_race",
        "env": {"initial_means": [0.4, 0.9], "horizon": 20000},
        "changes": [{"episode": 10, "arm": 1, "new_mean": 0.1}, {"episode": 40, "arm": 0, "new_mean": 0.2}],
        "export_trace": true},
        "replications": 4, "base_seed": 11}"#,
    r#"{"experiment": {"kind": "case_study", "device_counts": [4, 16], "horizon": 20000,
        "tsge": {"delta": 0.25, "loc_fail_prob": 0.05}},
        "replications": 3, "base_seed": 5}"#,
    r#"{"experiment": {"kind": "validation_suite", "localization_trials": 200, "false_alarm_episodes": 200,
        "ts_plants": 20, "bp_plants_per_case": 10, "probing_runs": 4},
        "base_seed": 9}"#,
];

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

fn run(cfg: &ExperimentConfig, threads: Option<usize>) -> BTreeMap<String, Vec<u8>> {
    let dir = tempfile::tempdir().unwrap();
    run_experiment(cfg, dir.path(), &RunSettings { threads }).unwrap();
    snapshot(dir.path())
}

#[test]
fn reruns_are_byte_identical() {
    for text in CONFIGS {
        let cfg = ExperimentConfig::from_json(text).unwrap();
        let a = run(&cfg, Some(1));
        assert!(!a.is_empty());
        assert_eq!(a, run(&cfg, Some(1)), "{}", cfg.experiment.name());
        assert_eq!(a, run(&cfg, Some(3)), "{} differs across thread counts", cfg.experiment.name());
    }
}

#[test]
fn csv_files_carry_a_version_line() {
    for text in CONFIGS {
        let cfg = ExperimentConfig::from_json(text).unwrap();
        for (name, bytes) in run(&cfg, None) {
            if name.ends_with(".csv") {
                let text = String::from_utf8(bytes).unwrap();
                assert!(text.starts_with("# tsge-csv v1 "), "{name}");
            }
        }
    }
}

#[test]
fn seed_changes_results() {
    let a = ExperimentConfig::from_json(CONFIGS[1]).unwrap();
    let b = ExperimentConfig { base_seed: 12, ..a.clone() };
    assert_ne!(run(&a, None), run(&b, None));
}

#[test]
fn bad_configs_are_rejected() {
    for text in [
        r#"{"experiment": {"kind": "nope"}}"#,
        r#"{"experiment": {"kind": "bound_comparison", "arm_counts": []}}"#,
        r#"{"experiment": {"kind": "bound_comparison"}, "replications": 0}"#,
        r#"{"experiment": {"kind": "bound_comparison"}, "typo": 1}"#,
    ] {
        let err = ExperimentConfig::from_json(text).unwrap_err();
        assert_eq!(err.kind(), "config", "{text}");
    }
}
