use std::fs;
use std::path::Path;
use std::process::Command;

use nfbeam::scenario::ScenarioConfig;
use nfbeam_harness::output::MANIFEST_NAME;
use nfbeam_harness::{run_experiment, ExperimentConfig, RunManifest};

const TINY: &str = r#"{
    "frequency_hz": 100e9, "num_elements": 16, "spacing_over_lambda": 0.5, "power": 5.0,
    "obstacles": [[0.1, 0.12, -0.01, 0.01]],
    "grid": {"y_halfspan": 0.05, "x_max": 0.3}
}"#;

const REGION: &str = r#"{"x_min": 0.13, "x_max": 0.3, "y_min": -0.04, "y_max": 0.04}"#;

fn config(kind: &str, sweep: &str) -> ExperimentConfig {
    let text = format!(
        r#"{{"scenario": {TINY}, "kind": "{kind}", "rng_seed": 11, "num_users": 6,
            "user_region": {REGION}, "sweep": {sweep}}}"#
    );
    let mut c = ExperimentConfig::from_json_str(&text, Path::new(".")).unwrap();
    c.make_quick();
    c
}

fn all_kinds() -> Vec<(&'static str, &'static str)> {
    vec![
        ("beam-pattern", r#"{"user": [0.2, 0.015], "plane_stride": 2, "y_stride": 2}"#),
        ("power-map", r#"{"nx": 5, "ny": 4}"#),
        ("se-vs-power", r#"{"powers": [1, 10]}"#),
        ("blockage-sweep", r#"{"bin_edges": [0, 0.5, 1]}"#),
        ("frequency-sweep", r#"{"frequencies_hz": [60e9, 100e9]}"#),
        ("codebook-size-sweep", r#"{"angle_counts": [8, 16], "distance_counts": [4]}"#),
        ("obstacle-size-sweep", r#"{"lengths": [0.01, 0.03], "x_left": 0.1, "x_right": 0.12}"#),
        ("hybrid-gap", r#"{"user": [0.2, 0.015], "n_rf": [2, 4, 8], "bits": [2, 3], "response_n_rf": 4}"#),
        ("correlation-curves", r#"{"r": 0.2, "count": 5}"#),
    ]
}

#[test]
fn every_kind_writes_headed_csvs_and_a_valid_manifest() {
    let root = tempfile::tempdir().unwrap();
    for (kind, sweep) in all_kinds() {
        let dir = root.path().join(kind);
        let m = run_experiment(&config(kind, sweep), &dir).unwrap_or_else(|e| panic!("{kind}: {e}"));
        assert_eq!(m.kind, kind);
        assert!(!m.files.is_empty());
        m.verify(&dir).unwrap();
        assert_eq!(m, RunManifest::load(&dir).unwrap());
        for f in m.files.iter().filter(|f| f.path.ends_with(".csv")) {
            let text = fs::read_to_string(dir.join(&f.path)).unwrap();
            let mut lines = text.lines();
            let header = lines.next().unwrap();
            assert!(header.chars().all(|c| c.is_ascii_alphanumeric() || "_,-".contains(c)), "{kind}/{}", f.path);
            let width = header.split(',').count();
            assert!(lines.clone().count() > 0, "{kind}/{} has no rows", f.path);
            assert!(lines.all(|l| l.split(',').count() == width), "{kind}/{} is ragged", f.path);
        }
    }
}

#[test]
fn reruns_are_byte_identical() {
    let root = tempfile::tempdir().unwrap();
    for (kind, sweep) in [all_kinds()[3], all_kinds()[1]] {
        let cfg = config(kind, sweep);
        let a = run_experiment(&cfg, &root.path().join(format!("{kind}-a"))).unwrap();
        let b = run_experiment(&cfg, &root.path().join(format!("{kind}-b"))).unwrap();
        assert_eq!(a, b);
        for f in &a.files {
            let x = fs::read(root.path().join(format!("{kind}-a")).join(&f.path)).unwrap();
            let y = fs::read(root.path().join(format!("{kind}-b")).join(&f.path)).unwrap();
            assert_eq!(x, y, "{}", f.path);
        }
    }
    let mut other = config("blockage-sweep", all_kinds()[3].1);
    other.rng_seed = 12;
    let c = run_experiment(&other, &root.path().join("seed12")).unwrap();
    let users = |d: &str| fs::read(root.path().join(d).join("users.csv")).unwrap();
    assert_ne!(users("blockage-sweep-a"), users("seed12"));
    assert_ne!(c.config_hash, RunManifest::load(&root.path().join("blockage-sweep-a")).unwrap().config_hash);
}

#[test]
fn beam_pattern_field_vanishes_inside_the_obstacle() {
    let root = tempfile::tempdir().unwrap();
    let cfg = config("beam-pattern", r#"{"user": [0.2, 0.015], "plane_stride": 1, "y_stride": 1}"#);
    let m = run_experiment(&cfg, root.path()).unwrap();
    let scenario = ScenarioConfig::from_json_str(TINY).unwrap().validate().unwrap();
    for beam in ["focused", "curved", "nf-airy", "mrt"] {
        assert!(m.files.iter().any(|f| f.path == format!("beam_{beam}.png")));
        let text = fs::read_to_string(root.path().join(format!("beam_{beam}.csv"))).unwrap();
        let mut inside = 0;
        let mut outside_max: f64 = 0.0;
        for l in text.lines().skip(1) {
            let v: Vec<f64> = l.split(',').map(|s| s.parse().unwrap()).collect();
            if scenario.is_blocked(v[3], v[2]) {
                inside += 1;
                assert_eq!(v[4], 0.0, "{beam} at ({}, {})", v[3], v[2]);
            } else {
                outside_max = outside_max.max(v[4]);
            }
        }
        assert!(inside > 0);
        assert!(outside_max > 0.0);
    }
    let summary = fs::read_to_string(root.path().join("beam_pattern.csv")).unwrap();
    let mrt_gap: f64 = summary.lines().last().unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert!(mrt_gap.abs() < 1e-9);
}

#[test]
fn failed_run_removes_partial_outputs() {
    let root = tempfile::tempdir().unwrap();
    let dir = root.path().join("run");
    // The sweep table is written before the oversized response configuration fails.
    let cfg = config("hybrid-gap", r#"{"user": [0.2, 0.015], "n_rf": [2], "bits": [2], "response_n_rf": 1000}"#);
    let err = run_experiment(&cfg, &dir).unwrap_err();
    assert_eq!(err.kind(), "library");
    assert!(!dir.exists());

    let keep = root.path().join("existing");
    fs::create_dir(&keep).unwrap();
    fs::write(keep.join("notes.txt"), "mine").unwrap();
    assert!(run_experiment(&cfg, &keep).is_err());
    let left: Vec<_> = fs::read_dir(&keep).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(left, vec!["notes.txt"]);
}

fn simulate(args: &[&str], env_out: Option<&Path>) -> std::process::Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_simulate"));
    cmd.args(args).env_remove("NFBEAM_OUT_DIR");
    if let Some(d) = env_out {
        cmd.env("NFBEAM_OUT_DIR", d);
    }
    cmd.output().unwrap()
}

#[test]
fn cli_reports_errors_as_json() {
    let root = tempfile::tempdir().unwrap();
    let bad = root.path().join("bad.json");
    fs::write(&bad, r#"{"kind": "power-map"}"#).unwrap();
    let out = simulate(&[bad.to_str().unwrap()], None);
    assert!(!out.status.success());
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "config");

    let out = simulate(&["--bogus"], None);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "usage");

    let missing = simulate(&[root.path().join("none.json").to_str().unwrap()], None);
    let err: serde_json::Value = serde_json::from_slice(&missing.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "io");
}

#[test]
fn cli_runs_with_overrides_and_env_default() {
    let root = tempfile::tempdir().unwrap();
    fs::write(root.path().join("tiny.json"), TINY).unwrap();
    let cfg = root.path().join("exp.json");
    fs::write(
        &cfg,
        format!(r#"{{"scenario": "tiny.json", "kind": "se-vs-power", "rng_seed": 1, "num_users": 3, "user_region": {REGION}}}"#),
    )
    .unwrap();
    let out_dir = root.path().join("out");
    let cfg_s = cfg.to_str().unwrap();
    let out = simulate(&[cfg_s, "--out", out_dir.to_str().unwrap(), "--seed", "5", "--threads", "2", "--quick"], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = RunManifest::load(&out_dir).unwrap();
    assert_eq!((m.rng_seed, m.quick), (5, true));

    let env_root = root.path().join("env");
    let out = simulate(&[cfg_s, "--quick"], Some(&env_root));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let runs: Vec<_> = fs::read_dir(&env_root).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(runs.len(), 1);
    assert!(runs[0].file_name().unwrap().to_str().unwrap().starts_with("se-vs-power-"));
    assert!(runs[0].join(MANIFEST_NAME).exists());
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut kinds = Vec::new();
    for e in fs::read_dir(&dir).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "json") {
            let c = ExperimentConfig::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            c.scenario.validate().unwrap();
            kinds.push(c.kind().as_str());
        }
    }
    kinds.sort_unstable();
    assert_eq!(kinds.len(), 9);
    kinds.dedup();
    assert_eq!(kinds.len(), 9);
}
