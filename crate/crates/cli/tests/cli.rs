//! End-to-end checks of the `shuntlab` binary: exit codes, strict config
//! parsing, output determinism and the headline tuning numbers.

use std::path::Path;
use std::process::{Command, Output};

fn shuntlab(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_shuntlab"));
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

const BEAM: &str = r#"{
  "schema_version": 1,
  "model": {"hertz": {"f_sc": 31.08, "f_oc": 31.29, "cp": 245e-9}},
  "tuning": "optimal"
}"#;

#[test]
fn tune_reproduces_beam_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("beam.json");
    write(&cfg, BEAM);
    let out = shuntlab(
        &["tune", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()],
        &[],
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    let l = summary["shunt"]["inductance_h"].as_f64().unwrap();
    let r = summary["shunt"]["resistance_ohm"].as_f64().unwrap();
    let kc = summary["model"]["kc"].as_f64().unwrap();
    assert!((l - 105.7).abs() / 105.7 < 5e-3, "L = {l}");
    assert!((r - 2961.0).abs() / 2961.0 < 1e-2, "R = {r}");
    assert!((kc - 0.116).abs() <= 1e-3, "Kc = {kc}");
}

#[test]
fn reproduce_figure_7_emits_expected_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("min.json");
    write(&cfg, r#"{"schema_version": 1}"#);
    let out = shuntlab(
        &[
            "reproduce",
            "--config",
            cfg.to_str().unwrap(),
            "--figure",
            "7",
            "--out",
            dir.path().to_str().unwrap(),
        ],
        &[],
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let csv = std::fs::read_to_string(dir.path().join("fig07.csv")).unwrap();
    let header = csv.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "Kc,tau_c_zoh,tau_c_pure,tau_c_series");
    assert!(csv.ends_with('\n'));
    assert!(!csv.contains('\r'));
    // Log grid over [1e-3, 0.3] with agreeing methods at the low end.
    let first: Vec<f64> = csv
        .lines()
        .nth(2)
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert!((first[0] - 1e-3).abs() < 1e-12);
    assert!((first[1] - first[3]).abs() / first[3] < 1e-3);
}

#[test]
fn fast_reproduce_targets_emit_their_files() {
    // Figures 11 and 14 run long time simulations and are exercised
    // manually; the analytical targets must all succeed here.
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("min.json");
    write(&cfg, r#"{"schema_version": 1}"#);
    for (figure, expected) in [
        ("3", vec!["fig03.csv"]),
        ("4", vec!["fig04.csv"]),
        ("5", vec!["fig05a.csv", "fig05b.csv"]),
        ("8", vec!["fig08_kc1em2.csv", "fig08_kc1em1.csv"]),
        ("9", vec!["fig09_kc1em2.csv", "fig09_kc1em1.csv"]),
        ("13", vec!["fig13_kc1em2.csv", "fig13_kc1em1.csv"]),
    ] {
        let out_dir = dir.path().join(format!("fig{figure}"));
        let out = shuntlab(
            &[
                "reproduce",
                "--config",
                cfg.to_str().unwrap(),
                "--figure",
                figure,
                "--out",
                out_dir.to_str().unwrap(),
            ],
            &[],
        );
        assert!(
            out.status.success(),
            "figure {figure}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        for name in expected {
            let f = out_dir.join(name);
            assert!(f.exists(), "missing {}", f.display());
            let text = std::fs::read_to_string(f).unwrap();
            assert!(text.lines().count() > 10, "figure {figure}: {name} nearly empty");
        }
    }
    // Unknown figure number is a config error.
    let out = shuntlab(
        &["reproduce", "--config", cfg.to_str().unwrap(), "--figure", "6"],
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn critical_with_zero_coupling_reports_zero_delay() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("zero.json");
    write(&cfg, r#"{"schema_version": 1, "model": {"normalized": {"kc": 0.0}}}"#);
    let out = shuntlab(
        &["critical", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()],
        &[],
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["tau_c_series_s"].as_f64().unwrap(), 0.0);
    assert_eq!(summary["tau_c_zoh_s"].as_f64().unwrap(), 0.0);
    assert_eq!(summary["tau_c_pure_delay_s"].as_f64().unwrap(), 0.0);
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("typo.json");
    write(&cfg, r#"{"schema_version": 1, "modell": {"normalized": {"kc": 0.1}}}"#);
    let out = shuntlab(&["tune", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown field"));
}

#[test]
fn missing_model_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("empty.json");
    write(&cfg, r#"{"schema_version": 1}"#);
    let out = shuntlab(&["tune", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn untunable_coupling_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("big.json");
    write(&cfg, r#"{"schema_version": 1, "model": {"normalized": {"kc": 1.3}}}"#);
    let out = shuntlab(&["tune", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn frf_outputs_are_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("frf.json");
    write(
        &cfg,
        r#"{
  "schema_version": 1,
  "model": {"normalized": {"kc": 0.1}},
  "delay": {"variant": "zoh", "taus": [0.02, 0.11, 0.18]},
  "grid": {"start": 0.9, "stop": 1.15, "points": 500}
}"#,
    );
    let mut blobs = Vec::new();
    for threads in ["1", "3"] {
        for run in 0..2 {
            let out_dir = dir.path().join(format!("out_{threads}_{run}"));
            let out = shuntlab(
                &[
                    "frf",
                    "--config",
                    cfg.to_str().unwrap(),
                    "--out",
                    out_dir.to_str().unwrap(),
                ],
                &[("SHUNTLAB_THREADS", threads)],
            );
            assert!(out.status.success());
            let csv = std::fs::read(out_dir.join("frf.csv")).unwrap();
            let json = std::fs::read(out_dir.join("summary.json")).unwrap();
            blobs.push((csv, json));
        }
    }
    for (csv, json) in &blobs[1..] {
        assert_eq!(csv, &blobs[0].0, "frf.csv differs between runs");
        assert_eq!(json, &blobs[0].1, "summary.json differs between runs");
    }
}

#[test]
fn margins_reports_three_crossovers_and_infinite_gain_margin() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("m.json");
    write(&cfg, r#"{"schema_version": 1, "model": {"normalized": {"kc": 0.1}}}"#);
    let out = shuntlab(
        &["margins", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()],
        &[],
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["gain_crossovers_rad_s"].as_array().unwrap().len(), 3);
    assert!(summary["gain_margin_db"].is_null());
    assert!(summary["phase_margin_deg"].as_f64().unwrap() > 0.0);
    let csv = std::fs::read_to_string(dir.path().join("margins.csv")).unwrap();
    assert!(csv.starts_with("# "));
}

#[test]
fn simulate_emits_time_series_and_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.json");
    // Short sweep around the resonance of the normalized plant.
    write(
        &cfg,
        r#"{
  "schema_version": 1,
  "model": {"normalized": {"kc": 0.1}},
  "delay": {"variant": "zoh", "taus": [0.1, 0.2]},
  "sweep": {"f_start": 0.1432, "f_end": 0.183, "duration": 500.0, "amplitude": 1.0},
  "substeps": 16
}"#,
    );
    let out = shuntlab(
        &["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()],
        &[],
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    let verdicts = summary["verdicts"].as_array().unwrap();
    assert_eq!(verdicts.len(), 2);
    assert!(verdicts.iter().all(|v| v["stable"].as_bool().unwrap()));
    for i in 0..2 {
        let sim = std::fs::read_to_string(dir.path().join(format!("sim_{i}.csv"))).unwrap();
        assert!(sim.lines().count() > 100);
        let env = std::fs::read_to_string(dir.path().join(format!("envelope_{i}.csv"))).unwrap();
        assert!(env.lines().count() > 10);
    }
}

#[test]
fn stabilize_reports_stable_modified_loop() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("stab.json");
    write(
        &cfg,
        r#"{
  "schema_version": 1,
  "model": {"normalized": {"kc": 0.1}},
  "delay": {"variant": "zoh", "tau": 0.3},
  "emit_plots": true
}"#,
    );
    let out = shuntlab(
        &["stabilize", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()],
        &[],
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["stable"], serde_json::Value::Bool(true));
    assert!(summary["max_delayed_pole_real_part"].as_f64().unwrap() < 0.0);
    assert!(dir.path().join("stabilize_frf.gnuplot").exists());
    // The delay exceeds the unmodified critical delay, so the unmodified
    // column must show the runaway right peak while the modified one stays
    // near nominal.
    let csv = std::fs::read_to_string(dir.path().join("stabilize_frf.csv")).unwrap();
    let mut max_nom: f64 = 0.0;
    let mut max_unmod: f64 = 0.0;
    let mut max_mod: f64 = 0.0;
    for line in csv.lines().skip(2) {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        max_nom = max_nom.max(v[2]);
        max_unmod = max_unmod.max(v[3]);
        max_mod = max_mod.max(v[4]);
    }
    assert!(max_unmod > 3.0 * max_nom, "unmodified {max_unmod} vs nominal {max_nom}");
    assert!(max_mod < 1.5 * max_nom, "modified {max_mod} vs nominal {max_nom}");
}
