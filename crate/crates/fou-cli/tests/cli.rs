//! End-to-end tests of the `fou` binary: output schemas, exit codes,
//! manifests and the bit-exact reproduction contracts.

use std::path::Path;
use std::process::{Command, Output};

fn fou(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fou"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn fou_in(dir: &Path, envs: &[(&str, &str)], args: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fou"));
    cmd.current_dir(dir).args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn cov_emits_the_closed_form_table() {
    let out = fou(&["cov", "--process", "fbm", "--hurst", "0.5", "--theta", "1", "--lags", "0,1,2"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "lag,value");
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse::<f64>().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    let expect = [0.5, (-1.0f64).exp() / 2.0, (-2.0f64).exp() / 2.0];
    for (row, e) in rows.iter().zip(expect) {
        assert!((row[1] - e).abs() < 1e-12, "{} vs {e}", row[1]);
    }
}

#[test]
fn cov_json_rows_are_flat_objects_per_line() {
    let out = fou(&["cov", "--process", "fbm", "--hurst", "0.7", "--theta", "1", "--lags", "0,1", "--format", "json"]);
    assert!(out.status.success());
    for line in stdout(&out).lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["lag"].is_f64() && v["value"].is_f64());
    }
}

#[test]
fn regime_records_match_the_catalog() {
    let out = fou(&["regime", "--process", "fbm", "--hurst", "0.7", "--theta", "1"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(v["kind"], "power");
    assert!((v["exponent"].as_f64().unwrap() + 0.6).abs() < 1e-12);

    let out = fou(&["regime", "--process", "fbm", "--hurst", "0.8", "--kind", "second", "--theta", "3"]);
    let v: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(v["kind"], "exp");
    assert!((v["rate"].as_f64().unwrap() - 0.25).abs() < 1e-12);

    // Boundary θ = 1/H - 1 carries the polynomial factor.
    let out = fou(&["regime", "--process", "fbm", "--hurst", "0.8", "--kind", "second", "--theta", "0.25"]);
    let v: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(v["poly_degree"], 1);
    assert_eq!(v["boundary"], true);
}

#[test]
fn invalid_parameters_exit_2() {
    let out = fou(&["cov", "--process", "fbm", "--hurst", "1.2", "--theta", "1", "--lags", "0"]);
    assert_eq!(out.status.code(), Some(2));
    let out = fou(&["validate", "--suite", "everything"]);
    assert_eq!(out.status.code(), Some(2));
    let out = fou(&["regime", "--process", "nonsense", "--hurst", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn empty_suite_trivially_passes() {
    let out = fou(&["validate"]);
    assert!(out.status.success());
}

#[test]
fn identities_suite_passes_from_the_cli() {
    let out = fou(&["validate", "--suite", "identities"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("0 failed"), "{text}");
}

#[test]
fn simulate_roundtrip_and_manifest_reproduction() {
    let dir = tempfile::tempdir().unwrap();
    let ens = dir.path().join("run.bin");
    let out = fou(&[
        "simulate", "--process", "fbm", "--hurst", "0.7", "--kind", "first", "--theta", "1",
        "--t1", "2", "--points", "65", "--n-paths", "50", "--seed", "9",
        "--output", ens.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = dir.path().join("run.bin.manifest.json");
    assert!(ens.exists() && manifest.exists());

    // Round trip: recomputed summary statistics match bit-exactly.
    let out = fou(&[
        "validate", "--ensemble", ens.to_str().unwrap(), "--manifest", manifest.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    // A tampered manifest fails with exit 1.
    let text = std::fs::read_to_string(&manifest).unwrap();
    let tampered = text.replace("summary_mean_final_bits\":\"", "summary_mean_final_bits\":\"f");
    let bad = dir.path().join("bad.manifest.json");
    std::fs::write(&bad, tampered).unwrap();
    let out = fou(&["validate", "--ensemble", ens.to_str().unwrap(), "--manifest", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    // Rerunning from the manifest alone reproduces the file bit-exactly.
    let again = dir.path().join("again.bin");
    let out = fou(&[
        "simulate", "--from-manifest", manifest.to_str().unwrap(),
        "--output", again.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let a = std::fs::read(&ens).unwrap();
    let b = std::fs::read(&again).unwrap();
    assert_eq!(a, b, "manifest rerun must be bit-identical");
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "process=fbm\nhurst=0.5\ntheta=1\nlags=0\n").unwrap();
    let out = fou(&["cov", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("5.0000000000000000e-1"));
    // Flag overrides the config value: θ = 2 halves the variance.
    let out = fou(&["cov", "--config", cfg.to_str().unwrap(), "--theta", "2"]);
    assert!(stdout(&out).contains("2.5000000000000000e-1"));
}

#[test]
fn output_dir_env_var_anchors_relative_paths() {
    let dir = tempfile::tempdir().unwrap();
    let out = fou_in(
        dir.path(),
        &[("FOU_OUTPUT_DIR", dir.path().to_str().unwrap())],
        &["cov", "--process", "fbm", "--hurst", "0.5", "--theta", "1", "--lags", "0", "--output", "table.csv"],
    );
    assert!(out.status.success());
    assert!(dir.path().join("table.csv").exists());
    assert!(dir.path().join("table.csv.manifest.json").exists());
}

#[test]
fn empirical_cov_table_has_the_full_schema() {
    let out = fou(&[
        "cov", "--process", "fbm", "--hurst", "0.5", "--theta", "1", "--lags", "0,1",
        "--empirical", "--n-paths", "200", "--seed", "3", "--points", "129",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.starts_with("lag,value,std_error,analytic\n"));
    assert_eq!(text.lines().count(), 3);
}
