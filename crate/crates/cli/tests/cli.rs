//! Exit codes and output of the `vpd` binary.

use std::path::Path;
use std::process::{Command, Output};

const PAIR: &str = r#"
epsilon = 0.1
mode = "vpd"
seed = 1
softening = 0.05
diag_stride = 1
snapshot_stride = 50

[[particles]]
x = [2.0, 0.0, 0.0]
v = [0.0, 0.35, 0.0]
w = 1.0
species = "ion"

[[particles]]
x = [-2.0, 0.0, 0.0]
v = [0.0, -0.35, 0.0]
w = 1.0
species = "electron"

[integrator]
dt = 0.01
scheme = "rk4"
t_end = 1.0

[checks]
expect_dispersion = false
"#;

fn vpd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vpd"))
        .args(args)
        .output()
        .expect("spawn vpd")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn run_pair(dir: &Path, name: &str, text: &str) -> String {
    let config = write_config(dir, &format!("{name}.toml"), text);
    let out = dir.join(name).to_string_lossy().into_owned();
    let o = vpd(&["run", "--config", &config, "--output", &out]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    out
}

#[test]
fn run_check_compare_fit_succeed() {
    let dir = tempfile::tempdir().unwrap();
    let damped = run_pair(dir.path(), "vpd", PAIR);
    let gauge = run_pair(
        dir.path(),
        "gauge",
        &PAIR.replace(r#"mode = "vpd""#, r#"mode = "gauge""#),
    );

    let o = vpd(&["check", &damped]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("overall: pass"));

    let o = vpd(&["compare", &damped, &gauge]);
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["pass"], true);

    let series = format!("{damped}/series.csv");
    let o = vpd(&["fit", &series, "--column", "R", "--window", "0.2,1.0"]);
    assert_eq!(o.status.code(), Some(0));
    let fit: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(fit["exponent"].is_f64());
}

#[test]
fn run_prints_summary_and_honours_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "pair.toml", PAIR);
    let out = dir.path().join("strided").to_string_lossy().into_owned();
    let o = vpd(&[
        "run", "--config", &config, "--output", &out, "--stride", "10",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["status"], "completed");
    assert_eq!(summary["rows"], 11);
}

#[test]
fn bad_input_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(
        dir.path(),
        "bad.toml",
        &PAIR.replace("epsilon = 0.1", "epsilon = -1.0"),
    );
    let out = dir.path().join("bad").to_string_lossy().into_owned();
    let o = vpd(&["run", "--config", &bad, "--output", &out]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));

    let missing = dir.path().join("nope").to_string_lossy().into_owned();
    assert_eq!(vpd(&["check", &missing]).status.code(), Some(1));
    assert_eq!(vpd(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(vpd(&["--help"]).status.code(), Some(0));
}

#[test]
fn failed_check_and_compare_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let strict = PAIR.replace(
        "expect_dispersion = false",
        "expect_dispersion = false\nidentity_tol = 1e-30",
    );
    let damped = run_pair(dir.path(), "strict", &strict);
    let o = vpd(&["check", &damped]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));

    let tight = PAIR.replace(
        "expect_dispersion = false",
        "expect_dispersion = false\ngauge_tol = 1e-30",
    );
    let a = run_pair(dir.path(), "tight_vpd", &tight);
    let b = run_pair(
        dir.path(),
        "tight_gauge",
        &tight.replace(r#"mode = "vpd""#, r#"mode = "gauge""#),
    );
    assert_eq!(vpd(&["compare", &a, &b]).status.code(), Some(1));
}

#[test]
fn numerical_abort_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let escaping = PAIR.replace("t_end = 1.0", "t_end = 5.0")
        + "\n[grid]\ncells_per_axis = 8\nbox_half_width = 2.2\nevery = 1\n";
    let config = write_config(dir.path(), "escape.toml", &escaping);
    let out = dir.path().join("escape").to_string_lossy().into_owned();
    let o = vpd(&["run", "--config", &config, "--output", &out]);
    assert_eq!(
        o.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["status"], "numerical_abort");
}
