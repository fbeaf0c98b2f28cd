use serde_json::Value;
use std::process::{Command, Output};

fn mucklab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mucklab")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn empty_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.json");
    std::fs::write(&path, "").unwrap();
    let o = mucklab(&["ap", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn unknown_and_invalid_keys_are_named() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("typo.json");
    std::fs::write(&path, r#"{"alpah": 0.5}"#).unwrap();
    let o = mucklab(&["ap", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`alpah`"), "{}", stderr(&o));

    let o = mucklab(&["solve", "--lambda", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`Lambda`"), "{}", stderr(&o));

    let o = mucklab(&["reifenberg", "--grid", "64"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`--grid`"), "{}", stderr(&o));

    let o = mucklab(&["ap", "--threads", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn solver_failure_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("short.json");
    std::fs::write(&path, r#"{"mesh": {"m": 32}, "solver": {"tol": 1e-12, "maxit": 2}}"#).unwrap();
    let o = mucklab(&["solve", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn flags_override_file_and_report_is_stamped() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, r#"{"alpha": 0.3, "n": 3, "p": [10]}"#).unwrap();
    let out = dir.path().join("out");
    let o = mucklab(&["counterexample", "--config", path.to_str().unwrap(), "--alpha", "0.25", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["config"]["alpha"], 0.25);
    assert_eq!(report["result"]["p_star"], 11.0);
    assert_eq!(report["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(report["config_hash"].as_str().map(str::len), Some(64));
    for file in ["report.json", "residuals.csv", "annuli.csv", "annuli.svg"] {
        assert!(out.join(file).exists(), "{file} missing");
    }
}
