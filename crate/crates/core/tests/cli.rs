use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use icarl::harness::{validate_result, Experiment, ExperimentResult, RunConfig};
use serde_json::Value;

fn icarl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_icarl"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, json: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, json).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn defaults_print_loadable_configs() {
    for name in Experiment::NAMES {
        for extra in [&[][..], &["--paper-scale"][..]] {
            let mut args = vec!["defaults", name];
            args.extend_from_slice(extra);
            let out = icarl(&args);
            assert!(out.status.success(), "{name}");
            let cfg = RunConfig::from_json(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
            assert_eq!(cfg.experiment.name(), name);
        }
    }
    assert_eq!(
        icarl(&["defaults", "no-such-experiment"]).status.code(),
        Some(2)
    );
}

#[test]
fn hessian_writes_result_and_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let out = icarl(&["hessian", "--seed", "3", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let text = fs::read_to_string(out_dir.join("result.json")).unwrap();
    let result = ExperimentResult::from_json(&text).unwrap();
    assert!(result.passed);
    assert_eq!(result.config.seed, 3);
    for name in &result.artifacts {
        assert!(out_dir.join(name).is_file(), "{name} missing");
    }
    assert!(out_dir.join("config.json").is_file());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("pass"));
}

#[test]
fn stdout_result_without_out_dir() {
    let out = icarl(&["gradient-flow"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    validate_result(&v).unwrap();
    assert_eq!(v["experiment"], "gradient-flow");
}

#[test]
fn same_seed_same_metrics() {
    let run = || {
        let out = icarl(&["grad-check", "--seed", "9"]);
        assert!(out.status.success());
        let v: Value = serde_json::from_slice(&out.stdout).unwrap();
        (v["metrics"].clone(), v["checks"].clone())
    };
    assert_eq!(run(), run());
}

#[test]
fn run_follows_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(
        dir.path(),
        r#"{"experiment": {"name": "gradient-flow", "inits": 3}, "seed": 4}"#,
    );
    let out = icarl(&["run", "--config", &path]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["config"]["seed"], 4);
    assert_eq!(v["metrics"]["runs"].as_array().unwrap().len(), 3);
}

#[test]
fn bad_configs_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let mismatched = write_config(dir.path(), r#"{"experiment": {"name": "hessian"}}"#);
    assert_eq!(
        icarl(&["pe-sweep", "--config", &mismatched]).status.code(),
        Some(2)
    );

    let unknown = write_config(
        dir.path(),
        r#"{"experiment": {"name": "hessian", "mu": [4.0]}}"#,
    );
    assert_eq!(icarl(&["run", "--config", &unknown]).status.code(), Some(2));

    assert_eq!(icarl(&["run"]).status.code(), Some(2));
    assert_eq!(
        icarl(&["run", "--config", "/nonexistent/c.json"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn failing_check_exits_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(
        dir.path(),
        r#"{"experiment": {"name": "grad-check", "draws": 5, "inject_sign_flip": true}}"#,
    );
    let out = icarl(&["grad-check", "--config", &path]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("FAIL"));
}
