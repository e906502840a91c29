mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::configs_dir;
use serde_json::Value;

fn solver(task: &str, config: &str, out: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_solver"))
        .arg(task)
        .arg("--config")
        .arg(configs_dir().join(config))
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("solution_summary.json")).unwrap()).unwrap()
}

#[test]
fn verify_accepts_the_default_problem() {
    let dir = tempfile::tempdir().unwrap();
    let out = solver("verify", "saturating_default.json", dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(dir.path());
    assert_eq!(s["exit_code"], 0);
    assert_eq!(s["task"], "verify");
    assert_eq!(s["grid"]["nodes"], 200);
    assert!(!dir.path().join("solution.csv").exists());
}

#[test]
fn solve_writes_a_radial_profile() {
    let dir = tempfile::tempdir().unwrap();
    let out = solver("solve", "saturating_default.json", dir.path(), &["--log-iterates"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("solution.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("r,u,d,abs_x"));
    assert_eq!(lines.count(), 200);
    let log = fs::read_to_string(dir.path().join("solution_iterates.jsonl")).unwrap();
    for line in log.lines() {
        let _: Value = serde_json::from_str(line).unwrap();
    }
    assert!(log.lines().count() > 1);
}

#[test]
fn multi_writes_one_file_per_solution() {
    let dir = tempfile::tempdir().unwrap();
    let out = solver("multi", "pure_power.json", dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for j in 0..3 {
        assert!(dir.path().join(format!("solution_{j}.csv")).exists());
    }
    let energies: Vec<f64> =
        summary(dir.path())["energies"].as_array().unwrap().iter().map(|e| e.as_f64().unwrap()).collect();
    assert_eq!(energies.len(), 3);
    assert!(energies.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn box_profiles_carry_coordinates() {
    let dir = tempfile::tempdir().unwrap();
    let out = solver("normalized", "linear_box.json", dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("solution.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,y,z,u,d,abs_x"));
    assert_eq!(lines.count(), 12 * 12 * 12);
}

#[test]
fn hardy_task_reports_both_constants() {
    let dir = tempfile::tempdir().unwrap();
    let out = solver("hardy", "hardy_violation.json", dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(dir.path());
    assert!(s["result"]["origin"].as_f64().unwrap() >= 0.25);
    assert!(s["result"]["boundary"].as_f64().unwrap() >= 0.25);
}

#[test]
fn missing_config_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = solver("solve", "does_not_exist.json", dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn violated_hardy_bound_blocks_solving() {
    let dir = tempfile::tempdir().unwrap();
    let out = solver("solve", "hardy_violation.json", dir.path(), &[]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!dir.path().join("solution.csv").exists());
    assert_eq!(summary(dir.path())["exit_code"], 3);
}
