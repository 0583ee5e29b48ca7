use std::process::{Command, Output};

use revealplan_core::sim::{read_report_csv, read_study_csv, StudyRow};
use revealplan_core::{save_spec, GameSpec, Model, PlannerKind, SimReport};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_revealplan"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn solve_partial_m3() {
    let out = run(&["solve", "--preset", "table-clearing", "--model", "M3"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(
        text.starts_with("Pick up both then Pick up both, Pick up both; value 7.56\n"),
        "{text}"
    );
}

#[test]
fn solve_complete_baseline() {
    let out = run(&[
        "solve",
        "--preset",
        "table-clearing",
        "--baseline",
        "complete",
        "--partial-obs",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.starts_with("Pick up closest then Pick up both, Pick up both; value 8.56\n"));
    assert!(text.contains("predicted reward per round: 1, 3.6, 3.96"));
}

#[test]
fn solve_json_lines() {
    let out = run(&[
        "solve",
        "--preset",
        "table-clearing",
        "--model",
        "M2",
        "--format",
        "json-lines",
    ]);
    let v: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(v["model"], "M2");
    assert_eq!(v["observability"], "full");
    assert_eq!(v["plan"].as_array().unwrap().len(), 3);
}

#[test]
fn solve_rejects_bad_specs() {
    let out = run(&["solve", "--preset", "table-clearing", "--alpha", "2"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha"));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("big.json");
    let spec = GameSpec::from_matrix(vec![vec![0.0; 2]; 13], vec![0; 13], 0.5, 2, Model::M3);
    std::fs::write(&path, save_spec(&spec)).unwrap();
    let out = run(&["solve", "--spec", path.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("capacity"));

    let out = run(&["solve"]);
    assert!(!out.status.success());
    let out = run(&["solve", "--preset", "table-clearing", "--full-obs"]);
    assert!(!out.status.success());
}

#[test]
fn verify_default_passes() {
    let out = run(&["verify"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("PASS, max |Δ| < 1e-9"));
}

#[test]
fn verify_single_instance_is_deterministic() {
    let a = run(&["verify", "--seed", "42", "--instances", "1"]);
    let b = run(&["verify", "--seed", "42", "--instances", "1"]);
    assert!(a.status.success());
    assert_eq!(stdout(&a), stdout(&b));
    assert!(stdout(&a).starts_with("instance "));
}

#[test]
fn verify_catches_injected_fault() {
    let out = run(&["verify", "--inject-fault", "exploit", "--instances", "50"]);
    assert!(!out.status.success());
    let text = stdout(&out);
    let last = text.lines().last().unwrap();
    assert!(last.starts_with("FAIL"), "{text}");
    assert!(last.contains("seeds "));
}

#[test]
fn simulate_complete_and_round_trip() {
    let out = run(&[
        "simulate",
        "--preset",
        "table-clearing",
        "--planner",
        "complete",
        "--runs",
        "100000",
    ]);
    assert!(out.status.success());
    let report = read_report_csv(out.stdout.as_slice()).unwrap();
    assert!(
        (report.total_mean - 4.6).abs() < 0.02,
        "{}",
        report.total_mean
    );
    assert_eq!(report.planner, "complete");

    let json = run(&[
        "simulate",
        "--preset",
        "table-clearing",
        "--planner",
        "complete",
        "--runs",
        "100000",
        "--format",
        "json-lines",
    ]);
    let from_json: SimReport = serde_json::from_str(stdout(&json).trim()).unwrap();
    assert_eq!(from_json, report);
}

#[test]
fn simulate_usage_errors() {
    let out = run(&["simulate", "--preset", "table-clearing", "--runs", "0"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&[
        "simulate",
        "--preset",
        "table-clearing",
        "--baseline",
        "complete",
        "--full-obs",
    ]);
    assert!(!out.status.success());
}

#[test]
fn study_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("curves.csv");
    let args = [
        "study",
        "--instances",
        "20",
        "--runs",
        "10",
        "--horizons",
        "1,8",
        "--out",
        path.to_str().unwrap(),
    ];
    assert!(run(&args).status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("# "));
    let rows = read_study_csv(text.as_bytes()).unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0].horizon, 1);
    assert_eq!(rows[0].mean_reward_per_round, rows[1].mean_reward_per_round);

    let json = run(&[
        "study",
        "--instances",
        "20",
        "--runs",
        "10",
        "--horizons",
        "1,8",
        "--format",
        "json-lines",
    ]);
    let from_json: Vec<StudyRow> = stdout(&json)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(from_json, rows);
    assert_eq!(from_json[1].planner, PlannerKind::Complete);
}

#[test]
fn serve_rejects_bad_address() {
    let out = Command::new(env!("CARGO_BIN_EXE_revealplan"))
        .args(["serve"])
        .env("REVEALPLAN_ADDR", "nonsense")
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid bind address"));
}
