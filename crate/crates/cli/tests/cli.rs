//! End-to-end checks of the `aggsim` binary against the shipped scenario
//! files.

use std::path::PathBuf;
use std::process::{Command, Output};

fn scenarios_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn aggsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aggsim"))
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn validate_accepts_shipped_scenarios() {
    for file in ["fig2.toml", "hundred_party_homog.toml", "intermittent_thousand.toml"] {
        let path = scenarios_dir().join(file);
        let out = aggsim(&["validate", path.to_str().unwrap()]);
        assert!(out.status.success(), "{file}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stdout).contains("ok:"));
    }
}

#[test]
fn validate_rejects_missing_file_with_nonzero_exit() {
    let out = aggsim(&["validate", "does_not_exist.toml"]);
    assert!(!out.status.success());
}

#[test]
fn run_fig2_always_on_reports_expected_numbers() {
    let path = scenarios_dir().join("fig2.toml");
    let out = aggsim(&[
        "run",
        path.to_str().unwrap(),
        "--strategy",
        "always_on",
        "--format",
        "csv",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let data = stdout.lines().nth(1).expect("one data row");
    let cells: Vec<&str> = data.split(',').collect();
    assert_eq!(cells[1], "always_on");
    assert_eq!(cells[3], "1"); // mean aggregation latency, seconds
    assert_eq!(cells[4], "21"); // container-seconds
}

#[test]
fn run_rejects_unknown_strategy() {
    let path = scenarios_dir().join("fig2.toml");
    let out = aggsim(&["run", path.to_str().unwrap(), "--strategy", "bogus"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown strategy"));
}

#[test]
fn trace_export_is_deterministic_across_invocations() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenarios_dir().join("fig2.toml");
    let mut traces = Vec::new();
    for i in 0..2 {
        let trace_path = dir.path().join(format!("trace{i}.log"));
        let out = aggsim(&[
            "run",
            path.to_str().unwrap(),
            "--trace",
            trace_path.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        traces.push(std::fs::read(&trace_path).unwrap());
    }
    assert_eq!(traces[0], traces[1]);
    assert!(!traces[0].is_empty());
}

#[test]
fn sweep_emits_combined_report_with_savings() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenarios_dir().join("demo_sweep.toml");
    let out = aggsim(&[
        "sweep",
        path.to_str().unwrap(),
        "--format",
        "csv",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    // Header plus 2 scenarios x 5 strategies.
    assert_eq!(lines.len(), 11);
    assert!(lines[0].contains("savings_vs_jit_pct"));
}

#[test]
fn bench_tpair_measures_a_positive_time() {
    let out = aggsim(&["bench-tpair", "--shape", "20000,10000", "--trials", "11"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("t_pair = "));
}

#[test]
fn bench_tpair_rejects_too_few_trials() {
    let out = aggsim(&["bench-tpair", "--shape", "100", "--trials", "3"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("at least 11"));
}
