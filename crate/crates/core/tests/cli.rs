use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fjs_core::toy::read_csv;

fn fjs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fjs")).args(args).output().expect("binary runs")
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("config.json");
    let cfg = serde_json::json!({
        "n_target": 300,
        "n_eval": 300,
        "seeds": [0],
        "importance_ks": [],
        "methods": [{"method": "source_only"}, {"method": "dann", "lambda": 1.0}],
        "train": {"epochs": 3, "classifier_epochs": 3},
    });
    fs::write(&path, cfg.to_string()).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn generate_writes_three_datasets() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let status = fjs(&["generate", "--out", out, "--seed", "2"]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let source = read_csv(dir.path().join("source.csv")).unwrap();
    assert_eq!(source.len(), 2625);
    assert_eq!(source.seed, 2);
    assert_eq!(read_csv(dir.path().join("eval.csv")).unwrap().len(), 10_000);
}

#[test]
fn malformed_config_exits_with_status_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, "{\"n_target\": \"many\"}").unwrap();
    let out = fjs(&["generate", "--config", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_theory_reports_controls() {
    let out = fjs(&["verify-theory", "--trials", "50", "--seed", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["theorem_1"]["failures"], 0);
    assert!(summary["theorem_2_negative_control"]["failures"].as_u64().unwrap() > 0);
}

#[test]
fn run_then_report_reaggregates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let run_dir = dir.path().join("run");
    let out = fjs(&["run", "--config", &cfg, "--out", run_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(run_dir.join("metrics_dann_seed0.jsonl").exists());
    assert!(!run_dir.join("metrics_source_only_seed0.jsonl").exists());
    assert!(run_dir.join("curve_dann.csv").exists());

    let again = dir.path().join("again");
    let report = run_dir.join("report.json");
    let out = fjs(&["report", "--input", report.to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(fs::read(report).unwrap(), fs::read(again.join("report.json")).unwrap());
}

#[test]
fn train_writes_model_and_cell() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = fjs(&["train", "--config", &cfg, "--method", "dann", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cell: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("cell.json")).unwrap()).unwrap();
    assert_eq!(cell["method"], "dann");
    assert!(cell["nll"].as_f64().unwrap().is_finite());
    assert!(dir.path().join("model.json").exists());
    let metrics = fs::read_to_string(dir.path().join("metrics.jsonl")).unwrap();
    assert!(metrics.lines().count() > 0);

    let bad = fjs(&["train", "--config", &cfg, "--method", "cida", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
}
