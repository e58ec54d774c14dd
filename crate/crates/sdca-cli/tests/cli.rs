//! End-to-end checks of the benchmark binary: every verb, plus the exit-code
//! contract (0 success, 1 config error, 2 runtime failure).

use std::fs;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sdca-bench"))
}

#[test]
fn verify_schedule_prints_verdicts() {
    let out = bin()
        .args(["verify-schedule", "constant", "--horizon", "2000"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("gamma estimate"));
    assert!(text.contains("ADMISSIBLE"));
}

#[test]
fn verify_schedule_writes_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let csv_path = tmp.path().join("report.csv");
    let out = bin()
        .args([
            "verify-schedule",
            "subexp:5:0.2",
            "--horizon",
            "2000",
            "--out",
        ])
        .arg(&csv_path)
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = fs::read_to_string(csv_path).unwrap();
    assert!(text.starts_with("k,alpha_k,A_k,beta_k,cond_c_partial_sum"));
}

#[test]
fn bad_schedule_spec_is_config_error() {
    let out = bin()
        .args(["verify-schedule", "powerhouse", "--horizon", "2000"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_cli_usage_is_config_error() {
    let out = bin().args(["frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn gen_data_and_run_and_summarize() {
    let tmp = tempfile::tempdir().unwrap();
    let data_path = tmp.path().join("toy.libsvm");
    let out = bin()
        .args(["gen-data"])
        .arg(&data_path)
        .args([
            "--dim", "5", "--count", "300", "--spike-strength", "5", "--seed", "9",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(data_path.exists());
    assert!(tmp.path().join("toy.meta.json").exists());

    let bundle_dir = tmp.path().join("bundle");
    let config = serde_json::json!({
        "experiment": "custom",
        "dataset": {"libsvm": {"path": data_path, "validation_fraction": 0.25}},
        "algorithms": [{
            "name": "sdca1",
            "algorithm": {"sdca": "sdca1"},
            "model": {"epca1": {"lambda": 1e-6}},
            "max_iterations": 120
        }],
        "trials": 2,
        "seed": 5,
        "eval_every": 30,
        "reference_starts": 4,
        "output_dir": bundle_dir,
    });
    let config_path = tmp.path().join("config.json");
    fs::write(&config_path, serde_json::to_string_pretty(&config).unwrap()).unwrap();

    let out = bin().arg("run").arg(&config_path).output().unwrap();
    assert!(
        out.status.success(),
        "stdout: {} stderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(bundle_dir.join("summary.csv").exists());
    assert!(bundle_dir.join("gap_vs_iteration.svg").exists());

    let out = bin().arg("summarize").arg(&bundle_dir).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("sdca1"), "{text}");
}

#[test]
fn run_with_missing_config_is_config_error() {
    let out = bin().args(["run", "/nonexistent/config.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn run_with_invalid_json_is_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let config_path = tmp.path().join("bad.json");
    fs::write(&config_path, "{ not json").unwrap();
    let out = bin().arg("run").arg(&config_path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn summarize_missing_bundle_is_runtime_error() {
    let out = bin().args(["summarize", "/nonexistent/bundle"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
