use std::path::Path;
use std::process::{Command, Output};

fn atlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_atlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

const SMALL: &[&str] = &[
    "--n-train", "40", "--n-test", "40", "--iterations", "20", "--batch-size", "4",
    "--hidden", "4", "--trials", "2", "--eval-steps", "3", "--inner-steps", "2",
    "--checkpoint-every", "10",
];

fn with_out<'a>(cmd: &'a str, dir: &'a Path, extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec![cmd, "--output", dir.to_str().unwrap()];
    v.extend_from_slice(SMALL);
    v.extend_from_slice(extra);
    v
}

#[test]
fn gap_writes_report_trace_and_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = atlab(&with_out("gap", dir.path(), &["--algorithm", "free", "--free-steps", "2"]));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["report.json", "trace.csv", "plotdata_learning_curve.csv"] {
        assert!(dir.path().join(f).exists(), "missing {f}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report[0]["trials"].as_array().unwrap().len(), 2);
    // header plus 2 trials x 2 checkpoints
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 5);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut runs = Vec::new();
    for _ in 0..2 {
        let out = atlab(&with_out("gap", dir.path(), &["--algorithm", "fast", "--seed", "9"]));
        assert!(out.status.success());
        let files: Vec<Vec<u8>> = ["report.json", "trace.csv", "plotdata_learning_curve.csv"]
            .iter()
            .map(|f| std::fs::read(dir.path().join(f)).unwrap())
            .collect();
        runs.push(files);
    }
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn config_file_is_read_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let out = atlab(&with_out("gap", dir.path(), &["--algorithm", "vanilla"]));
    assert!(out.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let cfg_path = dir.path().join("config.json");
    std::fs::write(&cfg_path, report[0]["config"].to_string()).unwrap();

    let second = tempfile::tempdir().unwrap();
    let out = atlab(&[
        "gap", "--config", cfg_path.to_str().unwrap(), "--output", second.path().to_str().unwrap(),
        "--trials", "1",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r2: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(second.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(r2[0]["trials"].as_array().unwrap().len(), 1);
    assert_eq!(r2[0]["trials"][0], report[0]["trials"][0]);
}

#[test]
fn vs_n_with_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let out = atlab(&with_out(
        "vs-n",
        dir.path(),
        &["--algorithm", "free", "--n-values", "20,40,80", "--against", "vanilla"],
    ));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("plotdata_gap_vs_n.csv").exists());
    let r: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(r["sweeps"].as_array().unwrap().len(), 2);
}

#[test]
fn transfer_and_free_trades_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = atlab(&with_out("transfer", dir.path(), &["--algorithm", "free", "--algorithm-b", "vanilla"]));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("plotdata_transfer.csv").exists());

    let dir = tempfile::tempdir().unwrap();
    let out = atlab(&with_out("free-trades", dir.path(), &["--free-steps", "2"]));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(r["free"]["algorithm"], "free_trades");
}

#[test]
fn stability_study_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = atlab(&[
        "stability", "--output", dir.path().to_str().unwrap(), "--runs", "3", "--iterations", "6",
        "--probes", "20", "--algorithm", "fast",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1 + 3 * 6);
    assert!(dir.path().join("plotdata_distance.csv").exists());
}

#[test]
fn bounds_from_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = atlab(&[
        "bounds", "--output", dir.path().to_str().unwrap(), "--n", "100", "--b", "10", "--t", "40",
        "--m", "4", "--c", "0.5", "--epsilon", "0.1", "--attack-lr", "0.1", "--fast-step", "0.1",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    // beta = c = 1 defaults give lambda_vanilla = c
    assert_eq!(r["bounds"][0]["lambda"], 0.5);
    assert_eq!(r["bounds"].as_array().unwrap().len(), 3);
}

#[test]
fn quick_check_passes() {
    let out = atlab(&["check", "--quick"]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 5);
}

#[test]
fn invalid_config_exits_nonzero_with_error_object() {
    let dir = tempfile::tempdir().unwrap();
    let out = atlab(&["gap", "--output", dir.path().to_str().unwrap(), "--batch-size", "0"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().last().unwrap();
    let v: serde_json::Value = serde_json::from_str(line).unwrap();
    assert_eq!(v["error"]["kind"], "invalid_config");
}

#[test]
fn missing_config_file_is_an_io_error() {
    let out = atlab(&["gap", "--config", "/nonexistent/cfg.json"]);
    assert_eq!(out.status.code(), Some(2));
    let v: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&out.stderr).lines().last().unwrap()).unwrap();
    assert_eq!(v["error"]["kind"], "io");
}
