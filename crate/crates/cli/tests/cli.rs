use std::path::PathBuf;
use std::process::{Command, Output};

fn bergman(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bergman"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("bergman-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(bergman(&["envelope", "--bogus"]).status.code(), Some(2));
    assert_eq!(bergman(&["transform", "--f", "nonsense:1", "--z", "0,0", "--t", "0.3"]).status.code(), Some(2));
    let cfg = scratch("bad.json");
    std::fs::write(&cfg, r#"{"N": 0}"#).unwrap();
    let out = bergman(&["suite", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("N must be"));
}

#[test]
fn kernels_match_closed_form() {
    let out = bergman(&["kernels", "--t", "0.5", "--z", "0.3,0.2", "--w", "-0.7,0.4"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    let re = v["mehler"]["re"].as_f64().unwrap();
    let im = v["mehler"]["im"].as_f64().unwrap();
    assert!((re - 0.215818710762216544).abs() < 1e-13);
    assert!((im - 0.0601595115819535524).abs() < 1e-13);
}

#[test]
fn bridge_residual_is_small() {
    let out = bergman(&["bridge", "--t", "0.4", "--f", "gaussian:1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert!(v["residual"].as_f64().unwrap() < 1e-6);
    let c = v["c"].as_f64().unwrap();
    let a = v["a"].as_f64().unwrap();
    assert!((c - (a * a - 1.0).powf(0.25)).abs() < 1e-14);
}

#[test]
fn envelope_csv_has_header_and_rows() {
    let path = scratch("env.csv");
    let out = bergman(&["envelope", "--t", "0.3", "--m", "2", "--res", "9", "--out", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,y,absF2,bound,ratio"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 81);
    assert!(rows.iter().all(|r| r.len() == 5 && r[4] >= 0.0 && r[4].is_finite()));
}

#[test]
fn suite_writes_passing_report() {
    let report = scratch("report.json");
    let cfg = scratch("suite.json");
    std::fs::write(&cfg, format!(r#"{{"schema": "1", "out": {:?}}}"#, report.to_str().unwrap())).unwrap();
    let out = bergman(&["suite", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let checks = v["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 14);
    assert!(checks.iter().all(|c| c["status"] == "pass"));
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 14);
}

#[test]
fn under_truncated_suite_exits_1() {
    let cfg = scratch("short.json");
    std::fs::write(&cfg, r#"{"N": 4}"#).unwrap();
    let out = bergman(&["suite", "--config", cfg.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("name,theorem,status,metric,tol"));
    assert!(text.contains(",fail,"));
}
