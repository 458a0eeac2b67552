//! Binary-level smoke tests: exit codes, output files, determinism.

use std::path::{Path, PathBuf};
use std::process::Command;

fn netheat() -> Command {
    Command::new(env!("CARGO_BIN_EXE_netheat"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

#[test]
fn validate_succeeds_and_writes_report() {
    let out = tempfile::tempdir().unwrap();
    let status = netheat()
        .args(["validate", "--scenario"])
        .arg(scenario("single_edge.json"))
        .arg("--out")
        .arg(out.path())
        .status()
        .unwrap();
    assert!(status.success());
    let report = std::fs::read_to_string(out.path().join("report.json")).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(parsed["command"], "validate");
    assert_eq!(parsed["summary"]["valid"], true);
}

#[test]
fn spectrum_reruns_are_byte_identical() {
    let out_a = tempfile::tempdir().unwrap();
    let out_b = tempfile::tempdir().unwrap();
    for out in [&out_a, &out_b] {
        let status = netheat()
            .args(["spectrum", "--scenario"])
            .arg(scenario("path_affine.json"))
            .arg("--out")
            .arg(out.path())
            .status()
            .unwrap();
        assert!(status.success());
    }
    for file in ["spectrum.csv", "report.json"] {
        let a = std::fs::read(out_a.path().join(file)).unwrap();
        let b = std::fs::read(out_b.path().join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between runs");
    }
}

#[test]
fn simulate_honors_downsample_flag() {
    let out = tempfile::tempdir().unwrap();
    let status = netheat()
        .args(["simulate", "--downsample", "3", "--scenario"])
        .arg(scenario("single_edge.json"))
        .arg("--out")
        .arg(out.path())
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(out.path().join("trajectory.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,e1_x0.0000,e1_x0.5000,e1_x1.0000");
}

#[test]
fn errors_exit_nonzero_with_diagnostics() {
    // missing file
    let out = tempfile::tempdir().unwrap();
    let output = netheat()
        .args(["validate", "--scenario", "does_not_exist.json", "--out"])
        .arg(out.path())
        .output()
        .unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("netheat:"));

    // schema violation
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"graph": {"vertices": 2, "edges": [[1,2]]}}"#).unwrap();
    let output = netheat()
        .args(["validate", "--scenario"])
        .arg(&bad)
        .arg("--out")
        .arg(out.path())
        .output()
        .unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("coefficients"));
}

#[test]
fn thread_cap_env_var_is_accepted() {
    let out = tempfile::tempdir().unwrap();
    let status = netheat()
        .env("NETHEAT_THREADS", "1")
        .args(["spectrum", "--scenario"])
        .arg(scenario("single_edge.json"))
        .arg("--out")
        .arg(out.path())
        .status()
        .unwrap();
    assert!(status.success());
}
