use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;
use wicklab_cli::Problem;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn run(args: &[&str]) -> (i32, Value) {
    let out: Output = Command::new(env!("CARGO_BIN_EXE_wicklab")).args(args).output().expect("binary runs");
    let code = out.status.code().expect("exit code");
    let report = if out.stdout.is_empty() { Value::Null } else { serde_json::from_slice(&out.stdout).expect("stdout is JSON") };
    (code, report)
}

fn path(name: &str) -> String {
    fixture(name).display().to_string()
}

#[test]
fn problem_files_round_trip() {
    for name in ["quartic.json", "sextic_substitution.json", "transform.json", "ibp.json", "mexican_hat.json", "gauge_hat.json"] {
        let p = Problem::from_path(&fixture(name)).unwrap();
        p.validate().unwrap();
        let text = p.to_json();
        assert_eq!(Problem::from_json(&text).unwrap().to_json(), text, "{name}");
        let c = p.canonical().unwrap();
        assert_eq!(c.canonical().unwrap(), c, "{name}");
    }
}

#[test]
fn expand_quartic() {
    let (code, r) = run(&["expand", &path("quartic.json"), "--order", "2"]);
    assert_eq!(code, 0);
    assert_eq!(r["coeffs"], serde_json::json!(["1", "-3", "105/2"]));
}

#[test]
fn substitution_cancels() {
    let (code, r) = run(&["expand", &path("sextic_substitution.json")]);
    assert_eq!(code, 0);
    assert_eq!(r["coeffs"], serde_json::json!(["1", "0", "0", "0", "0", "0"]));
}

#[test]
fn identity_checks_exit_zero() {
    for (cmd, file) in [
        ("check-ibp", "ibp.json"),
        ("check-ibp", "quartic.json"),
        ("transform", "transform.json"),
        ("gauge-slice", "gauge_hat.json"),
        ("gauge-weighted", "gauge_hat.json"),
        ("morse-bott", "mexican_hat.json"),
    ] {
        let (code, _) = run(&[cmd, &path(file)]);
        assert_eq!(code, 0, "{cmd} {file}");
    }
}

#[test]
fn lattice_demo_zero_modes() {
    let (code, r) = run(&["lattice-demo", "--n", "4", "--order", "1"]);
    assert_eq!(code, 2);
    assert_eq!(r["total"], "15/16");
    let (code, r) = run(&["lattice-demo", "--n", "4", "--order", "1", "--zero-mode", "pinned"]);
    assert_eq!(code, 0);
    assert_eq!(r["total"], "0");
}

#[test]
fn asymptotics_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let (code, _) = run(&["asymptotics", &path("quartic.json"), "--order", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count(), 5, "{csv}");
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(out.with_extension("json")).unwrap()).unwrap();
    assert_eq!(summary["passed"], true);
}

#[test]
fn errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"dimension": 1, "variables": ["x"], "action": "x^(1/2)", "point": ["0"]}"#).unwrap();
    assert_eq!(run(&["expand", bad.to_str().unwrap()]).0, 1);
    assert_eq!(run(&["expand", dir.path().join("missing.json").to_str().unwrap()]).0, 1);
    // no transform block
    assert_eq!(run(&["transform", &path("quartic.json")]).0, 1);
    // degenerate point: x = 1 is not critical
    std::fs::write(&bad, r#"{"dimension": 1, "variables": ["x"], "action": "1/2*x^2", "point": ["1"]}"#).unwrap();
    assert_eq!(run(&["expand", bad.to_str().unwrap()]).0, 1);
}

#[test]
fn seed_is_recorded() {
    let (_, r) = run(&["expand", &path("quartic.json"), "--seed", "7"]);
    assert_eq!(r["seed"], 7);
}
