use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn invertkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_invertkit")).args(args).output().expect("run invertkit")
}

fn read(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn replay_status(path: &Path) -> (i32, Value) {
    let out = invertkit(&["replay", path.to_str().unwrap()]);
    (out.status.code().unwrap(), serde_json::from_slice(&out.stdout).unwrap())
}

#[test]
fn solve_shifted_sine() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("solve.json");
    let o = invertkit(&["solve", "--map", "shifted-sine", "--target", "5", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read(&out);
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["command"], "solve");
    assert_eq!(r["result"]["status"], "solved");
    assert!(r["result"]["residual"].as_f64().unwrap() <= 1e-8);
    // The effective config is embedded with its defaults.
    assert_eq!(r["config"]["weight"], "zero");
    assert!(r["config"]["descent"]["max_iters"].is_u64());
    let csv = std::fs::read_to_string(dir.path().join("solve.witness.csv")).unwrap();
    assert!(csv.starts_with("witness,index,f_value,weighted_criticality,x1\n"));
    assert!(!csv.contains('\r'));
}

#[test]
fn check_identity_certifies_everything() {
    let o = invertkit(&["check", "--map", "identity", "--samples", "500"]);
    assert_eq!(o.status.code(), Some(0));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    let verdicts = r["result"]["verdicts"].as_object().unwrap();
    assert_eq!(verdicts.len(), 8);
    assert!(verdicts.values().all(|v| v["status"] == "certified_sampled"));
    assert_eq!(r["result"]["sampling"]["samples"], 500);
}

#[test]
fn config_errors_exit_2() {
    for args in [
        &["solve", "--map", "nope"][..],
        &["solve", "--map", "arctan", "--target", "1,x"],
        &["solve", "--map", "arctan", "--target", "1,2"],
        &["solve", "--map", "arctan", "--tol-residual", "-1"],
        &["check", "--map", "identity", "--criteria", "7"],
        &["check", "--map", "identity", "--out", concat!(env!("CARGO_MANIFEST_DIR"), "/Cargo.toml/report.json")],
        &["gallery-audit", "--map", "identity"],
        &["frobnicate"],
    ] {
        let o = invertkit(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn numerical_failure_exits_3() {
    let o = invertkit(&["solve", "--map", "saturating", "--starts", "-1000"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn replay_detects_injected_fault() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("arctan.json");
    let o = invertkit(&["solve", "--map", "arctan", "--target", "2", "--starts", "0", "--out", good.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let mut r = read(&good);
    let witness = &r["result"]["witnesses"][0];
    assert_eq!(witness["classification"], "escaped_to_infinity");
    assert_eq!(replay_status(&good), (0, serde_json::json!({"status": "ok", "witnesses": 1})));

    let index = 3;
    let v = &mut r["result"]["witnesses"][0]["f_values"][index];
    *v = serde_json::json!(v.as_f64().unwrap() + 1e-3);
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, serde_json::to_string(&r).unwrap()).unwrap();
    let (code, status) = replay_status(&bad);
    assert_eq!(code, 1);
    assert_eq!(status, serde_json::json!({"status": "mismatch", "witness": 0, "index": index}));
}

#[test]
fn replay_of_witness_free_report_is_vacuously_ok() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mpass.json");
    let o = invertkit(&["mpass", "--map", "identity", "--target", "1,1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(read(&out)["result"]["verdict"], "no_evidence");
    assert_eq!(replay_status(&out), (0, serde_json::json!({"status": "ok", "witnesses": 0})));
}

#[test]
fn replay_rejects_other_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("r.json");
    std::fs::write(&p, r#"{"schema_version": 7, "command": "solve"}"#).unwrap();
    assert_eq!(invertkit(&["replay", p.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<_> = ["a.json", "b.json"].iter().map(|n| dir.path().join(n)).collect();
    for p in &paths {
        let o = invertkit(&["check", "--map", "complex-exp", "--target", "1,0", "--samples", "300", "--seed", "9", "--out", p.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
    }
    assert_eq!(std::fs::read(&paths[0]).unwrap(), std::fs::read(&paths[1]).unwrap());
    let text = std::fs::read_to_string(&paths[0]).unwrap();
    assert!(text.contains("\"radius\": 1.0000000000000000e1"));
}

#[test]
fn profile_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p.json");
    let o = invertkit(&["profile", "--map", "saturating", "--radius", "20", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let r = read(&out);
    assert_eq!(r["result"]["derived_weight"]["divergence_status"]["status"], "falsified");
    let csv = std::fs::read_to_string(dir.path().join("p.profile.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("rho,inf_estimate,varrho"));
    assert_eq!(lines.count(), 257);
}

#[test]
fn gallery_listing() {
    let o = invertkit(&["gallery"]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 7);
}
