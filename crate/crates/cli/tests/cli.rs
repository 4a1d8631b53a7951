use std::process::{Command, Output};

use serde_json::Value;
use topopeps_core::group::FiniteGroup;
use topopeps_core::peps::{double_model_tensor, PepsTensor};

fn topopeps(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_topopeps"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn check<'a>(report: &'a Value, name: &str) -> &'a Value {
    report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["check"].as_str().unwrap().contains(name))
        .unwrap_or_else(|| panic!("no check `{name}`"))
}

#[test]
fn degeneracy_2d_z2() {
    let out = topopeps(&["check", "gs-degeneracy-2d", "--group", "Z2", "--L", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["suite"], "gs-degeneracy-2d");
    assert_eq!(r["pass"], true);
    let dim = check(&r, "ground-space dimension");
    assert_eq!(dim["measured"]["value"], 4);
    assert_eq!(dim["predicted"], 4);
    for c in r["checks"].as_array().unwrap() {
        for key in ["predicted", "measured", "residual", "tolerance", "pass", "provenance", "wall_time_s"] {
            assert!(c.get(key).is_some(), "{key} missing");
        }
    }
}

#[test]
fn entropy_correction_is_minus_log2() {
    let out = topopeps(&["check", "entropy", "--group", "Z2", "--L", "3", "--region", "1,1"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    let c = check(&r, "topological correction");
    let v = c["measured"]["value"].as_f64().unwrap();
    assert!((v + 2f64.ln()).abs() < 1e-9);
    assert_eq!(check(&r, "spectrum rank")["measured"], 8);
}

#[test]
fn flux_charge_braid_s3() {
    let out = topopeps(&["check", "anyon-braid", "--group", "S3", "--charge", "2dim", "--flux", "(123)"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    let checks = r["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 1);
    assert!((checks[0]["measured"].as_f64().unwrap() - 0.25).abs() < 1e-10);
}

#[test]
fn flux_flux_braid_s3() {
    let out = topopeps(&["check", "anyon-braid", "--group", "S3", "--flux", "(12)", "--flux", "(13)"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(check(&r, "tensor chain")["measured"], "(2 3)");
}

#[test]
fn group_info_counts() {
    let r = json(&topopeps(&["group-info", "--group", "S3"]));
    assert_eq!(r["class_count"], 3);
    assert_eq!(r["pair_class_count"], 8);
    let r = json(&topopeps(&["group-info", "--group", "Z2"]));
    assert_eq!(r["class_count"], 2);
    assert_eq!(r["pair_class_count"], 4);
}

#[test]
fn inline_group_spec() {
    let spec = r#"{"name": "c3", "table": [[0,1,2],[1,2,0],[2,0,1]]}"#;
    let out = topopeps(&["group-info", "--group", spec]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["pair_class_count"], 9);
}

#[test]
fn input_errors_exit_2() {
    assert_eq!(topopeps(&["group-info", "--group", "Z99"]).status.code(), Some(2));
    assert_eq!(topopeps(&["check", "nope"]).status.code(), Some(2));
    assert_eq!(topopeps(&["export", "tensor", "--model", ""]).status.code(), Some(2));
    assert_eq!(topopeps(&["check", "entropy", "--region", "1"]).status.code(), Some(2));
}

#[test]
fn cap_exceeded_exits_3() {
    let out = topopeps(&["check", "gs-degeneracy-1d", "--group", "Z3", "--L", "12", "--max-state-dim", "1000"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("resource cap"));
}

#[test]
fn failed_check_exits_1() {
    // a zero tolerance cannot absorb the rounding in the entropy correction
    let out = topopeps(&["check", "entropy", "--group", "Z2", "--L", "3", "--tol", "0"]);
    let r = json(&out);
    assert_eq!(r["pass"], false);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn export_tensor_round_trip() {
    let dir = std::env::temp_dir().join(format!("topopeps-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("k.json");
    let out = topopeps(&["export", "tensor", "--group", "Z2", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&path).unwrap();
    let doc: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(doc["dims"], serde_json::json!([8, 2, 2, 2, 2]));
    let loaded = PepsTensor::from_json(&text).unwrap();
    let k = double_model_tensor(&FiniteGroup::builtin("Z2").unwrap()).unwrap();
    assert_eq!(loaded.data, k.data);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn export_spectrum_csv() {
    let out = topopeps(&["export", "spectrum", "--group", "Z2", "--L", "3", "--region", "1,1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let values: Vec<f64> = text
        .lines()
        .filter_map(|l| l.rsplit(',').next().and_then(|x| x.trim().parse().ok()))
        .collect();
    let nonzero: Vec<f64> = values.into_iter().filter(|&x| x > 1e-12).collect();
    assert_eq!(nonzero.len(), 8);
    assert!(nonzero.iter().all(|&x| (x - 0.125).abs() < 1e-12));
}

#[test]
fn thread_cap_is_validated() {
    let out = Command::new(env!("CARGO_BIN_EXE_topopeps"))
        .args(["group-info"])
        .env("TOPOPEPS_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_topopeps"))
        .args(["group-info"])
        .env("TOPOPEPS_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
}
