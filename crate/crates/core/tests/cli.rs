use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

const BIN: &str = env!("CARGO_BIN_EXE_schiffer-lab");

fn lab(args: &[&str], out: &Path, seed: Option<&str>) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).arg("--out").arg(out).env_remove("SCHIFFER_LAB_SEED");
    if let Some(s) = seed {
        cmd.env("SCHIFFER_LAB_SEED", s);
    }
    cmd.output().unwrap()
}

fn manifest(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn unknown_key_exits_2_without_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    fs::write(&config, r#"{"foo": 1}"#).unwrap();
    let out = dir.path().join("out");
    let o = lab(&["monotonicity", "--config", config.to_str().unwrap()], &out, None);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
    let o = lab(&["solve", "--bc", "robin"], &out, None);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn monotonicity_writes_manifest_with_digests() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mono");
    let o = lab(&["monotonicity"], &out, None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    assert_eq!(m["experiment"], "monotonicity");
    assert_eq!(m["passed"], true);
    assert!(m["wall_time_seconds"].as_f64().unwrap() >= 0.0);
    let files = m["files"].as_array().unwrap();
    assert_eq!(files.len(), 1);
    for f in files {
        let bytes = fs::read(out.join(f["name"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&bytes)));
    }
    let csv = fs::read_to_string(out.join("monotonicity.csv")).unwrap();
    let mut reader = csv::Reader::from_reader(csv.as_bytes());
    let lambdas: Vec<f64> = reader.records().map(|r| r.unwrap()[1].parse().unwrap()).collect();
    assert_eq!(lambdas.len(), 4);
    assert!(lambdas.windows(2).all(|p| p[1] < p[0]));
}

#[test]
fn seeded_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["fd-check", "--set", "random_alpha=2", "--set", "h=0.1"];
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    assert_eq!(lab(&args, &a, Some("11")).status.code(), Some(0));
    assert_eq!(lab(&args, &b, Some("11")).status.code(), Some(0));
    assert_eq!(lab(&args, &c, Some("12")).status.code(), Some(0));
    let read = |d: &Path| fs::read(d.join("fd_check.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
    assert_eq!(manifest(&a)["seed"], 11);
}

#[test]
fn failed_assertion_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let curve = r#"curve={"kind":"ellipse","a":1.3,"b":0.7692307692307692}"#;
    let o = lab(&["schiffer-check", "--set", curve, "--set", "max_neumann=0.02"], &out, None);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(manifest(&out)["passed"], false);
}

#[test]
fn numerical_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(&["solve", "--h", "5.0"], &dir.path().join("s"), None);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn flow_history_has_one_line_per_iterate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f");
    let o = lab(&["flow", "--max-iter", "3", "--tol", "1e-9", "--set", "h=0.1"], &out, None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("flow.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "iter,J,grad_norm,disk_defect,step");
    assert_eq!(lines.len(), 5);
    let curve = fs::read_to_string(out.join("final_curve.json")).unwrap();
    let c = schiffer_lab::curve::FourierCurve::from_json_str(&curve).unwrap();
    assert!((c.area() - std::f64::consts::PI).abs() < 1e-8);
}

#[test]
fn curve_files_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("curve.json");
    fs::write(&path, schiffer_lab::curve::FourierCurve::kidney().to_json_string()).unwrap();
    let out = dir.path().join("sym");
    let o = lab(&["symmetry-check", "--set", &format!("curve={:?}", path.to_str().unwrap())], &out, None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("symmetry.csv")).unwrap();
    assert_eq!(csv.lines().count(), 17);
    assert!(csv.lines().nth(1).unwrap().contains(",false,"));
}
