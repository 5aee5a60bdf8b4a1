use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use metalab::cli::{exit, run};

fn model(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("models")
        .join(format!("{name}.json"))
        .display()
        .to_string()
}

fn call(args: &[&str]) -> (i32, String) {
    let args: Vec<String> = args.iter().map(|s| s.to_string()).collect();
    let mut out = Vec::new();
    let code = run(&args, &mut out);
    (code, String::from_utf8(out).unwrap())
}

fn bin(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_metalab")).args(args).output().unwrap()
}

fn s(p: &Path) -> String {
    p.display().to_string()
}

#[test]
fn gamma_of_model_a() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out) = call(&["gamma", "--model", &model("model_a"), "--out", &s(dir.path())]);
    assert_eq!(code, exit::OK);
    assert!(out.contains("gamma = 1.0,"), "{out}");
    assert!(out.contains("Attracting"), "{out}");
    for f in ["summary.json", "lambda_0.csv", "manifest.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let m = metalab::io::Manifest::read(&dir.path().join("manifest.json")).unwrap();
    assert_eq!(m.command, "gamma");
    assert_eq!(m.version, metalab::io::VERSION);
}

#[test]
fn chain_two_states() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out) = call(&[
        "chain", "--gammas", "2,1", "--q", "0 1;1 0", "--p0", "0.4,0.6", "--l", "1", "--out", &s(dir.path()),
    ]);
    assert_eq!(code, exit::OK);
    assert_eq!(out.lines().next(), Some("(1.0)"));
    let csv = fs::read_to_string(dir.path().join("chain.csv")).unwrap();
    assert_eq!(csv, "state,p,simulated,std_error\n1,1.0,,\n");
}

#[test]
fn exit_prob_rejects_zeta_outside_interval() {
    let o = bin(&["exit-prob", "--model", &model("model_a"), "--zeta", "0.5", "--kappa1", "0.1", "--kappa2", "0.4"]);
    assert_eq!(o.status.code(), Some(exit::USAGE));
}

#[test]
fn usage_and_help_codes() {
    assert_eq!(bin(&["frobnicate"]).status.code(), Some(exit::USAGE));
    assert_eq!(bin(&["gamma"]).status.code(), Some(exit::USAGE));
    assert_eq!(bin(&["--help"]).status.code(), Some(exit::OK));
}

#[test]
fn malformed_model_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, "{\"dimension\": 2, \"surfaces\": [").unwrap();
    let o = bin(&["check", "--model", &s(&path)]);
    assert_eq!(o.status.code(), Some(exit::USAGE));
    assert!(String::from_utf8_lossy(&o.stderr).contains("schema error"));
}

#[test]
fn non_invariant_field_warns_and_fails_check() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(model("model_a")).unwrap();
    let mut spec: serde_json::Value = serde_json::from_str(&text).unwrap();
    spec["fields"]["v"][1] = serde_json::json!({"type": "explicit", "components": ["x0 + 0.1", "x1"]});
    let path = dir.path().join("shifted.json");
    fs::write(&path, spec.to_string()).unwrap();
    let o = bin(&["gamma", "--model", &s(&path), "--out", &s(&dir.path().join("g"))]);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("warning: assumption (a)"), "{err}");
    assert_eq!(o.status.code(), Some(exit::ASSUMPTION));
    let o = bin(&["check", "--model", &s(&path), "--out", &s(&dir.path().join("c"))]);
    assert_eq!(o.status.code(), Some(exit::ASSUMPTION));
}

#[test]
fn stationary_tables() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = call(&["stationary", "--model", &model("model_b"), "--surface", "1", "--out", &s(dir.path())]);
    assert_eq!(code, exit::OK);
    let co = fs::read_to_string(dir.path().join("coefficients.csv")).unwrap();
    assert!(co.starts_with("y0,y1,alpha,beta,a00,a01,a11,b0,b1,c0,c1\n"));
    assert_eq!(co.lines().count(), 1 + 64);
    let st = fs::read_to_string(dir.path().join("stationary.csv")).unwrap();
    let total: f64 = st
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(3).unwrap().parse::<f64>().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-12);
}

fn exit_prob_run(out: &Path, workers: &str) -> i32 {
    call(&[
        "exit-prob", "--model", &model("model_a"), "--zeta", "0.2", "--kappa1", "0.1", "--kappa2", "0.4",
        "--n-traj", "64", "--seed", "5", "--workers", workers, "--out", &s(out),
    ])
    .0
}

#[test]
fn outputs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, r) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("r"));
    assert_eq!(exit_prob_run(&a, "1"), exit::OK);
    assert_eq!(exit_prob_run(&b, "3"), exit::OK);
    let events = |p: &Path| fs::read(p.join("events.csv")).unwrap();
    assert_eq!(events(&a), events(&b));
    let (code, _) = call(&["replay", "--manifest", &s(&a.join("manifest.json")), "--out", &s(&r)]);
    assert_eq!(code, exit::OK);
    assert_eq!(events(&a), events(&r));
    assert_eq!(fs::read(a.join("summary.json")).unwrap(), fs::read(r.join("summary.json")).unwrap());
}

#[test]
fn cauchy_with_constant_initial_condition() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out) = call(&[
        "cauchy", "--model", &model("model_a"), "--x", "0.3,-0.2", "--t", "0.5", "--g", "1",
        "--eps", "0.1", "--n-traj", "20", "--out", &s(dir.path()),
    ]);
    assert_eq!(code, exit::OK);
    assert!(out.starts_with("u(t, x) = 1.0 +- 0.0"), "{out}");
}
