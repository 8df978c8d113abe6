use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command as Process;

use clap::Parser;
use tempfile::TempDir;

use vector_equilibrium::cli::{
    parse_config, read_solution, run, Cli, RunReport, EXIT_CERTIFIED, EXIT_INPUT, EXIT_NOT_CERTIFIED, EXIT_NO_GUARANTEE,
};
use vector_equilibrium::equilibrium::certify;

const SCALAR: &str = r#"{"name": "interval", "sets": [[[-1, 1]]], "C": [[1]], "K": {"fixed": [1]}, "nodes": 200}"#;
const TOUCHING: &str = r#"{"sets": [[[-0.5, 0]], [[0, 0.5]]], "C": [[1, -1], [-1, 1]], "K": {"fixed": [1, 1]}, "nodes": 100}"#;
const CHAIN: &str = r#"{"name": "nikishin",
    "sets": [[[-1, 1]], [[-0.5, 0.5]]],
    "graph": {"chain": 2},
    "K": {"fixed": [1, 1]},
    "nodes": [300, 200]}"#;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn invoke(args: &[&str]) -> Run {
    let cli = Cli::try_parse_from(std::iter::once("vequil").chain(args.iter().copied())).unwrap();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(&cli, &mut out, &mut err);
    Run {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn scalar_solve_is_certified() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), "scalar.json", SCALAR);
    let out = tmp.path().join("out");
    let r = invoke(&["solve", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(r.code, EXIT_CERTIFIED, "{}{}", r.stdout, r.stderr);
    for f in ["assumptions.json", "solution.csv", "potentials.csv", "report.json", "run.log"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let rep: RunReport = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!((rep.objective - 2f64.ln()).abs() < 1e-2);
    assert!((rep.energy_recomputed - rep.objective).abs() < 1e-10);
    assert_eq!(rep.verdict, "certified");
}

#[test]
fn nikishin_chain_from_a_graph() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), "chain.json", CHAIN);
    let r = invoke(&["check", "--config", s(&cfg)]);
    assert_eq!(r.code, EXIT_CERTIFIED, "{}", r.stdout);
    let out = tmp.path().join("out");
    let r = invoke(&["solve", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(r.code, EXIT_CERTIFIED, "{}", r.stdout);
}

#[test]
fn touching_plates_have_no_guarantee() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), "touch.json", TOUCHING);
    let r = invoke(&["check", "--config", s(&cfg)]);
    assert_eq!(r.code, EXIT_NO_GUARANTEE);
    assert!(r.stdout.contains("H2"), "{}", r.stdout);

    let out = tmp.path().join("refused");
    let r = invoke(&["solve", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(r.code, EXIT_NO_GUARANTEE);
    assert!(out.join("assumptions.json").is_file());
    assert!(!out.join("solution.csv").exists());

    let out = tmp.path().join("forced");
    let r = invoke(&["solve", "--config", s(&cfg), "--out", s(&out), "--force"]);
    assert_eq!(r.code, EXIT_NO_GUARANTEE);
    let rep: RunReport = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!(rep.forced);
    assert_eq!(rep.verdict, "not certified");
}

#[test]
fn tight_tolerance_is_not_certified() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), "scalar.json", SCALAR);
    let out = tmp.path().join("out");
    let r = invoke(&["solve", "--config", s(&cfg), "--out", s(&out), "--eq-tol", "1e-9"]);
    assert_eq!(r.code, EXIT_NOT_CERTIFIED);
}

#[test]
fn input_errors() {
    let tmp = TempDir::new().unwrap();
    let r = invoke(&["check", "--config", s(&tmp.path().join("missing.json"))]);
    assert_eq!(r.code, EXIT_INPUT);
    assert!(r.stderr.starts_with("error:"));

    let cfg = config(tmp.path(), "bad.json", r#"{"sets": [[[0, 1]]], "C": [[1]], "K": "simplex", "colour": 1}"#);
    let r = invoke(&["check", "--config", s(&cfg)]);
    assert_eq!(r.code, EXIT_INPUT);
    assert!(r.stderr.contains("colour"), "{}", r.stderr);

    let cfg = config(tmp.path(), "scalar.json", SCALAR);
    let r = invoke(&["check", "--config", s(&cfg), "--nodes", "100,100"]);
    assert_eq!(r.code, EXIT_INPUT);
    let r = invoke(&["solve", "--config", s(&cfg)]);
    assert_eq!(r.code, EXIT_INPUT);
    assert!(Cli::try_parse_from(["vequil", "solve"]).is_err());
}

#[test]
fn existing_output_needs_overwrite() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), "scalar.json", SCALAR);
    let out = tmp.path().join("out");
    assert_eq!(invoke(&["solve", "--config", s(&cfg), "--out", s(&out)]).code, EXIT_CERTIFIED);
    let r = invoke(&["solve", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(r.code, EXIT_INPUT);
    assert!(!r.stderr.is_empty());
    let r = invoke(&["solve", "--config", s(&cfg), "--out", s(&out), "--overwrite"]);
    assert_eq!(r.code, EXIT_CERTIFIED);
}

#[test]
fn runs_are_reproducible_and_round_trip() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), "chain.json", CHAIN);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let r = invoke(&["solve", "--config", s(&cfg), "--out", s(out), "--seed", "3"]);
        assert_eq!(r.code, EXIT_CERTIFIED);
    }
    let csv = fs::read(a.join("solution.csv")).unwrap();
    assert_eq!(csv, fs::read(b.join("solution.csv")).unwrap());

    let parsed = parse_config(&cfg).unwrap();
    let m = read_solution(std::str::from_utf8(&csv).unwrap(), &parsed.problem).unwrap();
    let again = certify(&m, &parsed.problem, &parsed.verify).unwrap();
    let rep: RunReport = serde_json::from_str(&fs::read_to_string(a.join("report.json")).unwrap()).unwrap();
    assert_eq!(again.pass, rep.verdict == "certified");
    let original = &rep.equilibrium;
    let tol = 1e-12;
    for key in ["lower_violation", "upper_violation"] {
        let v = original[key].as_f64().unwrap();
        let w = serde_json::to_value(&again).unwrap()[key].as_f64().unwrap();
        assert!((v - w).abs() <= tol * (1.0 + v.abs()), "{key}: {v} vs {w}");
    }
}

#[test]
fn oracle_values() {
    let r = invoke(&["oracle", "condenser", "--n", "4"]);
    assert_eq!(r.code, EXIT_CERTIFIED);
    let v: f64 = r.stdout.trim().parse().unwrap();
    assert!((v - 4.9116).abs() < 1e-4);
    let r = invoke(&["oracle", "interval", "--a", "-4", "--b", "4"]);
    assert!((r.stdout.trim().parse::<f64>().unwrap() + 2f64.ln()).abs() < 1e-15);
    assert_eq!(invoke(&["oracle", "condenser", "--n", "1"]).code, EXIT_INPUT);
}

#[test]
fn binary_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), "touch.json", TOUCHING);
    let status = Process::new(env!("CARGO_BIN_EXE_vequil"))
        .args(["check", "--config", s(&cfg)])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(EXIT_NO_GUARANTEE));
    let status = Process::new(env!("CARGO_BIN_EXE_vequil"))
        .args(["oracle", "elliptic", "--k", "0.5"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(EXIT_CERTIFIED));
    assert!(String::from_utf8_lossy(&status.stdout).starts_with("K = 1.6857"));
}

#[test]
fn sample_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            parse_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 3);
}
