use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ntupled"))
}

fn instance(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("instances").join(name)
}

fn run(args: &[&str]) -> (i32, Value, Output) {
    let out = bin().args(["--format", "json"]).args(args).output().unwrap();
    let json = serde_json::from_slice(&out.stdout).unwrap_or(Value::Null);
    (out.status.code().unwrap(), json, out)
}

#[test]
fn classify_forward_cyclic_three() {
    let out = bin().args(["classify", "--preset", "forward-cyclic", "-n", "3", "--partition", "odd-even"]).output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(text.contains("NOT in U_ι3"), "{text}");
    assert_eq!(text.matches("witness:").count(), 3);
}

#[test]
fn classify_karapinar_luong() {
    let out = bin().args(["classify", "--preset", "karapinar-luong", "-n", "4"]).output().unwrap();
    assert!(String::from_utf8(out.stdout).unwrap().contains("in U_ι4; permuted"));
}

#[test]
fn classify_malformed_matrix() {
    let (code, json, _) = run(&["classify", "--matrix", "1 2 3; 2 3; 3 1 2"]);
    assert_eq!(code, 2);
    assert!(json["error"]["message"].as_str().unwrap().contains("row 2"));
}

#[test]
fn solve_coupled_demo() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.jsonl");
    let (code, json, _) = run(&["solve", instance("coupled_demo.json").to_str().unwrap(), "--trace", trace.to_str().unwrap()]);
    assert_eq!(code, 0, "{json}");
    for x in json["tuple"].as_array().unwrap() {
        assert!(x.as_f64().unwrap().abs() <= 1e-10);
    }
    let lines: Vec<Value> = std::fs::read_to_string(&trace)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines[0]["m"], 0);
    assert_eq!(lines[0]["tuple"], serde_json::json!([-1.0, 1.0]));
    for key in ["delta_residual", "nabla_residual"] {
        assert!(lines[0].get(key).is_some());
    }
}

#[test]
fn solve_corollary_43_instance_hits_gate() {
    let (code, json, _) = run(&["solve", instance("cor43_counterexample.json").to_str().unwrap()]);
    assert_eq!(code, 3);
    assert_eq!(json["error"]["gate"], "not-in-u");
}

#[test]
fn solve_missing_file() {
    let (code, json, _) = run(&["solve", "/no/such/instance.json"]);
    assert_eq!(code, 6);
    assert_eq!(json["error"]["kind"], "io");
}

#[test]
fn solve_non_convergence() {
    let (code, json, _) = run(&["solve", instance("coupled_demo.json").to_str().unwrap(), "--max-iters", "5"]);
    assert_eq!(code, 4);
    assert_eq!(json["status"], "max-iters");
}

#[test]
fn verify_finite_t1() {
    let (code, json, _) = run(&["verify", instance("finite_t1.json").to_str().unwrap(), "--theorem", "T1"]);
    assert_eq!(code, 0, "{json}");
    assert_eq!(json["verified"], true);
    assert!(json["witness"].is_array());
}

#[test]
fn verify_antichain_t2_refuses() {
    let (code, json, _) = run(&["verify", instance("finite_t1_antichain.json").to_str().unwrap(), "--theorem", "T2"]);
    assert_eq!(code, 5);
    let failed: Vec<&str> = json["error"]["failed"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(failed.contains(&"directedness"), "{failed:?}");
}

#[test]
fn verify_real_instance_refuses() {
    let (code, json, _) = run(&["verify", instance("coupled_demo.json").to_str().unwrap()]);
    assert_eq!(code, 5);
    assert!(json["error"]["message"].as_str().unwrap().contains("finite space"));
}

#[test]
fn lemmas_degenerate_bound() {
    let (code, json, _) = run(&["lemmas", "--max-size", "1", "--trials", "5", "--samples", "50"]);
    assert_eq!(code, 0);
    assert!(json["warnings"][0].as_str().unwrap().contains("degenerate bound"));
}

#[test]
fn lemmas_report_file_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<PathBuf> = (0..2).map(|k| dir.path().join(format!("r{k}.json"))).collect();
    for p in &paths {
        let out = bin()
            .args(["lemmas", "--trials", "10", "--samples", "300", "--seed", "5", "--report", p.to_str().unwrap()])
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
    }
    assert_eq!(std::fs::read(&paths[0]).unwrap(), std::fs::read(&paths[1]).unwrap());
}

#[test]
fn both_format_emits_text_and_json() {
    let out = bin().args(["--format", "both", "classify", "--matrix", "1 2;2 1"]).output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    let brace = text.find("\n{").unwrap() + 1;
    assert!(text[..brace].contains("in U_ι2"));
    let json: Value = serde_json::from_str(&text[brace..]).unwrap();
    assert_eq!(json["command"], "classify");
}
