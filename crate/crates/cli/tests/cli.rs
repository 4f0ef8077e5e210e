use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_matchwelfare"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Rows after the `#` preamble and the header.
fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn body(text: &str) -> String {
    text.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n")
}

#[test]
fn generate_ordered_profile() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("l5.json");
    let o = run(&["generate", "--family", "lemma5", "--n", "16", "--out", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = read_json(&path);
    assert_eq!(v["n"], 16);
    assert_eq!(v["normalization"], "unit-range");
    assert_eq!(v["values"].as_array().unwrap().len(), 16);
    assert!(v["values"].as_array().unwrap().iter().all(|r| r.as_array().unwrap().len() == 16));
    assert_eq!(v["format"], "matchwelfare/1");
    assert_eq!(v["config"]["family"], "lemma5");
    // the artifact is itself a readable profile
    assert_eq!(matchwelfare::io::read_profile(&path).unwrap().n(), 16);
}

#[test]
fn generate_three_agent_worst_case() {
    let o = run(&["generate", "--family", "n3worst", "--eps", "0.01"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let rows: Vec<Vec<f64>> = serde_json::from_value(v["values"].clone()).unwrap();
    assert_eq!(rows, vec![vec![1.0, 0.99, 0.0], vec![1.0, 0.01, 0.0], vec![1.0, 0.01, 0.0]]);
}

#[test]
fn generate_rejects_non_square() {
    let o = run(&["generate", "--family", "lemma8", "--n", "10"]);
    assert_ne!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("n must be a perfect square"));
}

#[test]
fn eval_ratio_and_guards() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path().join("w.json");
    assert!(run(&["generate", "--family", "n3worst", "--eps", "0.01", "--out", w.to_str().unwrap()]).status.success());
    let o = run(&["eval", "--profile", w.to_str().unwrap(), "--mech", "rp", "--mode", "exact"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["ratio"]["ratio"].as_f64().unwrap() - 0.67169).abs() < 1e-5);
    assert_eq!(v["ratio"]["provenance"]["kind"], "exact");

    let o = run(&["eval", "--profile", w.to_str().unwrap(), "--mech", "rp", "--mode", "mc", "--samples", "20000", "--seed", "4"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["result"]["method"]["samples"], 20000);
    assert_eq!(v["result"]["method"]["seed"], 4);

    let l5 = dir.path().join("l5.json");
    assert!(run(&["generate", "--family", "lemma5", "--n", "100", "--out", l5.to_str().unwrap()]).status.success());
    let o = run(&["eval", "--profile", l5.to_str().unwrap(), "--mech", "uniform"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["result"]["expected_welfare"].as_f64().unwrap() <= 5.0);

    let l4 = dir.path().join("l4.json");
    assert!(run(&["generate", "--family", "lemma5", "--n", "4", "--out", l4.to_str().unwrap()]).status.success());
    let o = run(&["eval", "--profile", l4.to_str().unwrap(), "--mech", "hm"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("hybrid requires n=3"));
}

#[test]
fn eval_reports_invalid_profile() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"n": 2, "normalization": "unit-range", "values": [[1.0, 0.2], [0.0, 1.0]]}"#).unwrap();
    let o = run(&["eval", "--profile", bad.to_str().unwrap(), "--mech", "rp"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bounds_suites() {
    let o = run(&["bounds", "--suite", "lemma5", "--sizes", "16,100,400"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.lines().any(|l| l == "name,n,lhs,rhs,holds"));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r[4] == "true"));

    let rows = csv_rows(&stdout(&run(&["bounds", "--suite", "lemma7floor", "--sizes", "2..7"])));
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r[4] == "true"));

    let empty = stdout(&run(&["bounds", "--suite", "lemma9", "--sizes", ""]));
    assert_eq!(body(&empty), "name,n,lhs,rhs,holds");

    assert_ne!(run(&["bounds", "--suite", "lemma3", "--sizes", "4"]).status.code(), Some(0));
}

#[test]
fn replay_reproduces_csv_body() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a.csv");
    let second = dir.path().join("b.csv");
    let o = run(&["bounds", "--suite", "corollary1", "--sizes", "3,4", "--seed", "11", "--out", first.to_str().unwrap()]);
    assert!(o.status.success());
    let o = run(&["replay", first.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (a, b) = (std::fs::read_to_string(&first).unwrap(), std::fs::read_to_string(&second).unwrap());
    assert_eq!(body(&a), body(&b));
    assert!(!body(&a).is_empty());
}

#[test]
fn thread_count_does_not_change_results() {
    let args = ["bounds", "--suite", "lemma8", "--sizes", "25", "--samples", "50000", "--seed", "3"];
    let one = bin().args(args).env("MATCHWELFARE_THREADS", "1").output().unwrap();
    let two = bin().args(args).env("MATCHWELFARE_THREADS", "2").output().unwrap();
    assert!(one.status.success());
    assert_eq!(stdout(&one), stdout(&two));
    let bad = bin().args(args).env("MATCHWELFARE_THREADS", "zero").output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn n3_writes_summary_and_surfaces() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rp");
    let o = run(&["n3", "--mech", "rp", "--grid", "0.1", "--refine", "10", "--out-dir", out.to_str().unwrap(), "--surface-grid", "0.25"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = read_json(&out.join("summary.json"));
    assert!((v["study"]["global_min"].as_f64().unwrap() - 2.0 / 3.0).abs() < 0.002);
    let classes = v["study"]["classes"].as_array().unwrap();
    let surfaces: Vec<_> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    assert_eq!(surfaces.len(), classes.len());
    let text = std::fs::read_to_string(&surfaces[0]).unwrap();
    assert!(text.lines().any(|l| l == "alpha1,alpha2,alpha3,ratio"));
    assert_eq!(csv_rows(&text).len(), 64);

    let replayed = dir.path().join("again");
    assert!(run(&["replay", out.join("summary.json").to_str().unwrap(), "--out", replayed.to_str().unwrap()]).status.success());
    let name = surfaces[0].file_name().unwrap();
    assert_eq!(body(&text), body(&std::fs::read_to_string(replayed.join(name)).unwrap()));
}

#[test]
fn n3_uniform_is_bounded_by_the_ordinal_worst_case() {
    let o = run(&["n3", "--mech", "uniform", "--grid", "0.1", "--refine", "10"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["study"]["global_min"].as_f64().unwrap() <= 2.0 / 3.0 + 0.002);
}
