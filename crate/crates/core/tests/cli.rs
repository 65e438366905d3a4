mod common;

use std::fs;
use std::process::{Command, Output};

fn symred(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_symred"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn reduce_prints_name_ambient_dimension_and_reduced_dimension() {
    let path = common::fixture("qaplib/esc16f.dat");
    let o = symred(&["reduce", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().next().unwrap(), "esc16f 32896 3");
}

#[test]
fn solve_er3_reports_theta() {
    let o = symred(&["solve", "--er", "3"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("objective 5.000"), "{}", stdout(&o));
}

#[test]
fn blockdiag_er5_reports_structure() {
    let o = symred(&["blockdiag", "--er", "5"]);
    assert!(o.status.success());
    assert!(stdout(&o).lines().any(|l| l == "3×1, 2×3"), "{}", stdout(&o));
}

#[test]
fn json_output_is_deterministic_given_seed() {
    let a = symred(&["--json", "--seed", "11", "blockdiag", "--er", "3"]);
    let b = symred(&["--json", "--seed", "11", "blockdiag", "--er", "3"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["decomposition"]["structure"], "3×1, 2×2");
}

#[test]
fn files_chain_through_the_stages() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("c5.col");
    fs::write(&graph, "c five-cycle\np edge 5 5\ne 1 2\ne 2 3\ne 3 4\ne 4 5\ne 5 1\n").unwrap();
    let problem = dir.path().join("c5.json");
    let part = dir.path().join("c5.part.json");
    let sdpa = dir.path().join("c5.dat-s");
    let s = |p: &std::path::Path| p.to_str().unwrap().to_string();

    assert!(symred(&["theta-prime", &s(&graph), "-o", &s(&problem)]).status.success());
    let o = symred(&["reduce", &s(&problem), "-o", &s(&part)]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().next().unwrap(), "c5 15 3");
    let o = symred(&["blockdiag", &s(&problem), "--partition", &s(&part)]);
    assert!(o.status.success());
    let o = symred(&["solve", &s(&graph), "--export-sdpa", &s(&sdpa)]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("objective 2.236068"), "{}", stdout(&o));
    assert!(fs::read_to_string(&sdpa).unwrap().starts_with('*'));
}

#[test]
fn exit_codes_name_the_failing_stage() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("none.json");
    assert_eq!(symred(&["reduce", missing.to_str().unwrap()]).status.code(), Some(2));

    let garbage = dir.path().join("bad.dat");
    fs::write(&garbage, "3\n1 2\n").unwrap();
    assert_eq!(symred(&["reduce", garbage.to_str().unwrap()]).status.code(), Some(2));

    // a single part is not admissible for ϑ′ of C5
    let part = dir.path().join("one.json");
    fs::write(&part, format!(r#"{{"n":5,"n_parts":1,"labels":{:?}}}"#, vec![1; 25])).unwrap();
    let graph = dir.path().join("c5.col");
    fs::write(&graph, "p edge 5 5\ne 1 2\ne 2 3\ne 3 4\ne 4 5\ne 5 1\n").unwrap();
    let o = symred(&["blockdiag", graph.to_str().unwrap(), "--partition", part.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));

    let cache = dir.path().join("cache");
    let o = symred(&["fetch", "esc16a", "--offline", "--cache-dir", cache.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(6));
    let o = symred(&["fetch", "not-an-instance", "--offline", "--cache-dir", cache.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(6));
}
