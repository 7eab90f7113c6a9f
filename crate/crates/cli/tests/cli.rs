use std::path::Path;
use std::process::{Command, Output};

fn wsqaoa(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wsqaoa"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(wsqaoa(dir.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(wsqaoa(dir.path(), &["instance", "gen"]).status.code(), Some(2));
    let out = wsqaoa(dir.path(), &["instance", "gen", "--n", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn missing_input_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(wsqaoa(dir.path(), &["instance", "show", "absent.json"]).status.code(), Some(1));
}

#[test]
fn malformed_instance_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), "{\"n\": 2}").unwrap();
    assert_eq!(wsqaoa(dir.path(), &["instance", "show", "bad.json"]).status.code(), Some(2));
}

#[test]
fn generated_instance_can_be_shown_and_ranked() {
    let dir = tempfile::tempdir().unwrap();
    stdout(&wsqaoa(dir.path(), &["instance", "gen", "--n", "4", "--seed", "7", "--out", "i.json"]));
    let text = std::fs::read_to_string(dir.path().join("i.json")).unwrap();
    let golden = include_str!("../../core/tests/fixtures/golden_n4_seed7.json");
    let a: serde_json::Value = serde_json::from_str(&text).unwrap();
    let b: serde_json::Value = serde_json::from_str(golden).unwrap();
    assert_eq!(a, b);

    let show = stdout(&wsqaoa(dir.path(), &["instance", "show", "i.json"]));
    assert!(show.contains("n = 4, B = 2"));
    let rank = stdout(&wsqaoa(dir.path(), &["rank", "i.json"]));
    let lines: Vec<&str> = rank.lines().collect();
    assert_eq!(lines[0], "rank,bitstring,weight,objective,cost");
    assert_eq!(lines.len(), 17);
    // Six weight-2 strings rank ahead of the rest.
    assert!(lines[1..7].iter().all(|l| l.split(',').nth(2) == Some("2")));
}

#[test]
fn optimize_appends_jsonl_records() {
    let dir = tempfile::tempdir().unwrap();
    stdout(&wsqaoa(dir.path(), &["instance", "gen", "--n", "3", "--seed", "1", "--out", "i.json"]));
    for optimizer in ["nelder-mead", "adam"] {
        stdout(&wsqaoa(
            dir.path(),
            &["optimize", "i.json", "--optimizer", optimizer, "--budget", "40", "--out", "runs.jsonl"],
        ));
    }
    let text = std::fs::read_to_string(dir.path().join("runs.jsonl")).unwrap();
    let records = wsqaoa::harness::read_jsonl(&text).unwrap();
    assert_eq!(records.len(), 2);
    assert!(records.iter().all(|r| r.evals_used <= 40));
    assert_eq!(records[1].run.optimizer.name(), "adam");

    let report = stdout(&wsqaoa(dir.path(), &["depth-report", "runs.jsonl"]));
    assert!(report.starts_with("n,scheme,p,W,eta,crossing"));
    assert_eq!(report.lines().count(), 2);
}

#[test]
fn shot_backend_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    stdout(&wsqaoa(dir.path(), &["instance", "gen", "--n", "3", "--seed", "2", "--out", "i.json"]));
    let args = [
        "optimize", "i.json", "--backend", "shots", "--shots", "128", "--budget", "30", "--seed", "5", "--out",
        "r.jsonl",
    ];
    stdout(&wsqaoa(dir.path(), &args));
    stdout(&wsqaoa(dir.path(), &args));
    let text = std::fs::read_to_string(dir.path().join("r.jsonl")).unwrap();
    let records = wsqaoa::harness::read_jsonl(&text).unwrap();
    assert_eq!(records[0].best_params, records[1].best_params);
    assert_eq!(records[0].best_value, records[1].best_value);
}

#[test]
fn sweep_then_fit() {
    let dir = tempfile::tempdir().unwrap();
    let summary = stdout(&wsqaoa(
        dir.path(),
        &["sweep-bn", "--n", "4", "--instances", "3", "--out", "s.jsonl", "--csv", "s.csv"],
    ));
    assert_eq!(summary.lines().count(), 4);
    let records = wsqaoa::harness::read_jsonl(&std::fs::read_to_string(dir.path().join("s.jsonl")).unwrap()).unwrap();
    assert_eq!(records.len(), 9);
    assert!(std::fs::read_to_string(dir.path().join("s.csv")).unwrap().lines().count() > 1);

    let fit = stdout(&wsqaoa(dir.path(), &["fit-trend", "s.jsonl", "--n", "4"]));
    assert!(fit.contains("\"a\""), "{fit}");
    let singular = wsqaoa(dir.path(), &["fit-trend", "s.jsonl", "--n", "9"]);
    assert_eq!(singular.status.code(), Some(2));
}
