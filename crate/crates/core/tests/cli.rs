//! End-to-end runs of the `qcap` binary on a tiny device.

use std::path::Path;
use std::process::{Command, Output};

fn qcap(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qcap"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("qcap runs")
}

fn ok_json(dir: &Path, args: &[&str]) -> serde_json::Value {
    let out = qcap(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("JSON summary")
}

#[test]
fn pipeline_runs_from_model_to_evaluation() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok_json(d, &["gen-model", "--graph", "line:3", "--seed", "1", "--out", "model.json"]);
    let s = ok_json(d, &["gen-circuits", "--graph", "line:3", "--count", "80", "--max-depth", "12", "--seed", "2", "--out", "c.jsonl"]);
    assert_eq!(s["count"], 80);
    ok_json(d, &["simulate", "--model", "model.json", "--circuits", "c.jsonl", "--seed", "3", "--out", "v.jsonl"]);
    let s = ok_json(d, &[
        "encode", "--circuits", "c.jsonl", "--values", "v.jsonl", "--graph", "line:3", "--threshold", "0.0", "--seed", "4", "--out", "ds",
    ]);
    assert_eq!(s["tracked_errors"], 72);
    let s = ok_json(d, &["train", "--data", "ds", "--widths", "6,1", "--max-epochs", "2", "--seed", "5", "--out", "cp.json"]);
    assert_eq!(s["epochs_run"], 2);
    let s = ok_json(d, &["predict", "--checkpoint", "cp.json", "--data", "ds/test.jsonl", "--seed", "6", "--out", "p.csv"]);
    let n = s["records"].as_u64().unwrap();
    let report = ok_json(d, &[
        "evaluate", "--pred", "p.csv", "--truth", "ds/test.jsonl", "--scatter", "s.svg", "--out", "r.json", "--seed", "7",
    ]);
    assert_eq!(report["records"].as_u64(), Some(n));
    assert!(report["mae"].as_f64().unwrap() >= 0.0);
    assert_eq!(report["clip"], 1e-6);
    assert!(d.join("s.svg").exists());
    assert!(d.join("r.json").exists());
}

#[test]
fn bayes_factor_needs_shots() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok_json(d, &["gen-model", "--graph", "line:2", "--kind", "weight1", "--max-s", "1e-3", "--seed", "1", "--out", "m.json"]);
    ok_json(d, &["gen-circuits", "--graph", "line:2", "--kind", "mirror", "--count", "20", "--max-depth", "6", "--seed", "2", "--out", "c.jsonl"]);
    ok_json(d, &["simulate", "--model", "m.json", "--circuits", "c.jsonl", "--metric", "pst", "--shots", "2048", "--seed", "3", "--out", "shots.jsonl"]);
    ok_json(d, &["simulate", "--model", "m.json", "--circuits", "c.jsonl", "--metric", "pst", "--seed", "3", "--out", "plain.jsonl"]);
    // Two constant predictors written by hand.
    let ids: Vec<String> = std::fs::read_to_string(d.join("plain.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["id"].as_str().unwrap().to_string())
        .collect();
    for (name, p) in [("a.csv", 0.999), ("b.csv", 0.9)] {
        let mut text = String::from("id,prediction\n");
        for id in &ids {
            text += &format!("{id},{p}\n");
        }
        std::fs::write(d.join(name), text).unwrap();
    }
    let r = ok_json(d, &["evaluate", "--pred", "a.csv", "--truth", "shots.jsonl", "--compare", "b.csv"]);
    assert!(r["log10_bayes_factor"].as_f64().unwrap() > 2.0);
    let out = qcap(d, &["evaluate", "--pred", "a.csv", "--truth", "plain.jsonl", "--compare", "b.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("shot counts"));
}

#[test]
fn validation_failures_exit_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let out = qcap(d, &["gen-model", "--graph", "star:5", "--out", "m.json"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let out = qcap(d, &["gen-circuits", "--graph", "line:3", "--count", "5", "--min-width", "4", "--out", "c.jsonl"]);
    assert_eq!(out.status.code(), Some(2));
    let out = qcap(d, &["train", "--data", "missing", "--out", "cp.json"]);
    assert_eq!(out.status.code(), Some(2));
    let out = qcap(d, &["predict"]);
    assert_eq!(out.status.code(), Some(2));
}
