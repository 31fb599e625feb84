use std::process::{Command, Output};

use serde_json::Value;

fn treeshift(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_treeshift"))
        .args(args)
        .env_remove("TREESHIFT_SEED")
        .output()
        .expect("binary runs")
}

fn lines(out: &[u8]) -> Vec<Value> {
    String::from_utf8_lossy(out)
        .lines()
        .map(|l| serde_json::from_str(l).expect("each line is JSON"))
        .collect()
}

#[test]
fn run_writes_a_jsonl_report() {
    let out = treeshift(&["run", "--example", "T2", "--alpha", "0.5", "--depth", "6", "--suite", "core-identities"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let records = lines(&out.stdout);
    assert!(records[0]["config"]["seed"].is_number());
    let summary = &records.last().unwrap()["summary"];
    assert_eq!(summary["fail"], 0);
    assert_eq!(summary["total"].as_u64().unwrap() as usize, records.len() - 2);
    for r in &records[1..records.len() - 1] {
        assert!(r["name"].as_str().unwrap().starts_with("core-identities/"));
        assert!(["pass", "diagnostic"].contains(&r["status"].as_str().unwrap()));
    }
    assert!(String::from_utf8_lossy(&out.stderr).contains("0 failed"));
}

#[test]
fn generated_specs_feed_back_into_run_and_inspect() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("rays.json");
    let report = dir.path().join("report.jsonl");
    let spec_s = spec.to_str().unwrap();
    let out = treeshift(&["generate", "--example", "RAYS", "--param", "3", "--depth", "5", "--out", spec_s]);
    assert_eq!(out.status.code(), Some(0));
    let out = treeshift(&["inspect", "--tree", spec_s]);
    assert_eq!(out.status.code(), Some(0));
    let info: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(info["vertices"], 16);
    assert_eq!(info["kernel_dim"], 3);
    assert_eq!(info["balanced"], true);
    let out = treeshift(&["run", "--tree", spec_s, "--suite", "shimorin,balanced", "--out", report.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let records = lines(&std::fs::read(&report).unwrap());
    assert_eq!(records[0]["config"]["suites"], serde_json::json!(["shimorin", "balanced"]));
}

#[test]
fn seed_comes_from_the_environment() {
    let args = ["run", "--depth", "5", "--suite", "harmonics"];
    let with_env = Command::new(env!("CARGO_BIN_EXE_treeshift"))
        .args(args)
        .env("TREESHIFT_SEED", "9")
        .output()
        .unwrap();
    let explicit = treeshift(&[&args[..], &["--seed", "9"]].concat());
    assert_eq!(with_env.stdout, explicit.stdout);
    assert_ne!(with_env.stdout, treeshift(&args).stdout);
}

#[test]
fn bad_arguments_exit_with_code_two() {
    for args in [
        vec!["run", "--example", "RAYS", "--alpha", "0.5"],
        vec!["run", "--suite", "nonsense"],
        vec!["run", "--example", "T4", "--depth", "5"],
        vec!["run", "--depth", "1"],
        vec!["inspect", "--tree", "/nonexistent/tree.json"],
    ] {
        let out = treeshift(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("error"), "{args:?}");
    }
}

#[test]
fn failing_checks_exit_with_code_one() {
    // a tolerance far below rounding level fails the identity checks
    let out = treeshift(&["run", "--example", "RAYS", "--param", "3,1", "--depth", "12", "--suite", "core-identities", "--tol-alg", "1e-300"]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let records = lines(&out.stdout);
    assert!(records.iter().any(|r| r["status"] == "fail" && r["witness"].is_string()));
}
