use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn govsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_govsim")).args(args).output().expect("spawn govsim")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes the quorum-like preset and its report into `dir`.
fn quorum_files(dir: &TempDir) -> (PathBuf, PathBuf) {
    let config = dir.path().join("quorum.json");
    let report = dir.path().join("quorum-report.json");
    assert!(govsim(&["preset", "quorum-like", "--out", path(&config)]).status.success());
    assert!(govsim(&["run", path(&config), "--out", path(&report)]).status.success());
    (config, report)
}

#[test]
fn preset_output_matches_the_shipped_file() {
    let o = govsim(&["preset", "polkadot-like"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), std::fs::read_to_string(shipped("polkadot-like.json")).unwrap());
}

#[test]
fn unknown_preset_exits_with_usage_error() {
    let o = govsim(&["preset", "nope"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown preset"));
}

#[test]
fn run_to_stdout_equals_run_to_file() {
    let dir = TempDir::new().unwrap();
    let (config, report) = quorum_files(&dir);
    let o = govsim(&["run", path(&config), "--matrix"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), std::fs::read_to_string(&report).unwrap());
    assert!(String::from_utf8_lossy(&o.stderr).contains("participation-permission"));
}

#[test]
fn invalid_config_names_the_field() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    let mut v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(shipped("quorum-like.json")).unwrap()).unwrap();
    v["patterns"].as_array_mut().unwrap().push("token-locker".into());
    std::fs::write(&bad, v.to_string()).unwrap();
    let o = govsim(&["run", path(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr).to_string();
    assert!(err.contains("patterns[") && err.contains("token-locker"), "{err}");
}

#[test]
fn replay_against_stored_report_matches() {
    for stem in ["polkadot-like", "quorum-like", "dao-crosschain"] {
        let config = shipped(&format!("{stem}.json"));
        let report = shipped(&format!("reports/{stem}.json"));
        let o = govsim(&["replay", path(&config), "--expect", path(&report)]);
        assert!(o.status.success(), "{stem}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).starts_with("replay matches"));
    }
}

#[test]
fn replay_mismatch_fails_and_reports_the_line() {
    let dir = TempDir::new().unwrap();
    let (config, report) = quorum_files(&dir);
    let text = std::fs::read_to_string(&report).unwrap().replacen("\"quorum-like\"", "\"tampered\"", 1);
    std::fs::write(&report, text).unwrap();
    let o = govsim(&["replay", path(&config), "--expect", path(&report)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("replay mismatch at line"));
}

#[test]
fn logs_filter_by_topic_and_height() {
    let dir = TempDir::new().unwrap();
    let (_, report) = quorum_files(&dir);
    let o = govsim(&["logs", path(&report), "--topic", "member.joined"]);
    assert!(o.status.success());
    let lines: Vec<serde_json::Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(!lines.is_empty());
    assert!(lines.iter().all(|e| e["topic"] == "member.joined"));

    let o = govsim(&["logs", path(&report), "--from", "3", "--to", "5"]);
    assert!(o.status.success());
    let heights: Vec<u64> = stdout(&o)
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["height"].as_u64().unwrap())
        .collect();
    assert!(!heights.is_empty());
    assert!(heights.iter().all(|h| (3..=5).contains(h)));

    assert_eq!(govsim(&["logs", path(&report), "--from", "5", "--to", "3"]).status.code(), Some(2));
    assert!(!govsim(&["logs", path(&report), "--from", "3"]).status.success());
}

#[test]
fn matrix_merges_both_profiles() {
    let a = shipped("reports/polkadot-like.json");
    let b = shipped("reports/quorum-like.json");
    let o = govsim(&["matrix", path(&a), path(&b)]);
    assert!(o.status.success());
    let table = stdout(&o);
    assert!(table.contains("polkadot-like") && table.contains("quorum-like"));
    assert!(table.lines().any(|l| l.starts_with("sharded-chain")));

    let o = govsim(&["matrix", "--json", path(&a), path(&b)]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 14);
}
