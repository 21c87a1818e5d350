use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_adaffect");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).args(args).current_dir(dir).output().unwrap()
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["no-such-command"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["schedule", "--scenes", "s.json"]).status.code(), Some(2));
}

#[test]
fn missing_input_is_a_one_line_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["agreement", "--ratings", "absent.csv"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("adaffect: error:") && err.contains("absent.csv"));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(dir.path(), &["synth", "scenes", "--out", "scenes.json"]).status.success());
    fs::write(dir.path().join("bad_section.json"), r#"{"gaa": {}}"#).unwrap();
    fs::write(dir.path().join("bad_key.json"), r#"{"ga": {"generationz": 5}}"#).unwrap();
    for cfg in ["bad_section.json", "bad_key.json"] {
        let out = run(dir.path(), &["--config", cfg, "schedule", "--scenes", "scenes.json", "--ads", "scenes.json", "--k", "2", "--out", "s.csv"]);
        assert_eq!(out.status.code(), Some(1), "{cfg}");
    }
}

#[test]
fn outputs_carry_run_metadata() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(dir.path(), &["--seed", "9", "synth", "quadrant", "--dims", "4", "--n-per-task", "3", "--out", "f.csv"]).status.success());
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("f.csv.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 9);
    assert_eq!(meta["subcommand"], "synth quadrant");
    assert_eq!(meta["tool"], "adaffect");
}

#[test]
fn seed_changes_generated_data() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(dir.path(), &["--seed", "1", "synth", "scenes", "--out", "a.json"]).status.success());
    assert!(run(dir.path(), &["--seed", "2", "synth", "scenes", "--out", "b.json"]).status.success());
    assert_ne!(fs::read(dir.path().join("a.json")).unwrap(), fs::read(dir.path().join("b.json")).unwrap());
}

#[test]
fn alphas_need_two_values() {
    let dir = tempfile::tempdir().unwrap();
    let p = "item_id,p_high,p_low,label\na,0.7,0.3,H\n";
    fs::write(dir.path().join("p.csv"), p).unwrap();
    let args = ["fuse", "--p1", "p.csv", "--p2", "p.csv", "--f1", "0.5", "--f2", "0.5", "--out", "o.csv", "--alphas"];
    let ok = run(dir.path(), &[&args[..], &["0.5,0.5"]].concat());
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    let bad = run(dir.path(), &[&args[..], &["0.5,0.2,0.3"]].concat());
    assert_eq!(bad.status.code(), Some(1));
}
