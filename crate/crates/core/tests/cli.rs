mod common;

use std::path::Path;

use common::fixture_root;
use repoprompt::cli::run_command;

fn run(out: &Path, args: &[&str]) -> i32 {
    let root = fixture_root();
    let mut argv = vec![
        "repoprompt".to_string(),
        "--repo-root".into(),
        root.display().to_string(),
        "--out".into(),
        out.display().to_string(),
        "--tokenizer".into(),
        "fallback".into(),
    ];
    argv.extend(args.iter().map(|s| s.to_string()));
    run_command(argv)
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(run_command(["repoprompt", "--help"]), 0);
    assert_eq!(run_command(["repoprompt", "frobnicate"]), 2);
    assert_eq!(run_command(["repoprompt", "train", "--variant", "q"]), 2);
}

#[test]
fn steps_report_missing_prerequisites() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["label"]), 1);
    assert_eq!(run(dir.path(), &["train", "--variant", "h"]), 1);
    assert_eq!(run(dir.path(), &["--budget", "0", "mine"]), 1);
}

#[test]
fn pipeline_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    assert_eq!(run(out, &["index"]), 0);
    assert!(out.join("index/minirepo.json").exists());
    assert_eq!(run(out, &["mine", "--cap", "40"]), 0);
    let holes = std::fs::read_to_string(out.join("holes.jsonl")).unwrap();
    assert_eq!(holes.lines().count(), 40);
    assert_eq!(run(out, &["label"]), 0);
    assert_eq!(run(out, &["train", "--variant", "h", "--epochs", "2"]), 0);
    assert!(out.join("checkpoints/rlpg-h.ckpt").exists());
    assert_eq!(run(out, &["predict", "--variant", "h", "--k", "3"]), 0);
    for method in ["oracle", "codex-default", "rlpg-h", "file_bm25"] {
        assert_eq!(run(out, &["evaluate", "--method", method]), 0, "{method}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report_oracle.json")).unwrap()).unwrap();
    assert_eq!(report["holes"], 40);
    assert_eq!(run(out, &["attempts", "--ranking", "rlpg-h", "--k-max", "5"]), 0);
    assert_eq!(run(out, &["compose-eval", "--variant", "h", "--l-max", "2"]), 0);
    assert!(out.join("compose_eval.txt").exists());
}
