use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const CHAIN: &str = r#"{"n":3,"parents":[[],[0],[1]],"cpt":[[0.5],[0.2,0.8],[0.3,0.7]]}"#;
const EMPTY: &str = r#"{"n":3,"parents":[[],[],[]]}"#;

fn indegree(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_indegree"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn setup() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("chain.json"), CHAIN).unwrap();
    fs::write(dir.path().join("empty.json"), EMPTY).unwrap();
    dir
}

fn stderr_error(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("stderr is not json ({e}): {text}"))
}

#[test]
fn test_exit_codes_follow_the_verdict() {
    let dir = setup();
    let accept = indegree(
        dir.path(),
        &["--seed", "3", "test", "--graph", "chain.json", "--output-dir", "a"],
    );
    assert_eq!(
        accept.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&accept.stdout)
    );
    let reject = indegree(
        dir.path(),
        &[
            "--seed",
            "3",
            "test",
            "--graph",
            "empty.json",
            "--truth",
            "chain.json",
            "--output-dir",
            "r",
        ],
    );
    assert_eq!(reject.status.code(), Some(1));
    let report: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("r/test_report.json")).unwrap()).unwrap();
    assert_eq!(report["result"]["verdict"], "reject");
    assert_eq!(report["config"]["seed"], 3);
}

#[test]
fn minimax_writes_one_row_per_trial() {
    let dir = setup();
    let out = indegree(
        dir.path(),
        &["minimax", "--n", "6", "--trials", "17", "--output-dir", "m"],
    );
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("m/minimax_trials.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# {"));
    assert!(lines.next().unwrap().starts_with("trial,seed,chi2"));
    assert_eq!(lines.count(), 17);
    assert!(dir.path().join("m/minimax_summary.json").exists());
}

#[test]
fn invalid_config_exits_with_error_json() {
    let dir = setup();
    let out = indegree(dir.path(), &["learn", "--truth", "chain.json", "--eps", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_error(&out)["error"]["kind"], "invalid-config");

    let out = indegree(dir.path(), &["sample"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_error(&out)["error"]["message"]
        .as_str()
        .unwrap()
        .contains("--model"));
}

#[test]
fn unknown_config_field_is_rejected() {
    let dir = setup();
    let cfg = r#"{"seed":1,"output_dir":"o","command":{"name":"enumerate-dags","n":2,"bogus":1}}"#;
    fs::write(dir.path().join("bad.json"), cfg).unwrap();
    let out = indegree(dir.path(), &["--config", "bad.json"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_error(&out);
    assert_eq!(err["error"]["kind"], "parse");
    assert!(err["error"]["message"].as_str().unwrap().contains("bogus"));

    let top = r#"{"seed":1,"output_dir":"o","extra":true,"command":{"name":"enumerate-dags"}}"#;
    fs::write(dir.path().join("top.json"), top).unwrap();
    assert_eq!(indegree(dir.path(), &["--config", "top.json"]).status.code(), Some(2));
}

#[test]
fn config_file_matches_flags() {
    let dir = setup();
    let cfg = r#"{"seed":5,"output_dir":"viaconfig","command":{"name":"sample","model":"chain.json","m":50}}"#;
    fs::write(dir.path().join("cfg.json"), cfg).unwrap();
    assert_eq!(indegree(dir.path(), &["--config", "cfg.json"]).status.code(), Some(0));
    assert_eq!(
        indegree(
            dir.path(),
            &[
                "sample",
                "--model",
                "chain.json",
                "--m",
                "50",
                "--seed",
                "5",
                "--output-dir",
                "viaflags"
            ]
        )
        .status
        .code(),
        Some(0)
    );
    let body = |d: &str| {
        let text = fs::read_to_string(dir.path().join(d).join("samples.csv")).unwrap();
        text.lines().skip(1).map(String::from).collect::<Vec<_>>()
    };
    assert_eq!(body("viaconfig"), body("viaflags"));
}

#[test]
fn same_seed_gives_identical_bytes() {
    let dir = setup();
    for run in ["x", "y"] {
        let out = indegree(
            dir.path(),
            &["--seed", "11", "learn", "--truth", "chain.json", "--output-dir", run],
        );
        assert_eq!(out.status.code(), Some(0));
        let out = indegree(
            dir.path(),
            &["--seed", "11", "risk", "--trials", "40", "--output-dir", run],
        );
        assert_eq!(out.status.code(), Some(0));
    }
    for file in [
        "model.json",
        "mask.json",
        "learn_report.json",
        "risk_trials.csv",
        "risk_summary.json",
    ] {
        let x = fs::read(dir.path().join("x").join(file)).unwrap();
        let y = fs::read(dir.path().join("y").join(file)).unwrap();
        // Reports embed the output dir, so compare with it normalized.
        let norm = |b: Vec<u8>, d: &str| String::from_utf8(b).unwrap().replace(&format!("\"{d}\""), "\"_\"");
        assert_eq!(norm(x, "x"), norm(y, "y"), "{file} differs");
    }
}

#[test]
fn calibrate_below_budget_fails() {
    let dir = setup();
    let out = indegree(dir.path(), &["calibrate", "--target", "gamma", "--budget", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_error(&out)["error"]["kind"], "calibration");
}

#[test]
fn distances_report_restricted_terms() {
    let dir = setup();
    assert_eq!(
        indegree(dir.path(), &["learn", "--truth", "chain.json", "--output-dir", "l"])
            .status
            .code(),
        Some(0)
    );
    let out = indegree(
        dir.path(),
        &[
            "distances",
            "--p",
            "chain.json",
            "--q",
            "l/model.json",
            "--mask",
            "l/mask.json",
            "--output-dir",
            "l",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("l/distances.json")).unwrap()).unwrap();
    let r = &v["result"];
    let tv = r["tv"].as_f64().unwrap();
    let h2 = r["hellinger_sq"].as_f64().unwrap();
    assert!(h2 <= tv + 1e-12 && tv <= (2.0 * h2).sqrt() + 1e-12);
    assert!(r["restricted"]["p_mass"].as_f64().unwrap() > 0.99);
}

#[test]
fn enumerate_counts_graphs() {
    let dir = setup();
    assert_eq!(
        indegree(
            dir.path(),
            &["enumerate-dags", "--n", "3", "--d", "2", "--output-dir", "e"]
        )
        .status
        .code(),
        Some(0)
    );
    let v: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("e/dags.json")).unwrap()).unwrap();
    // Labelled DAGs on three nodes.
    assert_eq!(v["result"].as_array().unwrap().len(), 25);
}

#[test]
fn help_exits_zero() {
    let dir = setup();
    assert_eq!(indegree(dir.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(indegree(dir.path(), &["minimax", "--help"]).status.code(), Some(0));
}
