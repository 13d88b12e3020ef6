//! The `lab` binary: exit codes, config files and report formats.
use std::path::PathBuf;
use std::process::{Command, Output};

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lab"))
        .args(args)
        .output()
        .unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("stoplab-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn list_prints_the_registry() {
    let out = lab(&["list"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 14);
    assert!(text.contains("Theorem caracter1"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(lab(&["run", "E99"]).status.code(), Some(2));
    assert_eq!(lab(&["run", "E14", "--bogus"]).status.code(), Some(2));
    assert_eq!(
        lab(&["run", "E14", "--format", "xml"]).status.code(),
        Some(2)
    );
    assert_eq!(
        lab(&["run", "E14", "--tree-steps", "40"]).status.code(),
        Some(2)
    );
    assert_eq!(lab(&["run", "E14", "--n", "0"]).status.code(), Some(2));
    assert_eq!(
        lab(&["run", "E14", "--config", "/nonexistent/lab.conf"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(lab(&[]).status.code(), Some(2));
}

#[test]
fn json_report_for_a_tree_experiment() {
    let out = lab(&[
        "run",
        "E14",
        "--tree-steps",
        "3",
        "--seed",
        "340282366920938463463374607431768211455",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["seed"], "340282366920938463463374607431768211455");
    assert_eq!(v["config"]["tree_steps"], 3);
    assert_eq!(v["experiments"][0]["id"], "E14");
    assert_eq!(v["experiments"][0]["verdict"], "pass");
}

#[test]
fn config_file_with_flag_override_and_csv() {
    let conf = scratch("lab.conf");
    std::fs::write(
        &conf,
        "# small run\nn = 5000\ntree_steps = 5\nformat = json\n",
    )
    .unwrap();
    let report = scratch("report.csv");
    let out = lab(&[
        "run",
        "E2",
        "--config",
        conf.to_str().unwrap(),
        "--tree-steps",
        "4",
        "--format",
        "csv",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(out.stdout.is_empty());
    let csv = std::fs::read_to_string(&report).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("experiment,metric,value"));
    assert!(csv.contains(",config.n,5000\n"));
    assert!(csv.contains(",config.tree_steps,4\n"));
    assert!(csv.contains("E2,verdict,pass\n"));
}

#[test]
fn raw_samples_file() {
    let raw = scratch("raw.csv");
    let out = lab(&[
        "run",
        "E8",
        "--n",
        "2000",
        "--dt",
        "0.01",
        "--raw",
        raw.to_str().unwrap(),
    ]);
    assert_ne!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&raw).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("path_id,functional,value"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first.len(), 3);
    assert!(first[0].parse::<u64>().is_ok());
    assert!(first[1].starts_with("gamma."));
    assert!(first[2].parse::<f64>().is_ok());
}
