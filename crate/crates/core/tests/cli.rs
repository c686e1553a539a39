//! End-to-end tests of the `pickfreeze` binary.

use std::path::Path;
use std::process::{Command, Output};

fn pickfreeze(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pickfreeze"))
        .args(args)
        .env_remove("PICKFREEZE_SEED")
        .output()
        .expect("binary runs")
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn estimate_writes_records_then_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run.csv");
    let o = pickfreeze(&[
        "estimate",
        "--model",
        "example1",
        "--estimator",
        "v3c",
        "--budget",
        "2000",
        "--reps",
        "100",
        "--seed",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = read(&out);
    assert!(!text.contains('\r'));
    let (records, summary) = text.split_once("\n\n").unwrap();
    let lines: Vec<&str> = records.lines().collect();
    assert_eq!(
        lines[0],
        "run_id,model,estimator,budget,rows,replication,estimate"
    );
    assert_eq!(lines.len(), 101);
    assert!(lines[1..]
        .iter()
        .all(|l| l.split(',').nth(4) == Some("1000")));
    let summary: Vec<&str> = summary.lines().collect();
    assert_eq!(summary.len(), 2);
    assert!(summary[0].starts_with("run_id,model,estimator,budget,rows,replications,mean"));
    let fields: Vec<&str> = summary[1].split(',').collect();
    assert_eq!(fields[5], "100");
    let reference: f64 = fields[9].parse().unwrap();
    assert!((reference - 1.0 / 36.0).abs() < 1e-16);
    for value in &fields[6..] {
        assert!(!value.contains('e'), "plain decimal expected: {value}");
    }
}

#[test]
fn weight_triples_parse_and_json_is_valid() {
    let o = pickfreeze(&[
        "estimate",
        "--model",
        "example2",
        "--estimator",
        "v:0.2,0.2,0.6",
        "--budget",
        "200",
        "--reps",
        "5",
        "--format",
        "json",
    ]);
    assert!(o.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["meta"]["estimator"], "v:0.2,0.2,0.6");
    assert_eq!(doc["records"].as_array().unwrap().len(), 5);
    assert_eq!(doc["summary"]["replications"], 5);
}

#[test]
fn seed_comes_from_the_environment() {
    let args = [
        "estimate",
        "--model",
        "example1",
        "--estimator",
        "u",
        "--budget",
        "30",
        "--reps",
        "3",
    ];
    let run = |seed: &str| {
        Command::new(env!("CARGO_BIN_EXE_pickfreeze"))
            .args(args)
            .env("PICKFREEZE_SEED", seed)
            .output()
            .unwrap()
            .stdout
    };
    assert_eq!(run("5"), run("5"));
    assert_ne!(run("5"), run("6"));
    let explicit = pickfreeze(&[&args[..], &["--seed", "5"]].concat());
    assert_eq!(run("5"), explicit.stdout);
}

#[test]
fn unknown_model_is_a_usage_error_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never.csv");
    let o = pickfreeze(&[
        "estimate",
        "--model",
        "example9",
        "--estimator",
        "v3c",
        "--budget",
        "200",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn indivisible_budget_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never.csv");
    let o = pickfreeze(&[
        "estimate",
        "--model",
        "example1",
        "--estimator",
        "u",
        "--budget",
        "1000",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("1000"));
    assert!(!out.exists());
}

#[test]
fn selfcheck_passes_and_corruption_fails() {
    let ok = pickfreeze(&["selfcheck"]);
    assert_eq!(ok.status.code(), Some(0));
    let bad = pickfreeze(&["selfcheck", "--corrupt-weights"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("V2 preset"));
}

#[test]
fn converge_rejects_a_single_budget() {
    let o = pickfreeze(&[
        "converge",
        "--model",
        "example1",
        "--estimator",
        "v3c",
        "--budgets",
        "1024",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn converge_selftest_recovers_slope() {
    let o = pickfreeze(&["converge", "--selftest"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let summary = text.split_once("\n\n").unwrap().1;
    let slope: f64 = summary
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(3)
        .unwrap()
        .parse()
        .unwrap();
    assert!((slope + 1.0).abs() < 1e-12);
}

#[test]
fn converge_small_grid() {
    let o = pickfreeze(&[
        "converge",
        "--model",
        "example1",
        "--estimator",
        "z3c",
        "--budgets",
        "96:768:2",
        "--reps",
        "50",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<&str> = text.split_once("\n\n").unwrap().0.lines().collect();
    assert_eq!(rows.len(), 5);
    assert!(rows[1].starts_with("96,96,32,50,"));
}

#[test]
fn oracle_reports_moment_and_decomposition() {
    let o = pickfreeze(&[
        "oracle", "--model", "example1", "--outer", "500", "--inner", "20",
    ]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let (moment, terms) = text.split_once("\n\n").unwrap();
    assert_eq!(moment.lines().count(), 2);
    let names: Vec<&str> = terms
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(
        names,
        [
            "var_x_of_f",
            "exp_cond_var",
            "variance_of_cond_exp",
            "residual"
        ]
    );
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(pickfreeze(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        pickfreeze(&["oracle", "--model", "example1", "--moment", "1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(pickfreeze(&["--help"]).status.code(), Some(0));
}
