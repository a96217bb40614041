//! End-to-end checks of the `ogc` binary: exit codes, output files, flag
//! overrides, and parser robustness.

use std::path::Path;
use std::process::{Command, Output};

use proptest::prelude::*;

const BIN: &str = env!("CARGO_BIN_EXE_ogc");

const SCENARIO: &str = r#"
[run]
horizon = 25
alpha = 0.05
epsilon = 0.01
seed = 11

[grid]
voltage_matrix = [[0.020, 0.008, 0.015, 0.006]]
voltage_offset = [1.0]
substation_weights = [1.0, 0.0, 1.0, 0.0]
substation_offset = -0.2
tracking_target = 0.15

[[devices]]
kind = "pv"
s_rated = 1.0
available_power = 0.8
c1 = 2.0
c2 = 0.5

[[devices]]
kind = "battery"
s_rated = 0.5
soc = 0.6
soc_target = 0.5
capacity_energy = 2.0
step_duration = 0.25
c1 = 0.5
c2 = 1.0
"#;

fn write_scenario(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("scenario.toml");
    std::fs::write(&path, SCENARIO).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn validate_accepts_a_good_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path());
    let out = run(&["validate", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).starts_with("ok:"));
}

#[test]
fn validate_rejects_a_bad_scenario_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, SCENARIO.replace("alpha = 0.05", "alpha = -1.0")).unwrap();
    let out = run(&["validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).starts_with("error:"));
}

#[test]
fn missing_scenario_file_exits_2() {
    let out = run(&["validate", "/nonexistent/nowhere.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_1() {
    for args in [
        vec!["frobnicate"],
        vec!["run"],
        vec!["run", "x.toml", "--seed", "1", "--seeds", "0..3"],
    ] {
        let out = run(&args);
        assert_eq!(out.status.code(), Some(1), "args {args:?}");
    }

    // Malformed seed range: parsed after clap, still a usage error.
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path());
    let out = run(&["run", path.to_str().unwrap(), "--seeds", "5..2"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--seeds"));
}

#[test]
fn run_writes_the_three_result_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path());
    let out_dir = dir.path().join("results");
    let out = run(&[
        "run",
        path.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    for name in ["trajectory.csv", "summary.csv", "meta.txt"] {
        assert!(out_dir.join(name).exists(), "missing {name}");
    }
    let traj = std::fs::read_to_string(out_dir.join("trajectory.csv")).unwrap();
    assert_eq!(traj.lines().count(), 26); // header + horizon rows
    let meta = std::fs::read_to_string(out_dir.join("meta.txt")).unwrap();
    assert!(meta.contains("seed: 11"));
    assert!(!meta.contains("override_"));
}

#[test]
fn overrides_are_applied_and_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path());
    let out_dir = dir.path().join("results");
    let out = run(&[
        "run",
        path.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--seed",
        "77",
        "--alpha",
        "0.02",
        "--epsilon",
        "0",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let meta = std::fs::read_to_string(out_dir.join("meta.txt")).unwrap();
    for line in ["seed: 77", "override_seed: 77", "override_alpha: 0.02", "override_epsilon: 0"] {
        assert!(meta.contains(line), "meta missing `{line}`:\n{meta}");
    }
    let summary = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    let row: Vec<&str> = summary.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[1], "77"); // seed column
}

#[test]
fn seed_range_writes_the_aggregate_table() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path());
    let out_dir = dir.path().join("agg");
    let out = run(&[
        "run",
        path.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--seeds",
        "0..3",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let table = std::fs::read_to_string(out_dir.join("aggregate.csv")).unwrap();
    assert_eq!(table.lines().count(), 5); // header + 4 seeds
    assert!(table.starts_with("seed,average_regret,bound\n0,"));
    let meta = std::fs::read_to_string(out_dir.join("meta.txt")).unwrap();
    assert!(meta.contains("episodes: 4"));
}

#[test]
fn report_reproduces_the_summary_and_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path());
    let out_dir = dir.path().join("results");
    let out = run(&["run", path.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));

    let out = run(&["report", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let stored = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert_eq!(stdout(&out), stored);

    // Any edit to the stored summary must be flagged.
    std::fs::write(out_dir.join("summary.csv"), stored.replace('7', "8")).unwrap();
    let out = run(&["report", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("mismatch"));

    let out = run(&["report", dir.path().join("empty").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

proptest! {
    // The parser must reject or accept arbitrary input without panicking.
    #[test]
    fn parser_never_panics(text in "\\PC{0,400}") {
        let _ = ogc::cli::load_scenario_str(&text, Path::new("."));
    }

    #[test]
    fn parser_never_panics_on_mutated_scenarios(
        idx in 0usize..SCENARIO.len(),
        replacement in "\\PC{0,10}",
    ) {
        let mut text = SCENARIO.to_string();
        let start = (0..=idx).rev().find(|&i| text.is_char_boundary(i)).unwrap();
        text.replace_range(start..start, &replacement);
        let _ = ogc::cli::load_scenario_str(&text, Path::new("."));
    }
}
