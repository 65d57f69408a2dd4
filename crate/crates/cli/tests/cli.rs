//! End-to-end tests driving the installed binary with std::process.
//!
//! Everything here runs at toy scale (tens of runs, hundreds of samples)
//! so the whole file finishes in seconds.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_subband-adapt"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary should spawn")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no exit code (killed by signal?)")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Fresh per-test scratch directory under the system temp dir.
fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("subband-adapt-cli-tests").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

const QUICK_CONFIG: &str = "\
# quick sparse identification run
[target]
kind = sparse
seed = 7

[filter]
variant = gptnsaf
M = 2
p = 1.2

[run]
runs = 12
samples = 500
seed = 9
";

#[test]
fn run_writes_curve_and_summary() {
    let dir = scratch("run-basic");
    let cfg = dir.join("exp.conf");
    std::fs::write(&cfg, QUICK_CONFIG).unwrap();
    let csv = dir.join("curve.csv");
    let out = run(&["run", "--config", cfg.to_str().unwrap(), "-o", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("sample,mse_db\n"));
    assert_eq!(text.lines().count(), 501);
    let summary = stdout(&out);
    assert!(summary.contains("floor"), "summary line missing: {summary}");
}

#[test]
fn cli_and_library_produce_identical_csv() {
    let dir = scratch("run-equivalence");
    let cfg = dir.join("exp.conf");
    std::fs::write(&cfg, QUICK_CONFIG).unwrap();
    let csv = dir.join("curve.csv");
    let out = run(&[
        "--threads",
        "1",
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--set",
        "run.runs=10",
        "-o",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));

    let overrides = vec!["run.runs=10".to_string()];
    let parsed = subband_adapt::config::parse_config_str(QUICK_CONFIG, &overrides).unwrap();
    let curve = subband_adapt::sim::run_ensemble(&parsed).unwrap();
    assert_eq!(
        std::fs::read_to_string(&csv).unwrap(),
        subband_adapt::sim::curve_to_csv(&curve),
        "binary output drifted from the library for the same config"
    );
}

#[test]
fn preset_listing_and_rerun_are_stable() {
    let dir = scratch("preset-rerun");
    let args = |out: &str| {
        [
            "preset".to_string(),
            "fig6-comparison".to_string(),
            "--scale".to_string(),
            "0.01".to_string(),
            "--samples".to_string(),
            "330".to_string(),
            "--output-dir".to_string(),
            dir.join(out).to_str().unwrap().to_string(),
        ]
    };
    let first = bin().args(args("a")).output().unwrap();
    let second = bin().args(args("b")).output().unwrap();
    assert_eq!(code(&first), 0, "stderr: {}", stderr(&first));
    assert_eq!(code(&second), 0, "stderr: {}", stderr(&second));

    // The manifest is printed one path per line, 5 curves per target.
    let listed: Vec<String> =
        stdout(&first).lines().map(|l| l.trim().to_string()).filter(|l| !l.is_empty()).collect();
    assert_eq!(listed.len(), 15);
    for path in &listed {
        assert!(path.ends_with(".csv"), "unexpected manifest line {path}");
    }

    for line in &listed {
        let a = PathBuf::from(line);
        let b = dir.join("b").join(a.file_name().unwrap());
        assert_eq!(
            std::fs::read(&a).unwrap(),
            std::fs::read(&b).unwrap(),
            "rerun differs for {line}"
        );
    }
}

#[test]
fn design_bank_reports_quality() {
    let dir = scratch("design-bank");
    let csv = dir.join("bank.csv");
    let out = run(&["design-bank", "-M", "2", "-N", "16", "-o", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 16);
    assert!(text.lines().all(|l| l.split(',').count() == 2));
    let report = stdout(&out);
    assert!(report.contains("residual"), "missing residual line: {report}");
    assert!(report.contains("band peaks"), "missing peaks line: {report}");
}

#[test]
fn gen_target_writes_taps() {
    let dir = scratch("gen-target");
    let csv = dir.join("target.csv");
    let out = run(&[
        "gen-target",
        "--kind",
        "sparse",
        "-L",
        "64",
        "--seed",
        "5",
        "-o",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 64);
    assert!(stdout(&out).contains("nonzero"));

    // Same kind, length, and seed through the library.
    let target = subband_adapt::signals::gen_target(
        subband_adapt::signals::TargetKind::Sparse,
        64,
        5,
    );
    let from_csv: Vec<f64> = text.lines().map(|l| l.parse().unwrap()).collect();
    assert_eq!(from_csv, target.taps);
}

#[test]
fn validate_prints_resolved_settings() {
    let out = run(&[
        "validate",
        "--set",
        "target.kind=quasi-sparse",
        "--set",
        "filter.variant=gptnsaf",
        "--set",
        "filter.M=4",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let report = stdout(&out);
    assert!(report.contains("config ok"));
    assert!(report.contains("M=4"), "resolved band count missing: {report}");
    // Default p for a quasi-sparse target.
    assert!(report.contains("p=1.5"), "suggested exponent missing: {report}");
    assert!(report.contains("bank residual"), "bank report missing: {report}");
}

#[test]
fn config_mistakes_exit_one_with_context() {
    let dir = scratch("config-errors");

    // Unknown key: the message names the offending line.
    let bad = dir.join("bad.conf");
    std::fs::write(&bad, "[filter]\nvariant = gptnsaf\nstep = 0.1\n").unwrap();
    let out = run(&["validate", "--config", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("line 3"), "stderr: {}", stderr(&out));

    // Malformed override.
    let out = run(&["validate", "--set", "filter=1.2"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("override"), "stderr: {}", stderr(&out));

    // Well-formed but invalid: the violated invariant is named.
    let out = run(&[
        "validate",
        "--set",
        "target.kind=sparse",
        "--set",
        "filter.variant=gptnsaf",
        "--set",
        "filter.p=3.0",
    ]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("InvalidSparsityParam"), "stderr: {}", stderr(&out));

    // Required keys have no defaults to fall back on.
    let out = run(&["validate", "--set", "target.kind=sparse"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("filter.variant"), "stderr: {}", stderr(&out));

    // Unknown preset name.
    let out = run(&["preset", "fig9", "--output-dir", dir.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("unknown preset"), "stderr: {}", stderr(&out));

    // Impossible bank geometry.
    let out = run(&["design-bank", "-M", "8", "-N", "12", "-o", dir.join("x.csv").to_str().unwrap()]);
    assert_eq!(code(&out), 1);

    // Bad thread settings are validation errors too.
    let out = run(&["--threads", "0", "validate"]);
    assert_eq!(code(&out), 1);
    let out = bin()
        .env("SUBBAND_ADAPT_THREADS", "many")
        .args(["validate"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("SUBBAND_ADAPT_THREADS"), "stderr: {}", stderr(&out));
}

#[test]
fn runtime_failures_exit_two() {
    // Writing into a directory that does not exist is a runtime error,
    // not a configuration one.
    let missing = "/nonexistent-subband-adapt-dir/out.csv";
    let out = run(&["design-bank", "-M", "2", "-N", "16", "-o", missing]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("error:"), "stderr: {}", stderr(&out));
}

#[test]
fn usage_errors_and_help_follow_exit_contract() {
    let out = run(&["--help"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("subband-adapt"));

    let out = run(&["run"]); // missing required --output
    assert_eq!(code(&out), 1);

    let out = run(&["no-such-command"]);
    assert_eq!(code(&out), 1);
}
