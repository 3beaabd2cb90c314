//! End-to-end exercise of the command-line interface: every subcommand,
//! the global flags, and the documented exit codes (0 success, 1 usage,
//! 2 config, 3 runtime).

use std::path::Path;
use std::process::{Command, Output};

const TINY_CONFIG: &str = "\
[model]
vocab_size = 123
context_len = 48
layers = 1
heads = 2
model_dim = 16
ff_dim = 32
seed = 9

[corpus]
n = 30
seed = 11

[stage1]
epochs = 2
batch = 8

[stage2]
dataset = 8
epochs = 1
batch = 8

[stage3]
dataset = 8
max_epochs = 2
batch = 8

[fuzz]
tests = 12
batch = 5
max_instrs = 16
workers = 2
seed = 21
";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rvfuzz"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    let config = dir.join("run.conf");
    bin()
        .args(["--config", config.to_str().unwrap()])
        .args(["--out", dir.to_str().unwrap()])
        .args(args)
        .output()
        .expect("spawn rvfuzz")
}

fn assert_ok(out: &Output, what: &str) {
    assert!(
        out.status.success(),
        "{what} failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn full_pipeline_runs_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.conf"), TINY_CONFIG).unwrap();

    for sub in ["synth-corpus", "pretrain", "refine", "optimize", "fuzz", "baseline"] {
        let out = run(dir.path(), &[sub]);
        assert_ok(&out, sub);
    }
    for file in [
        "corpus.asm",
        "corpus_manifest.json",
        "stage1.ckpt",
        "stage1_loss.csv",
        "stage2.ckpt",
        "stage2_log.csv",
        "stage3.ckpt",
        "stage3_log.csv",
        "report.json",
        "coverage.csv",
        "series.csv",
        "mismatches.csv",
        "baseline_report.json",
    ] {
        assert!(dir.path().join(file).exists(), "missing {file}");
    }

    let out = run(dir.path(), &["report"]);
    assert_ok(&out, "report");
    let cmp = std::fs::read_to_string(dir.path().join("comparison.csv")).unwrap();
    assert!(cmp.starts_with("test,a_percent,b_percent\n"));

    // Identical invocation reproduces the fuzz report byte for byte.
    let before = std::fs::read(dir.path().join("report.json")).unwrap();
    let out = run(dir.path(), &["fuzz"]);
    assert_ok(&out, "fuzz (second run)");
    let after = std::fs::read(dir.path().join("report.json")).unwrap();
    assert_eq!(before, after, "same-seed fuzz runs must match bytes");

    // Worker count is a throughput knob, not a result knob.
    let out = run(dir.path(), &["--workers", "7", "fuzz"]);
    assert_ok(&out, "fuzz --workers 7");
    let with_workers = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    let report: serde_json::Value = serde_json::from_str(&with_workers).unwrap();
    // The config snapshot records the override...
    assert_eq!(report["config"]["fuzz"]["workers"], 7);
    // ...but coverage and mismatch results are unchanged.
    let baseline: serde_json::Value =
        serde_json::from_str(&String::from_utf8(before.clone()).unwrap()).unwrap();
    assert_eq!(report["final_coverage_points"], baseline["final_coverage_points"]);
    assert_eq!(report["fingerprints"], baseline["fingerprints"]);
    assert_eq!(report["tests"], baseline["tests"]);

    // A master seed reseeds the whole pipeline deterministically.
    let out = run(dir.path(), &["--seed", "99", "fuzz"]);
    assert_ok(&out, "fuzz --seed 99");
    let reseeded = std::fs::read(dir.path().join("report.json")).unwrap();
    assert_ne!(reseeded, before);
    let out = run(dir.path(), &["--seed", "99", "fuzz"]);
    assert_ok(&out, "fuzz --seed 99 (second run)");
    assert_eq!(std::fs::read(dir.path().join("report.json")).unwrap(), reseeded);

    // Replay a program file against a single enabled toggle.
    let program = dir.path().join("probe.asm");
    std::fs::write(&program, "addi x0, x0, 7\necall\n").unwrap();
    let out = run(
        dir.path(),
        &["--toggles", "trace-x0-write", "replay", program.to_str().unwrap()],
    );
    assert_ok(&out, "replay");
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("golden trace"), "{text}");
    assert!(text.contains("extra-reg-write"), "{text}");
}

#[test]
fn exit_codes_separate_usage_config_and_runtime_errors() {
    let dir = tempfile::tempdir().unwrap();

    // 1: bad usage (unknown subcommand / flag).
    let out = bin().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = bin().args(["fuzz", "--no-such-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    // 0: help and version are not errors.
    let out = bin().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let out = bin().arg("--version").output().unwrap();
    assert_eq!(out.status.code(), Some(0));

    // 2: well-formed invocation, bad configuration.
    let bad = dir.path().join("bad.conf");
    std::fs::write(&bad, "[model]\nlayers = 0\n").unwrap();
    let out = bin()
        .args(["--config", bad.to_str().unwrap(), "pretrain"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{:?}", String::from_utf8_lossy(&out.stderr));
    let out = bin()
        .args(["--toggles", "bogus", "--out", dir.path().to_str().unwrap(), "fuzz"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // 2: fuzzing without a trained checkpoint is a setup problem.
    let out = bin()
        .args(["--out", dir.path().to_str().unwrap(), "fuzz"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // 3: runtime failure (unreadable replay program).
    let out = bin()
        .args(["replay", "/nonexistent/probe.asm"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{:?}", String::from_utf8_lossy(&out.stderr));
}
