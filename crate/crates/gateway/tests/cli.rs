//! End-to-end CLI tests against the built binary.

use std::path::Path;
use std::process::Command;

fn ecom() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ecom"))
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap()
}

#[test]
fn gen_is_deterministic_across_invocations() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    for out in [&a, &b] {
        let status = ecom()
            .args([
                "gen",
                "--family",
                "logistics",
                "--count",
                "10",
                "--seed",
                "7",
            ])
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    assert_eq!(
        read(&a),
        read(&b),
        "same seed must produce identical task files"
    );
}

#[test]
fn full_pipeline_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let tasks = dir.path().join("tasks.jsonl");
    let results = dir.path().join("results.jsonl");
    let report = dir.path().join("report.json");
    let sft = dir.path().join("sft.jsonl");
    let logs = dir.path().join("logs");

    let status = ecom()
        .args(["gen", "--count", "6", "--seed", "11"])
        .arg("--out")
        .arg(&tasks)
        .status()
        .unwrap();
    assert!(status.success());

    let output = ecom()
        .args(["run", "--agent", "scripted"])
        .arg("--tasks")
        .arg(&tasks)
        .arg("--out")
        .arg(&results)
        .arg("--logs-dir")
        .arg(&logs)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(
        stdout.contains("100.0"),
        "scripted agent scores 1 everywhere: {stdout}"
    );

    let status = ecom()
        .arg("eval")
        .arg("--results")
        .arg(&results)
        .arg("--report")
        .arg(&report)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(report.exists());
    assert!(report.with_extension("txt").exists());

    let status = ecom()
        .arg("export-sft")
        .arg("--results")
        .arg(&results)
        .arg("--out")
        .arg(&sft)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(std::fs::read_to_string(&sft).unwrap().lines().count() > 0);

    // Replay the first generated task's log.
    let first_log = std::fs::read_dir(&logs)
        .unwrap()
        .next()
        .unwrap()
        .unwrap()
        .path();
    let output = ecom()
        .arg("replay")
        .arg("--log")
        .arg(&first_log)
        .arg("--tasks")
        .arg(&tasks)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    assert!(String::from_utf8_lossy(&output.stdout).contains("replay ok"));
}

#[test]
fn run_accepts_a_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let tasks = dir.path().join("tasks.jsonl");
    let results = dir.path().join("results.jsonl");
    let config = dir.path().join("run.toml");

    let status = ecom()
        .args(["gen", "--count", "2", "--seed", "3"])
        .arg("--out")
        .arg(&tasks)
        .status()
        .unwrap();
    assert!(status.success());

    std::fs::write(
        &config,
        format!(
            "tasks = {:?}\nout = {:?}\nagent = \"scripted\"\nseed = 3\n",
            tasks.display().to_string(),
            results.display().to_string(),
        ),
    )
    .unwrap();
    let status = ecom()
        .arg("run")
        .arg("--config")
        .arg(&config)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(results.exists());
}

#[test]
fn bad_inputs_exit_nonzero_with_a_diagnostic() {
    let output = ecom()
        .args(["gen", "--family", "nonsense", "--out", "/tmp/x.jsonl"])
        .output()
        .unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("unknown family"));

    let output = ecom()
        .args([
            "eval",
            "--results",
            "/nonexistent.jsonl",
            "--report",
            "/tmp/r.json",
        ])
        .output()
        .unwrap();
    assert!(!output.status.success());

    let output = ecom()
        .args([
            "run",
            "--agent",
            "react",
            "--tasks",
            "/tmp/none.jsonl",
            "--out",
            "/tmp/o.jsonl",
        ])
        .output()
        .unwrap();
    assert!(!output.status.success());
}

#[test]
fn unknown_flags_are_rejected() {
    let output = ecom().args(["gen", "--frobnicate"]).output().unwrap();
    assert!(!output.status.success());
}
