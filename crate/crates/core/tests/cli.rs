//! End-to-end checks of the `dp-spider` binary: artifact layout, exit
//! codes, determinism of written records, and replay verification. Each
//! test works inside its own temp directory so nothing leaks into the tree.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dp_spider::harness::record::{read_records, write_records};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dp-spider"))
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Two noise-free runs with traces: small enough that spawning the binary
/// dominates the wall time.
const RUN_CONFIG: &str = r#"{
  "problem": {"family": "quadratic_bowl", "dim": 2},
  "privacy": {"eps": "inf"},
  "data": {"n": 200},
  "seeds": {"master_seed": 5, "num_runs": 2},
  "overrides": {"alpha": 0.5, "zeta": 0.0},
  "flags": {"emit_trace": true}
}"#;

/// Private sweep base: three seeds per cell, nonzero gradients so the
/// scaling fit has something to chew on.
const SWEEP_CONFIG: &str = r#"{
  "problem": {"family": "quadratic_bowl", "dim": 2},
  "privacy": {"eps": 2.0, "delta": 1e-6},
  "data": {"n": 200},
  "seeds": {"master_seed": 6, "num_runs": 3},
  "overrides": {"alpha": 0.5},
  "flags": {"sigma_preset": "plain"}
}"#;

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn run_writes_records_and_traces() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), RUN_CONFIG);
    let out_dir = dir.path().join("out");
    let out = bin()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("appended 2 record(s)"));

    let records = read_records(out_dir.join("records.jsonl")).unwrap();
    assert_eq!(records.len(), 2);
    assert!(out_dir.join("trace-run0.jsonl").is_file());
    assert!(out_dir.join("trace-run1.jsonl").is_file());
}

#[test]
fn identical_invocations_write_identical_outcomes() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), RUN_CONFIG);
    for name in ["a", "b"] {
        let st = bin()
            .args(["run", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(dir.path().join(name))
            .status()
            .unwrap();
        assert!(st.success());
    }
    let a = read_records(dir.path().join("a/records.jsonl")).unwrap();
    let b = read_records(dir.path().join("b/records.jsonl")).unwrap();
    assert_eq!(a.len(), b.len());
    for (ra, rb) in a.iter().zip(&b) {
        assert!(ra.same_outcome(rb), "run {} differed between invocations", ra.run_index);
    }
    // Traces carry no wall-clock fields, so the bytes must match exactly.
    for name in ["trace-run0.jsonl", "trace-run1.jsonl"] {
        let ta = fs::read(dir.path().join("a").join(name)).unwrap();
        let tb = fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(ta, tb, "{name} differs between invocations");
    }
}

#[test]
fn rerun_appends_to_the_record_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), RUN_CONFIG);
    let out_dir = dir.path().join("out");
    for _ in 0..2 {
        let st = bin()
            .args(["run", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out_dir)
            .status()
            .unwrap();
        assert!(st.success());
    }
    assert_eq!(read_records(out_dir.join("records.jsonl")).unwrap().len(), 4);
}

#[test]
fn seed_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), RUN_CONFIG);
    let out_dir = dir.path().join("out");
    let st = bin()
        .args(["run", "--seed", "99", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out_dir)
        .status()
        .unwrap();
    assert!(st.success());
    let records = read_records(out_dir.join("records.jsonl")).unwrap();
    assert!(records.iter().all(|r| r.config.seeds.master_seed == 99));
}

#[test]
fn out_env_is_the_fallback_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), RUN_CONFIG);
    let env_dir = dir.path().join("from-env");
    let st = bin()
        .current_dir(dir.path())
        .env("DP_SPIDER_OUT", &env_dir)
        .args(["run", "--config"])
        .arg(&config)
        .status()
        .unwrap();
    assert!(st.success());
    assert!(env_dir.join("records.jsonl").is_file());
}

#[test]
fn verify_accepts_fresh_records() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), RUN_CONFIG);
    let out_dir = dir.path().join("out");
    assert!(bin()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out_dir)
        .status()
        .unwrap()
        .success());
    let out = bin()
        .args(["verify", "--record"])
        .arg(out_dir.join("records.jsonl"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("all 2 record(s) verified"));
}

#[test]
fn verify_flags_a_tampered_record() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), RUN_CONFIG);
    let out_dir = dir.path().join("out");
    assert!(bin()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out_dir)
        .status()
        .unwrap()
        .success());
    let mut records = read_records(out_dir.join("records.jsonl")).unwrap();
    records[0].data_used += 1;
    let tampered = dir.path().join("tampered.jsonl");
    write_records(&tampered, &records, false).unwrap();
    let out = bin().args(["verify", "--record"]).arg(&tampered).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).contains("FAILED"));
    assert!(stderr(&out).contains("1 of 2 record(s) failed verification"));
}

#[test]
fn sweep_writes_csv_and_report_fits_it() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SWEEP_CONFIG);
    let out_dir = dir.path().join("out");
    let out = bin()
        .args(["sweep", "--grid", "n=200,400,800", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert_eq!(read_records(out_dir.join("records.jsonl")).unwrap().len(), 9);

    let report = bin()
        .args(["report", "--csv"])
        .arg(out_dir.join("sweep.csv"))
        .output()
        .unwrap();
    assert_eq!(report.status.code(), Some(0), "stderr: {}", stderr(&report));
    assert!(stdout(&report).contains("log grad median vs log n"));
}

#[test]
fn invalid_inputs_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    // Unknown config key.
    let bad_config = dir.path().join("bad.json");
    fs::write(&bad_config, r#"{"problem": {"family": "quadratic_bowl", "dimm": 2}}"#).unwrap();
    let out = bin().args(["run", "--config"]).arg(&bad_config).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("error:"));

    // Unknown grid key.
    let config = write_config(dir.path(), RUN_CONFIG);
    let out = bin()
        .args(["sweep", "--grid", "zz=1", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));

    // Malformed records and CSVs are validation failures too.
    let junk = dir.path().join("junk.jsonl");
    fs::write(&junk, "{\"not\": \"a record\"}\n").unwrap();
    let out = bin().args(["verify", "--record"]).arg(&junk).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    let bad_csv = dir.path().join("bad.csv");
    fs::write(&bad_csv, "n,dim\nx,y\n").unwrap();
    let out = bin().args(["report", "--csv"]).arg(&bad_csv).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_files_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run", "--config"])
        .arg(dir.path().join("nope.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).starts_with("error:"));
}
