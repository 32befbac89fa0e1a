//! End-to-end runs of the `tcm` binary.

use std::path::Path;
use std::process::{Command, Output};

fn tcm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tcm"))
        .args(args)
        .env("TCM_THREADS", "2")
        .output()
        .expect("spawn tcm")
}

fn write_config(dir: &Path, extra: &str) -> String {
    let text = format!(
        "n_points = 64\nside = \"16pi\"\nepsilon = 0.3\ndt = 0.05\nt_end = 0.3\nsample_interval = 0.1\n\
         output_dir = \"out\"\n{extra}"
    );
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn zero_data_run_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "amplitude_mode = \"explicit\"\namplitude = 0.0\n");
    let out = tcm(&["run", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/diagnostics.csv")).unwrap();
    assert!(csv.starts_with("t,A,B,E,crossing,l2_energy,energy_residual,max_linf"));
    assert_eq!(csv.lines().count(), 1 + 4);
    assert!(dir.path().join("out/snapshot.tcm").exists());
    assert!(dir.path().join("out/manifest.toml").exists());
}

#[test]
fn tiny_threshold_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "blowup_threshold = 1e-6\n");
    let out = tcm(&["run", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let manifest = std::fs::read_to_string(dir.path().join("out/manifest.toml")).unwrap();
    assert!(manifest.contains("blowup_detected"));
}

#[test]
fn missing_dt_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "n_points = 64\nside = \"16pi\"\nepsilon = 0.3\nt_end = 1.0\n").unwrap();
    let out = tcm(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dt"));
}

#[test]
fn missing_file_exits_one() {
    let out = tcm(&["run", "--config", "/nonexistent/run.toml"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn empty_sweep_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out = tcm(&["sweep", "--config", &cfg, "--epsilons"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = std::fs::read_to_string(dir.path().join("out/sweep_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1);
}

#[test]
fn sweep_deduplicates_and_records_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out = tcm(&["sweep", "--config", &cfg, "--epsilons", "0.3,0.25,0.3,0.5"]);
    assert_eq!(out.status.code(), Some(1));
    let summary = std::fs::read_to_string(dir.path().join("out/sweep_summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[1].contains("completed"));
    assert!(lines[3].contains("epsilon"));
    assert!(dir.path().join("out/eps_0.25/diagnostics.csv").exists());
}

#[test]
fn runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "w_amplitude = 0.01\nc_amplitude = 0.01\ntheta_amplitude = 0.01\nseed = 7\n");
    assert_eq!(tcm(&["run", "--config", &cfg]).status.code(), Some(0));
    let first = std::fs::read(dir.path().join("out/diagnostics.csv")).unwrap();
    let snap = std::fs::read(dir.path().join("out/snapshot.tcm")).unwrap();
    assert_eq!(tcm(&["run", "--config", &cfg]).status.code(), Some(0));
    assert_eq!(first, std::fs::read(dir.path().join("out/diagnostics.csv")).unwrap());
    assert_eq!(snap, std::fs::read(dir.path().join("out/snapshot.tcm")).unwrap());
}

#[test]
fn verify_prints_one_line_per_check() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out = tcm(&["verify", "--config", &cfg]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    assert_eq!(stdout.lines().count(), 5);
    assert!(stdout.lines().all(|l| l.starts_with("PASS ")));
}
