//! The `bslqb` binary end to end.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bslqb::io::{load_config, read_frame};
use bslqb::sim::SceneConfig;

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn bslqb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bslqb"))
        .args(args)
        .env_remove("BSLQB_THREADS")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, cfg: &SceneConfig) -> PathBuf {
    let path = dir.join(format!("{}.json", cfg.scene));
    std::fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}

#[test]
fn validate_accepts_every_shipped_config() {
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let out = bslqb(&["validate", path.to_str().unwrap()]);
        assert!(out.status.success(), "{}", path.display());
        assert_eq!(String::from_utf8_lossy(&out.stdout), "OK\n");
    }
}

#[test]
fn unknown_subcommand_prints_usage_and_exits_2() {
    let out = bslqb(&["simulate", "scene.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn invalid_config_exits_1_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"scene": "standing_pool", "cells": [32, 32], "dx": -1.0}"#,
    )
    .unwrap();
    let out = bslqb(&["validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn zero_threads_is_rejected() {
    let path = configs().join("standing_pool.json");
    let out = bslqb(&["--threads", "0", "validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let out = Command::new(env!("CARGO_BIN_EXE_bslqb"))
        .args(["validate", path.to_str().unwrap()])
        .env("BSLQB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn run_writes_diagnostics_frames_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = load_config(configs().join("standing_pool.json")).unwrap();
    cfg.cells = [16, 16];
    cfg.dx = 1.0 / 16.0;
    cfg.steps = Some(4);
    cfg.output.frame_every = 2;
    let path = write_config(dir.path(), &cfg);
    let out_dir = dir.path().join("out");
    let out = bslqb(&[
        "--threads",
        "1",
        "--out",
        out_dir.to_str().unwrap(),
        "run",
        path.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let csv = std::fs::read_to_string(out_dir.join("diagnostics.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header[..4], ["step", "time", "dt", "kinetic_energy"]);
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 4);
    for (k, r) in rows.iter().enumerate() {
        assert_eq!(r.len(), header.len());
        assert_eq!(r[0], (k + 1) as f64);
        assert!(r.iter().all(|v| v.is_finite()));
    }

    // frames at steps 0, 2 and 4
    for frame in 0..3 {
        let f = read_frame(out_dir.join(format!("velocity_{frame:05}.bin"))).unwrap();
        assert_eq!((f.name.as_str(), f.components), ("velocity", 2));
    }
    // no pressure before the first projection
    assert!(!out_dir.join("pressure_00000.bin").exists());
    for frame in 1..3 {
        let p = read_frame(out_dir.join(format!("pressure_{frame:05}.bin"))).unwrap();
        assert_eq!(p.components, 1);
    }
    assert!(!out_dir.join("velocity_00003.bin").exists());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["steps"], 4);
    assert_eq!(summary["frames"], 3);
}

#[test]
fn convergence_writes_errors_csv() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = load_config(configs().join("burgers_convergence.json")).unwrap();
    cfg.convergence.levels = vec![8, 16, 32];
    let path = write_config(dir.path(), &cfg);
    let out = bslqb(&[
        "--out",
        dir.path().to_str().unwrap(),
        "convergence",
        path.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("slopes:"));
    let csv = std::fs::read_to_string(dir.path().join("errors.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "dx,error_sl,error_bslqb_l1,error_bslqb_lc");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("0.125,"));
}
