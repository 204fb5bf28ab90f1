mod common;

use std::path::Path;
use std::process::{Command, Output};

use lrbas::experiment::{
    load_report, read_layout_grid, read_pgm, read_residuals, read_summary, summary_rows,
    ExperimentConfig, FAILED_MARKER, SUMMARY_FILE,
};

fn small_config(out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.grid.elements = 40;
    cfg.decomposition.subdomains = 4;
    cfg.decomposition.overlap = 2;
    cfg.geometry = common::small_geometry();
    cfg.output.dir = out.to_path_buf();
    cfg
}

fn lrbas_cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lrbas"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn solve(config: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["solve", "--config", config.to_str().unwrap()];
    args.extend_from_slice(extra);
    lrbas_cli(&args)
}

#[test]
fn report_round_trips_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("config.json");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    std::fs::write(&cfg_path, small_config(&a).to_json()).unwrap();

    let first = solve(&cfg_path, &[]);
    assert!(
        first.status.success(),
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    let second = solve(&cfg_path, &["--out", b.to_str().unwrap()]);
    assert!(second.status.success());
    assert_eq!(
        std::fs::read(a.join(SUMMARY_FILE)).unwrap(),
        std::fs::read(b.join(SUMMARY_FILE)).unwrap()
    );

    let (cfg, report) = load_report(&a).unwrap();
    assert_eq!(cfg, small_config(&a));
    assert_eq!(
        read_summary(&a.join(SUMMARY_FILE)).unwrap(),
        summary_rows(&report)
    );
    for p in &report.problems {
        let grid = read_layout_grid(&a.join(format!("corrections_{}.csv", p.k))).unwrap();
        assert_eq!(grid, p.corrections);
        let history = read_residuals(&a.join(format!("residuals_{}.csv", p.k))).unwrap();
        assert_eq!(history, p.residual_history);
        let (w, h, _) = read_pgm(&a.join(format!("solution_{}.pgm", p.k))).unwrap();
        assert_eq!((w, h), (41, 41));
        let (w, h, _) = read_pgm(&a.join(format!("sigma_{}.pgm", p.k))).unwrap();
        assert_eq!((w, h), (40, 40));
    }
    assert!(!a.join(FAILED_MARKER).exists());

    let cmp = tmp.path().join("cmp");
    let out = lrbas_cli(&[
        "compare",
        a.to_str().unwrap(),
        b.to_str().unwrap(),
        "--out",
        cmp.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(cmp.join("comparison.csv").exists());
}

#[test]
fn zero_overlap_is_a_configuration_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("config.json");
    std::fs::write(&cfg_path, small_config(&tmp.path().join("r")).to_json()).unwrap();
    let out = solve(&cfg_path, &["--overlap", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("decomposition.overlap"));
}

#[test]
fn unknown_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("config.json");
    std::fs::write(&cfg_path, r#"{"grid": {"elements": 40, "cells": 3}}"#).unwrap();
    let out = solve(&cfg_path, &[]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn non_convergence_exits_two_and_keeps_partial_report() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("r");
    let mut cfg = small_config(&dir);
    cfg.solver.max_iter = 1;
    let cfg_path = tmp.path().join("config.json");
    std::fs::write(&cfg_path, cfg.to_json()).unwrap();
    let out = solve(&cfg_path, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(dir.join(FAILED_MARKER).exists());
    assert!(dir.join(SUMMARY_FILE).exists());
}
