use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use zk_core::snapshot::load_snapshot;

fn zk_lab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zk-lab"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const SMALL: &str = "seed = 7\n[grid]\nnx = 128\nny = 8\nhalf_width = 30.0\nperiod = 1.0\n";

#[test]
fn dry_run_prints_plan_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = zk_lab(&["spectrum", "--config", &cfg, "--dry-run", "--out", "res"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let plan: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(plan["subcommand"], "spectrum");
    assert_eq!(plan["config"]["seed"], 7);
    assert!(!dir.path().join("res").exists());
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = zk_lab(&["simulate", "--config", &cfg, "--dry-run", "--seed", "11"], dir.path());
    let plan: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(plan["config"]["seed"], 11);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "[physics]\nc_star = -1.0\n");
    let out = zk_lab(&["spectrum", "--config", &bad], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("c_star"));

    let unknown = write_config(dir.path(), "[grid]\nnx = 64\ncolour = 1\n");
    assert_eq!(zk_lab(&["spectrum", "--config", &unknown], dir.path()).status.code(), Some(2));

    let missing = zk_lab(&["spectrum", "--config", "nope.toml"], dir.path());
    assert_eq!(missing.status.code(), Some(4));

    let sub = write_config(dir.path(), &format!("{SMALL}[physics]\nc_star = 0.5\n"));
    assert_eq!(zk_lab(&["shoot", "--config", &sub], dir.path()).status.code(), Some(2));

    let blow = write_config(
        dir.path(),
        &format!("{SMALL}[integrator]\nt_end = 0.1\nblowup_bound = 0.1\n"),
    );
    assert_eq!(zk_lab(&["simulate", "--config", &blow, "--out", "b"], dir.path()).status.code(), Some(3));
}

#[test]
fn spectrum_report_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    assert!(zk_lab(&["spectrum", "--config", &cfg, "--out", "a"], dir.path()).status.success());
    assert!(zk_lab(&["spectrum", "--config", &cfg, "--out", "b"], dir.path()).status.success());
    let a = fs::read(dir.path().join("a/report.json")).unwrap();
    let b = fs::read(dir.path().join("b/report.json")).unwrap();
    assert_eq!(a, b);
    let r: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(r["results"]["n0"], 2);
    assert_eq!(r["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn simulate_writes_table_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &format!("{SMALL}[integrator]\ndt = 0.05\nt_end = 0.5\nsnapshot_every = 5\n"),
    );
    let out = zk_lab(&["simulate", "--config", &cfg, "--out", "sim"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("sim/diagnostics.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,M,E,S_c,c,rho,v_norm");
    assert!(lines.next().unwrap().ends_with(",,,"));
    assert_eq!(csv.lines().count(), 12);
    let (h, f) = load_snapshot(&dir.path().join("sim/snapshot_00002.bin")).unwrap();
    assert_eq!((h.nx, h.ny), (128, 8));
    assert!((h.time - 0.5).abs() < 1e-12);
    assert!(f.is_finite());
    let report = fs::read_to_string(dir.path().join("sim/report.json")).unwrap();
    assert!(report.contains(&format!("\"config_hash\": \"{}\"", h.config_hash)));
}
