mod common;

use std::path::{Path, PathBuf};
use std::process::Command;

use lukars::pipeline::{cmd_invert, cmd_simulate, cmd_subspace, PipelineConfig};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn center_parameters_reproduce_the_frozen_discharge() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig {
        forcing: Some(data("forcing.csv")),
        forcing_config: Some(data("forcing.cfg")),
        catchment: Some(data("catchment.cfg")),
        params: Some(data("center.csv")),
        out_dir: dir.path().to_path_buf(),
        ..Default::default()
    };
    let r = cmd_simulate(&cfg).unwrap();
    assert_eq!(read(r.path), read(data("center_discharge.csv")));
}

#[test]
fn missing_temperature_column_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let forcing = dir.path().join("forcing.csv");
    let text: String = read(data("forcing.csv"))
        .lines()
        .map(|l| l.rsplit_once(',').unwrap().0.to_string() + "\n")
        .collect();
    std::fs::write(&forcing, text).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_lukars"))
        .arg("simulate")
        .arg("--forcing")
        .arg(&forcing)
        .arg("--catchment")
        .arg(data("catchment.cfg"))
        .arg("--params")
        .arg(data("center.csv"))
        .arg("-o")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("temp_c"), "{err}");
}

#[test]
fn cli_flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "n_steps = 500\nburn_in = 100\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_lukars"))
        .args(["invert", "--burn-in", "800", "--catchment"])
        .arg(data("catchment.cfg"))
        .arg("-c")
        .arg(&cfg)
        .arg("-o")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("burn_in (800)"));

    let out = Command::new(env!("CARGO_BIN_EXE_lukars"))
        .args(["synthetic", "--years", "1", "--eta", "0.1", "-o"])
        .arg(dir.path().join("twin"))
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(read(dir.path().join("twin/twin.cfg")).contains("eta = 0.1"));
}

#[test]
fn sweep_uses_the_closed_form_evaluation_count() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = common::quick(common::twin(dir.path(), 1, 2));
    cfg.n_gradients = 25;
    let (a, ledger) = cmd_subspace(&cfg).unwrap();
    assert_eq!(a.evaluations, 25 * 43);
    let stage = ledger.stages.iter().find(|s| s.name == "gradients").unwrap();
    assert_eq!(stage.evaluations, 25 * 43);
    assert_eq!(stage.expected_evaluations, Some(25 * 43));
}

#[test]
fn repeated_runs_with_one_seed_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::quick(common::twin(dir.path(), 1, 4));
    cmd_invert(&cfg).unwrap();
    let first = read(cfg.out_dir.join("ensemble.csv"));
    let mut again = cfg.clone();
    again.out_dir = dir.path().join("again");
    std::fs::create_dir_all(&again.out_dir).unwrap();
    cmd_invert(&again).unwrap();
    assert_eq!(first, read(again.out_dir.join("ensemble.csv")));
    assert_eq!(read(cfg.out_dir.join("surrogate.csv")), read(again.out_dir.join("surrogate.csv")));
}

#[test]
fn stored_subspace_gives_the_same_inversion() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::quick(common::twin(dir.path(), 1, 5));
    cmd_invert(&cfg).unwrap();

    let mut staged = cfg.clone();
    staged.out_dir = dir.path().join("sub");
    std::fs::create_dir_all(&staged.out_dir).unwrap();
    cmd_subspace(&staged).unwrap();
    staged.subspace_dir = Some(staged.out_dir.clone());
    staged.out_dir = dir.path().join("inv");
    std::fs::create_dir_all(&staged.out_dir).unwrap();
    cmd_invert(&staged).unwrap();

    for f in ["ensemble.csv", "surrogate.csv"] {
        assert_eq!(read(cfg.out_dir.join(f)), read(staged.out_dir.join(f)), "{f}");
    }
}

#[test]
fn uninformative_data_returns_the_prior() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = common::quick(common::twin(dir.path(), 1, 6));
    cfg.eta = 1e6;
    cfg.prior_samples = 100_000;
    cfg.n_steps = 60_000;
    cfg.burn_in = 5000;
    cfg.n_z = 10;
    let (r, _) = cmd_invert(&cfg).unwrap();
    let n = r.ensemble.len() as f64;
    assert!(n >= 500.0, "ensemble of {n}");
    for (j, (m, s)) in r.ensemble.calibration_moments().into_iter().enumerate() {
        assert!(m.abs() < 0.04, "coordinate {j}: mean {m}");
        assert!((s - 3f64.sqrt().recip()).abs() < 0.04, "coordinate {j}: std {s}");
    }
}
