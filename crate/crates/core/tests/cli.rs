use std::fs;
use std::path::Path;
use std::process::Command;

use interface_pinning::cli::{self, Experiment, RunConfig, WORKERS_ENV};

const BIN: &str = env!("CARGO_BIN_EXE_interface-pinning");

const QUICK_PINV: &str = r#"
experiment = "pinv"

[model]
l_list = [3, 4, 6, 8]

[pinning]
variant = "delta"

[chain]
burn_in = 100
sweeps = 400
replicas = 3
seed = 11
"#;

fn artifacts(dir: &Path) -> Vec<Vec<u8>> {
    ["manifest.json", "verdict.json", "data.csv"]
        .iter()
        .map(|f| fs::read(dir.join(f)).unwrap())
        .collect()
}

fn write_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("pinv.toml");
    fs::write(&path, QUICK_PINV).unwrap();
    path
}

#[test]
fn list_names_every_experiment() {
    let out = Command::new(BIN).arg("list").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for e in Experiment::ALL {
        assert!(text.contains(e.name()), "{} missing from list", e.name());
    }
}

#[test]
fn outputs_are_identical_across_runs_and_worker_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path());
    let out_dir = tmp.path().join("runs");
    let set_dir = format!("output.dir=\"{}\"", out_dir.display());
    let mut seen = Vec::new();
    for workers in ["1", "1", "3"] {
        let out = Command::new(BIN)
            .env(WORKERS_ENV, workers)
            .args(["run", config.to_str().unwrap(), "--set", &set_dir])
            .output()
            .unwrap();
        assert!(matches!(out.status.code(), Some(0 | 2)), "{out:?}");
        let cfg = RunConfig::load(&config, &[set_dir.clone()]).unwrap();
        seen.push(artifacts(&cli::run_directory(&cfg)));
    }
    assert_eq!(seen[0], seen[1]);
    assert_eq!(seen[0], seen[2]);
}

#[test]
fn manifest_reruns_to_the_same_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = RunConfig::from_toml_str(
        QUICK_PINV,
        &[format!("output.dir=\"{}\"", tmp.path().join("runs").display())],
    )
    .unwrap();
    let first = cli::run(&cfg, Some(1)).unwrap();
    let again = RunConfig::load(&first.dir.join("manifest.json"), &[]).unwrap();
    assert_eq!(again, cfg);
    let before = artifacts(&first.dir);
    let second = cli::run(&again, Some(2)).unwrap();
    assert_eq!(second.dir, first.dir);
    assert_eq!(artifacts(&second.dir), before);
}

#[test]
fn overrides_change_the_hash() {
    let base = RunConfig::from_toml_str(QUICK_PINV, &[]).unwrap();
    let seeded = RunConfig::from_toml_str(QUICK_PINV, &["chain.seed=12".into()]).unwrap();
    assert_eq!(seeded.chain.seed, 12);
    assert_ne!(cli::config_hash(&base), cli::config_hash(&seeded));
}

#[test]
fn unknown_key_exits_with_error() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path());
    let out = Command::new(BIN)
        .args(["run", config.to_str().unwrap(), "--set", "chain.sweepz=10"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sweepz"));
}

#[test]
fn bad_worker_count_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path());
    let out = Command::new(BIN)
        .env(WORKERS_ENV, "zero")
        .args(["run", config.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}
