use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use crate::analysis::Report;
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub artifact: String,
    pub version: String,
    pub config_hash: String,
    pub config: RunConfig,
}

/// SHA-256 of the resolved config with the output directory left out, so the
/// same run lands in the same place under any output root.
pub fn config_hash(cfg: &RunConfig) -> String {
    let mut value = serde_json::to_value(cfg).expect("config serialises");
    if let Some(o) = value.as_object_mut() {
        o.remove("output");
    }
    let digest = Sha256::digest(value.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// `<output.dir>/<experiment>-<first 12 hex digits of the hash>`.
pub fn run_directory(cfg: &RunConfig) -> PathBuf {
    cfg.output
        .dir
        .join(format!("{}-{}", cfg.experiment.name(), &config_hash(cfg)[..12]))
}

fn write_atomically(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(tmp, path)?;
    Ok(())
}

/// Writes `manifest.json`, `verdict.json` and `data.csv` into the run directory.
pub fn emit(cfg: &RunConfig, report: &Report) -> Result<PathBuf> {
    let dir = run_directory(cfg);
    fs::create_dir_all(&dir)?;
    let manifest = Manifest {
        artifact: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_hash: config_hash(cfg),
        config: cfg.clone(),
    };
    write_atomically(&dir.join("manifest.json"), &serde_json::to_vec_pretty(&manifest)?)?;
    write_atomically(&dir.join("verdict.json"), &serde_json::to_vec_pretty(report)?)?;
    let mut csv = Vec::new();
    report.table.write_csv(&mut csv)?;
    write_atomically(&dir.join("data.csv"), &csv)?;
    Ok(dir)
}
