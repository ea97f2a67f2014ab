//! Per-run manifest: the fully resolved configuration, seed, and hashes of
//! every artifact the run wrote, enough to reproduce the run byte-for-byte.
//! Real elapsed time lives here (and only here), keeping the data artifacts
//! bit-reproducible.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct ArtifactEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest<C: Serialize> {
    pub subcommand: String,
    pub run_id: String,
    pub seed: u64,
    pub config: C,
    pub outputs: Vec<ArtifactEntry>,
    pub elapsed_real_s: f64,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes =
        std::fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

/// Write `run_manifest.json` in `out_dir`, hashing the listed artifacts.
pub fn write_run_manifest<C: Serialize>(
    out_dir: &Path,
    subcommand: &str,
    run_id: &str,
    seed: u64,
    config: &C,
    outputs: &[PathBuf],
    elapsed_real_s: f64,
) -> Result<PathBuf> {
    let entries = outputs
        .iter()
        .map(|p| {
            Ok(ArtifactEntry {
                path: p
                    .strip_prefix(out_dir)
                    .unwrap_or(p)
                    .to_string_lossy()
                    .into_owned(),
                sha256: sha256_file(p)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = RunManifest {
        subcommand: subcommand.to_string(),
        run_id: run_id.to_string(),
        seed,
        config,
        outputs: entries,
        elapsed_real_s,
    };
    let path = out_dir.join("run_manifest.json");
    let json = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(&path, json).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}
