//! Staged output directories with a checksummed manifest.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub experiment: String,
    pub config: serde_json::Value,
    pub config_sha256: String,
    pub seed_override: Option<u64>,
    pub threads: usize,
    pub started_unix: u64,
    pub wall_clock_seconds: f64,
    pub files: Vec<FileEntry>,
    pub summary: serde_json::Value,
}

pub fn sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn check_fresh(dir: &Path) -> Result<()> {
    if dir.exists() {
        bail!("output directory {} already exists", dir.display());
    }
    Ok(())
}

fn staging_path(dir: &Path) -> PathBuf {
    let name = dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    dir.with_file_name(format!(".{name}.partial-{}", std::process::id()))
}

/// Writes everything into a sibling staging directory, then renames it into
/// place; on failure the staging directory is removed.
pub fn commit(dir: &Path, files: Vec<(String, Vec<u8>)>, mut manifest: RunManifest) -> Result<()> {
    check_fresh(dir)?;
    if let Some(parent) = dir.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let stage = staging_path(dir);
    let result = (|| -> Result<()> {
        fs::create_dir(&stage).with_context(|| format!("creating {}", stage.display()))?;
        for (name, bytes) in &files {
            fs::write(stage.join(name), bytes).with_context(|| format!("writing {name}"))?;
            manifest.files.push(FileEntry { path: name.clone(), bytes: bytes.len() as u64, sha256: sha256(bytes) });
        }
        fs::write(stage.join(MANIFEST), serde_json::to_vec_pretty(&manifest)?)?;
        fs::rename(&stage, dir).with_context(|| format!("moving results to {}", dir.display()))?;
        Ok(())
    })();
    if result.is_err() {
        let _ = fs::remove_dir_all(&stage);
    }
    result
}
