//! `manifest.json` run records.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Serialize)]
struct OutputFile {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    tool: &'static str,
    version: &'static str,
    threads: usize,
    config: &'a C,
    outputs: Vec<OutputFile>,
}

fn sha256_hex(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

/// Writes `dir/manifest.json` listing `outputs` (relative to `dir`).
pub fn write_manifest<C: Serialize>(dir: &Path, config: &C, outputs: &[PathBuf]) -> Result<()> {
    let outputs = outputs
        .iter()
        .map(|p| Ok(OutputFile { path: p.display().to_string(), sha256: sha256_hex(&dir.join(p))? }))
        .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest {
        tool: "matfun",
        version: env!("CARGO_PKG_VERSION"),
        threads: rayon::current_num_threads(),
        config,
        outputs,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    let path = dir.join("manifest.json");
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}
