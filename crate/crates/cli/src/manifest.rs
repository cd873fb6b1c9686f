use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::args::Command;

pub const MANIFEST: &str = "manifest.json";

/// Resolved invocation plus content hashes of everything it read and wrote.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: Command,
    /// Fully resolved configuration after flag overrides.
    pub resolved: serde_json::Value,
    /// Absolute input path → sha256.
    pub inputs: BTreeMap<String, String>,
    /// Output path relative to the out-dir → sha256.
    pub outputs: BTreeMap<String, String>,
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

pub fn hash_inputs(paths: &[PathBuf]) -> std::io::Result<BTreeMap<String, String>> {
    paths
        .iter()
        .map(|p| Ok((p.display().to_string(), sha256_file(p)?)))
        .collect()
}

pub fn hash_outputs(out_dir: &Path, names: &[String]) -> std::io::Result<BTreeMap<String, String>> {
    names
        .iter()
        .map(|n| Ok((n.clone(), sha256_file(&out_dir.join(n))?)))
        .collect()
}

pub fn write_manifest(out_dir: &Path, manifest: &Manifest) -> mpa_core::Result<()> {
    let text = serde_json::to_string_pretty(manifest)?;
    fs::write(out_dir.join(MANIFEST), text + "\n")?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> mpa_core::Result<Manifest> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}
