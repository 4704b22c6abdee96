//! Run manifests: what ran, with which settings, on which inputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Serialize)]
pub struct Manifest {
    subcommand: String,
    version: &'static str,
    args: Vec<String>,
    config: serde_json::Value,
    seeds: Vec<u64>,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
    phase_seconds: BTreeMap<String, f64>,
    #[serde(skip)]
    phase_start: Option<(String, Instant)>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

impl Manifest {
    pub fn new(subcommand: &str, args: &[String]) -> Self {
        Self {
            subcommand: subcommand.into(),
            version: env!("CARGO_PKG_VERSION"),
            args: args.to_vec(),
            config: serde_json::Value::Null,
            seeds: Vec::new(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            phase_seconds: BTreeMap::new(),
            phase_start: None,
        }
    }

    pub fn config<T: Serialize>(&mut self, config: &T) -> Result<()> {
        self.config = serde_json::to_value(config)?;
        Ok(())
    }

    pub fn seeds(&mut self, seeds: impl IntoIterator<Item = u64>) {
        self.seeds.extend(seeds);
    }

    /// Record digests of every regular file directly inside `dir`, or of `dir` itself if it is a file.
    pub fn input(&mut self, path: &Path) -> Result<()> {
        for f in files_in(path)? {
            self.inputs.insert(f.display().to_string(), sha256_file(&f)?);
        }
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<()> {
        self.outputs.insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    pub fn phase(&mut self, name: &str) {
        self.end_phase();
        self.phase_start = Some((name.to_string(), Instant::now()));
    }

    fn end_phase(&mut self) {
        if let Some((name, start)) = self.phase_start.take() {
            *self.phase_seconds.entry(name).or_default() += start.elapsed().as_secs_f64();
        }
    }

    /// Write `manifest.json` via a temporary file and a rename.
    pub fn write(mut self, dir: &Path) -> Result<()> {
        self.end_phase();
        let tmp = dir.join(format!(".{MANIFEST_FILE}.tmp"));
        std::fs::write(&tmp, serde_json::to_string_pretty(&self)?)?;
        std::fs::rename(&tmp, dir.join(MANIFEST_FILE))?;
        Ok(())
    }
}

fn files_in(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)
        .with_context(|| format!("listing {}", path.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    Ok(files)
}
