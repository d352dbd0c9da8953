//! Report files and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::RunError;

pub const MANIFEST: &str = "manifest.json";

/// A CSV table with a fixed header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table { name: name.to_string(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// Shortest round-trip formatting, so reports are reproducible bytewise.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub pipeline: String,
    pub config_hash: String,
    pub seed: u64,
    pub versions: BTreeMap<String, String>,
    pub config: ExperimentConfig,
    /// Per-step status lines; failures are annotated here.
    pub steps: Vec<Step>,
    pub result: serde_json::Value,
    #[serde(skip)]
    pub tables: Vec<Table>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Step {
    pub name: String,
    pub ok: bool,
    pub detail: String,
}

pub fn versions() -> BTreeMap<String, String> {
    let mut v = BTreeMap::new();
    v.insert("seqrpf".to_string(), env!("CARGO_PKG_VERSION").to_string());
    v.insert("seqrpf-core".to_string(), seqrpf_core::VERSION.to_string());
    v
}

/// Writes `<pipeline>.json` and one `<pipeline>-<table>.csv` per table;
/// returns the written paths.
pub fn write_report(dir: &Path, report: &Report) -> Result<Vec<PathBuf>, RunError> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let json = dir.join(format!("{}.json", report.pipeline));
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    fs::write(&json, text)?;
    written.push(json);
    for t in &report.tables {
        let path = dir.join(format!("{}-{}.csv", report.pipeline, t.name));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(&t.header)?;
        for r in &t.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Mismatch {
    pub path: String,
    pub recorded: String,
    pub actual: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub versions: BTreeMap<String, String>,
    pub artifacts: Vec<Artifact>,
    /// Files whose contents no longer match the previous manifest.
    #[serde(default)]
    pub mismatches: Vec<Mismatch>,
}

pub fn sha256_file(path: &Path) -> Result<String, RunError> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

fn read_manifest(dir: &Path) -> Result<Option<Manifest>, RunError> {
    let p = dir.join(MANIFEST);
    if !p.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(p)?;
    Ok(Some(serde_json::from_str(&text)?))
}

/// Files of the previous manifest whose checksum changed or that vanished.
pub fn verify_manifest(dir: &Path) -> Result<Vec<Mismatch>, RunError> {
    let m = match read_manifest(dir)? {
        Some(m) => m,
        None => return Err(RunError::validation(format!("no {MANIFEST} in {}", dir.display()))),
    };
    let mut out = Vec::new();
    for a in &m.artifacts {
        let p = dir.join(&a.path);
        let actual = if p.exists() { Some(sha256_file(&p)?) } else { None };
        if actual.as_deref() != Some(a.sha256.as_str()) {
            out.push(Mismatch { path: a.path.clone(), recorded: a.sha256.clone(), actual });
        }
    }
    Ok(out)
}

/// Lists every artifact in `dir` with its checksum. Artifacts that changed
/// since the previous manifest without being rewritten by this run (not in
/// `fresh`) are flagged.
pub fn emit_manifest(dir: &Path, config_hash: &str, seeds: &[u64], fresh: &[PathBuf]) -> Result<Manifest, RunError> {
    if !dir.is_dir() {
        return Err(RunError::Io(std::io::Error::new(std::io::ErrorKind::NotFound, format!("{} is not a directory", dir.display()))));
    }
    let previous = read_manifest(dir)?;
    let fresh: Vec<String> = fresh.iter().filter_map(|p| p.file_name().map(|s| s.to_string_lossy().into_owned())).collect();
    let mut names: Vec<String> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_file())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n != MANIFEST)
        .collect();
    names.sort();
    let mut artifacts = Vec::new();
    for n in &names {
        let p = dir.join(n);
        artifacts.push(Artifact { path: n.clone(), sha256: sha256_file(&p)?, bytes: fs::metadata(&p)?.len() });
    }
    let mut mismatches = Vec::new();
    if let Some(prev) = previous {
        for a in prev.artifacts {
            if fresh.contains(&a.path) {
                continue;
            }
            let now = artifacts.iter().find(|b| b.path == a.path).map(|b| b.sha256.clone());
            if now.as_deref() != Some(a.sha256.as_str()) {
                mismatches.push(Mismatch { path: a.path, recorded: a.sha256, actual: now });
            }
        }
    }
    let m = Manifest { config_hash: config_hash.to_string(), seeds: seeds.to_vec(), versions: versions(), artifacts, mismatches };
    let mut text = serde_json::to_string_pretty(&m)?;
    text.push('\n');
    fs::write(dir.join(MANIFEST), text)?;
    Ok(m)
}
