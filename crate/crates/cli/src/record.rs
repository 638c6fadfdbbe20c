//! Run records: an append-only audit trail of every invocation.
//!
//! Each run appends one JSON record named after its start time and config
//! hash; records are never rewritten. Timestamps live only here — report
//! files carry no clock data, so reruns with the same config and seed
//! reproduce them byte for byte.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::CliError;

/// Bumped whenever the layout of the emitted files changes.
pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub artifact_version: u32,
    pub tool_version: String,
    pub experiment: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub started_utc: String,
    pub finished_utc: String,
    /// report files written by this run, relative to the output directory
    pub outputs: Vec<String>,
    /// None when the experiment is purely descriptive
    pub pass: Option<bool>,
    pub summary: String,
}

impl RunRecord {
    pub fn pass_label(&self) -> &'static str {
        match self.pass {
            Some(true) => "pass",
            Some(false) => "FAIL",
            None => "n/a",
        }
    }
}

/// SHA-256 of the canonical config encoding (effective seed included,
/// output location excluded).
pub fn config_hash(config: &ExperimentConfig) -> Result<String, CliError> {
    let canonical = config.canonical_json()?;
    Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
}

/// Writes `bytes` to `path` through a sibling temp file plus rename, so a
/// crash never leaves a half-written report behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp-{}",
        path.extension().and_then(|e| e.to_str()).unwrap_or("out"),
        std::process::id()
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

/// Appends a record to `dir`, never touching existing ones. The filename
/// sorts by start time; a counter suffix separates same-millisecond runs.
pub fn append_record(dir: &Path, record: &RunRecord) -> Result<PathBuf, CliError> {
    let stamp: String = record
        .started_utc
        .chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .collect();
    let body = serde_json::to_vec_pretty(record)
        .map_err(|e| CliError::Internal(format!("record encode: {e}")))?;
    let short = &record.config_hash[..12.min(record.config_hash.len())];
    for attempt in 0u32.. {
        let name = if attempt == 0 {
            format!("run-{stamp}-{short}.json")
        } else {
            format!("run-{stamp}-{short}-{attempt}.json")
        };
        let path = dir.join(name);
        if path.exists() {
            continue;
        }
        write_atomic(&path, &body)
            .map_err(|e| CliError::Internal(format!("write {}: {e}", path.display())))?;
        return Ok(path);
    }
    unreachable!("record filename search is unbounded")
}

/// Reads every `run-*.json` in `dir`, oldest first. Records that fail to
/// parse are returned separately as warnings instead of aborting the
/// listing.
pub fn list_runs(dir: &Path) -> Result<(Vec<RunRecord>, Vec<String>), CliError> {
    let entries = fs::read_dir(dir)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", dir.display())))?;
    let mut records = Vec::new();
    let mut corrupted = Vec::new();
    let mut names: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("run-") && n.ends_with(".json"))
        })
        .collect();
    names.sort();
    for path in names {
        match fs::read_to_string(&path)
            .map_err(|e| e.to_string())
            .and_then(|raw| serde_json::from_str::<RunRecord>(&raw).map_err(|e| e.to_string()))
        {
            Ok(rec) => records.push(rec),
            Err(_) => corrupted.push(path.display().to_string()),
        }
    }
    records.sort_by(|a, b| a.started_utc.cmp(&b.started_utc));
    Ok((records, corrupted))
}
