//! Report files: JSON summaries and CSV tables.
//!
//! Every report embeds the config hash and the claim tags it speaks to
//! (the registry is documented in the README). Floats print in shortest
//! round-trip form, so equal numbers give equal bytes.

use std::path::{Path, PathBuf};

use crate::record::write_atomic;
use crate::CliError;

/// Shortest decimal that parses back to exactly `v`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Collects the files one run writes, all atomically, all under one
/// directory, all stamped with the same config hash.
pub struct Reporter {
    dir: PathBuf,
    config_hash: String,
    files: Vec<String>,
}

impl Reporter {
    pub fn new(dir: &Path, config_hash: &str) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Internal(format!("create {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            config_hash: config_hash.to_string(),
            files: Vec::new(),
        })
    }

    pub fn into_files(self) -> Vec<String> {
        self.files
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        write_atomic(&path, bytes)
            .map_err(|e| CliError::Internal(format!("write {}: {e}", path.display())))?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// JSON report: `{config_hash, claims, report}`.
    pub fn write_json(
        &mut self,
        name: &str,
        claims: &[&str],
        report: serde_json::Value,
    ) -> Result<(), CliError> {
        let doc = serde_json::json!({
            "config_hash": self.config_hash,
            "claims": claims,
            "report": report,
        });
        let mut body = serde_json::to_vec_pretty(&doc)
            .map_err(|e| CliError::Internal(format!("encode {name}: {e}")))?;
        body.push(b'\n');
        self.write(name, &body)
    }

    /// CSV table: two `#` comment lines (config hash, claim tags), then a
    /// header row, then the data rows.
    pub fn write_csv(
        &mut self,
        name: &str,
        claims: &[&str],
        header: &[&str],
        rows: &[Vec<String>],
    ) -> Result<(), CliError> {
        let mut out = String::new();
        out.push_str(&format!("# config_hash: {}\n", self.config_hash));
        out.push_str(&format!("# claims: {}\n", claims.join(" ")));
        out.push_str(&header.join(","));
        out.push('\n');
        for row in rows {
            debug_assert_eq!(row.len(), header.len());
            out.push_str(&row.join(","));
            out.push('\n');
        }
        self.write(name, out.as_bytes())
    }
}
