//! Run manifest: config echo, checksums of emitted tables, hypothesis record.
//!
//! Every file goes through a temporary sibling and a rename, and the manifest
//! is written last, so a manifest never lists a file that is not complete.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, Mode, RawConfig};
use crate::run::RunOutput;
use crate::CliError;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub name: String,
    pub sha256: String,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub kind: String,
    pub exit_code: i32,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub mode: Mode,
    pub status: String,
    pub started_at: String,
    pub finished_at: String,
    pub config: Option<RawConfig>,
    pub resolved: Value,
    pub hypotheses: Value,
    pub summary: Value,
    pub files: Vec<FileRecord>,
    pub error: Option<ErrorRecord>,
}

fn stamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `bytes` to `dir/name` through a temporary file and a rename.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, &target)?;
    Ok(target)
}

fn base(mode: Mode, started: DateTime<Utc>, config: Option<RawConfig>) -> RunManifest {
    RunManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        mode,
        status: String::new(),
        started_at: stamp(started),
        finished_at: String::new(),
        config,
        resolved: Value::Null,
        hypotheses: Value::Null,
        summary: Value::Null,
        files: Vec::new(),
        error: None,
    }
}

fn finish(dir: &Path, mut manifest: RunManifest) -> Result<RunManifest, CliError> {
    manifest.finished_at = stamp(Utc::now());
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    write_atomic(dir, MANIFEST_NAME, text.as_bytes())?;
    Ok(manifest)
}

/// Emits the tables, then the manifest listing them.
pub fn write_success(
    dir: &Path,
    cfg: &ExperimentConfig,
    output: &RunOutput,
    started: DateTime<Utc>,
) -> Result<RunManifest, CliError> {
    fs::create_dir_all(dir)?;
    let mut manifest = base(cfg.mode, started, Some(cfg.echo.clone()));
    for table in &output.tables {
        let bytes = table.to_csv();
        write_atomic(dir, &table.file_name(), &bytes)?;
        manifest.files.push(FileRecord {
            name: table.file_name(),
            sha256: sha256_hex(&bytes),
            rows: table.rows.len(),
        });
    }
    manifest.status = "ok".into();
    manifest.resolved = output.resolved.clone();
    manifest.hypotheses = output.hypotheses.clone();
    manifest.summary = output.summary.clone();
    finish(dir, manifest)
}

/// Records a failed run. No tables are written, and tables left by an
/// earlier run in the same directory are removed so none can be mistaken
/// for this run's output.
pub fn write_failure(
    dir: &Path,
    mode: Mode,
    echo: Option<&RawConfig>,
    err: &CliError,
    started: DateTime<Utc>,
) -> Result<RunManifest, CliError> {
    fs::create_dir_all(dir)?;
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "csv") {
            fs::remove_file(path)?;
        }
    }
    let mut manifest = base(mode, started, echo.cloned());
    manifest.status = "error".into();
    manifest.error = Some(ErrorRecord {
        kind: err.kind().into(),
        exit_code: err.exit_code(),
        message: err.to_string(),
    });
    finish(dir, manifest)
}

/// Reads a manifest back and checks every listed checksum.
pub fn verify(dir: &Path) -> Result<RunManifest, CliError> {
    let text = fs::read_to_string(dir.join(MANIFEST_NAME))?;
    let manifest: RunManifest = serde_json::from_str(&text).map_err(|e| CliError::Io(e.to_string()))?;
    for f in &manifest.files {
        let bytes = fs::read(dir.join(&f.name))?;
        if sha256_hex(&bytes) != f.sha256 {
            return Err(CliError::Io(format!("checksum mismatch for {}", f.name)));
        }
    }
    Ok(manifest)
}
