//! Run manifest: written before compute starts and finalized afterwards,
//! whether the run succeeded or not.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Completed,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub kind: String,
    pub message: String,
}

impl From<&Error> for ErrorReport {
    fn from(e: &Error) -> Self {
        ErrorReport {
            kind: e.kind().to_string(),
            message: e.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub status: RunStatus,
    /// SHA-256 of the config file exactly as read.
    pub config_sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_path: Option<PathBuf>,
    /// Config after command-line and environment overrides.
    pub effective_config: serde_json::Value,
    pub seed: u64,
    pub threads: usize,
    pub code_version: String,
    pub started_at: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<String>,
    pub files: Vec<FileEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorReport>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn start(
        command: &str,
        config_text: &str,
        config_path: Option<&Path>,
        effective_config: serde_json::Value,
        seed: u64,
        threads: usize,
    ) -> Self {
        RunManifest {
            command: command.to_string(),
            status: RunStatus::Running,
            config_sha256: sha256_hex(config_text.as_bytes()),
            config_path: config_path.map(Path::to_path_buf),
            effective_config,
            seed,
            threads,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            started_at: now(),
            finished_at: None,
            files: Vec::new(),
            error: None,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        super::report::write_json(&dir.join(MANIFEST_FILE), self)
    }

    /// Records the outcome and an inventory of every other file in `dir`.
    pub fn finish(&mut self, dir: &Path, outcome: Option<&Error>) -> Result<()> {
        self.status = if outcome.is_some() {
            RunStatus::Failed
        } else {
            RunStatus::Completed
        };
        self.error = outcome.map(ErrorReport::from);
        self.finished_at = Some(now());
        self.files = inventory(dir)?;
        self.write(dir)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Output(format!("{}: {e}", path.display())))
    }
}

/// Files directly inside `dir` (recursing into subdirectories), sorted by
/// path, excluding the manifest itself.
pub fn inventory(dir: &Path) -> Result<Vec<FileEntry>> {
    let mut out = Vec::new();
    collect(dir, dir, &mut out)?;
    out.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(out)
}

fn collect(root: &Path, dir: &Path, out: &mut Vec<FileEntry>) -> Result<()> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            collect(root, &path, out)?;
            continue;
        }
        let rel = path.strip_prefix(root).unwrap_or(&path);
        if rel == Path::new(MANIFEST_FILE) {
            continue;
        }
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        out.push(FileEntry {
            path: rel.to_string_lossy().replace('\\', "/"),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(&bytes),
        });
    }
    Ok(())
}
