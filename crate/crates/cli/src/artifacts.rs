//! Atomic artifact output and the run manifest.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::Failure;

#[derive(Debug, Clone, Serialize)]
pub struct ArtifactEntry {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Output directory plus the list of files written so far.
#[derive(Debug)]
pub struct Artifacts {
    dir: PathBuf,
    pub written: Vec<ArtifactEntry>,
}

impl Artifacts {
    pub fn new(dir: &Path) -> Result<Self, Failure> {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Renders into memory, then writes a temp file beside the target and
    /// renames it into place.
    pub fn write_with<F>(&mut self, name: &str, render: F) -> Result<(), Failure>
    where
        F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    {
        let mut buf = Vec::new();
        render(&mut buf).map_err(|e| Failure::Io(format!("{name}: {e}")))?;
        let entry =
            ArtifactEntry { file: name.to_string(), bytes: buf.len() as u64, sha256: hex(&Sha256::digest(&buf)) };
        write_atomic(&self.dir.join(name), &buf)?;
        self.written.retain(|a| a.file != name);
        self.written.push(entry);
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), Failure> {
        self.write_with(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            w.write_all(b"\n")
        })
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let io = |e: std::io::Error| Failure::Io(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: Value,
    pub seed: Option<u64>,
    pub threads: usize,
    pub status: &'static str,
    pub reason: Option<String>,
    pub drift: Value,
    pub summary: Value,
    pub wall_time_s: f64,
    pub artifacts: Vec<ArtifactEntry>,
}
