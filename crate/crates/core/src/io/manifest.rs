use super::IoError;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

pub const MANIFEST_FILE: &str = "manifest.jsonl";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub spec_hash: String,
    pub master_seed: u64,
    pub code_version: String,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub host: String,
    pub complete: bool,
    pub files: Vec<FileEntry>,
}

pub fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn host_descriptor() -> String {
    let name = fs::read_to_string("/etc/hostname")
        .ok()
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown-host".into());
    format!("{name} {}-{}", std::env::consts::OS, std::env::consts::ARCH)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Single writer for one run's output directory; every file goes through
/// [`OutputDir::write`] so the manifest inventory is complete.
pub struct OutputDir {
    dir: PathBuf,
    files: Vec<FileEntry>,
    started: f64,
}

impl OutputDir {
    pub fn create(dir: impl Into<PathBuf>) -> Result<Self, IoError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir, files: vec![], started: unix_now() })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, IoError> {
        let p = self.dir.join(name);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&p, bytes)?;
        self.files.retain(|f| f.path != name);
        self.files.push(FileEntry { path: name.into(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 });
        Ok(p)
    }

    /// Appends the manifest line and returns it.
    pub fn finish(self, command: &str, spec_hash: &str, master_seed: u64, complete: bool) -> Result<RunManifest, IoError> {
        let m = RunManifest {
            command: command.into(),
            spec_hash: spec_hash.into(),
            master_seed,
            code_version: crate::experiments::CODE_VERSION.into(),
            started_unix: self.started,
            finished_unix: unix_now(),
            host: host_descriptor(),
            complete,
            files: self.files,
        };
        let mut f = fs::OpenOptions::new().create(true).append(true).open(self.dir.join(MANIFEST_FILE))?;
        writeln!(f, "{}", serde_json::to_string(&m).expect("manifest serializes"))?;
        Ok(m)
    }
}

pub fn read_manifests(dir: &Path) -> Result<Vec<RunManifest>, IoError> {
    let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| IoError::Format(format!("manifest line: {e}"))))
        .collect()
}

/// Files of `m` whose current digest differs from the recorded one.
pub fn verify_manifest(dir: &Path, m: &RunManifest) -> Result<Vec<String>, IoError> {
    let mut bad = vec![];
    for f in &m.files {
        let bytes = fs::read(dir.join(&f.path))?;
        if sha256_hex(&bytes) != f.sha256 {
            bad.push(f.path.clone());
        }
    }
    Ok(bad)
}
