//! Output directory layout, the run manifest and the directory lock.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";
const LOCK: &str = ".lock";

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Holds `<out>/.lock` for the life of a command.
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(out: &Path) -> Result<DirLock> {
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        let path = out.join(LOCK);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(DirLock { path }),
            Err(e) if e.kind() == ErrorKind::AlreadyExists => bail!(
                "{} is locked by another command; delete {} if no command is running",
                out.display(),
                path.display()
            ),
            Err(e) => Err(e).with_context(|| format!("creating {}", path.display())),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageEntry {
    pub config_sha256: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub seed: u64,
    pub config_sha256: String,
    pub stages: BTreeMap<String, StageEntry>,
}

/// Tracks a stage's files and merges them into the manifest when done.
pub struct Workspace {
    pub out: PathBuf,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
}

impl Workspace {
    pub fn new(out: &Path) -> Workspace {
        Workspace {
            out: out.to_path_buf(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }

    /// Record an input. Files inside the output directory are keyed by their
    /// relative path, others by `label`.
    pub fn input(&mut self, label: &str, path: &Path) -> Result<()> {
        let key = path
            .strip_prefix(&self.out)
            .map(|p| p.to_string_lossy().replace('\\', "/"))
            .unwrap_or_else(|_| label.to_string());
        self.inputs.insert(key, sha256_file(path)?);
        Ok(())
    }

    /// Read a prior stage's output, failing with the stage to run first.
    pub fn read_json<T: DeserializeOwned>(&mut self, rel: &str, stage: &str) -> Result<T> {
        let path = self.require(rel, stage)?;
        let raw = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        self.input(rel, &path)?;
        serde_json::from_str(&raw).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn require(&self, rel: &str, stage: &str) -> Result<PathBuf> {
        let path = self.path(rel);
        if !path.is_file() {
            bail!("missing {}: run {stage} first", path.display());
        }
        Ok(path)
    }

    pub fn write_bytes(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.path(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.outputs
            .insert(rel.to_string(), hex::encode(Sha256::digest(bytes)));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write_bytes(rel, s.as_bytes())
    }

    /// Record a file written by library code.
    pub fn output(&mut self, rel: &str) -> Result<()> {
        let sha = sha256_file(&self.path(rel))?;
        self.outputs.insert(rel.to_string(), sha);
        Ok(())
    }

    /// Merge this stage's record into the manifest.
    pub fn commit(self, stage: &str, config_sha256: &str, seed: u64) -> Result<()> {
        let path = self.out.join(MANIFEST);
        let mut m: Manifest = match fs::read_to_string(&path) {
            Ok(raw) => serde_json::from_str(&raw)
                .with_context(|| format!("parsing {}", path.display()))?,
            Err(e) if e.kind() == ErrorKind::NotFound => Manifest::default(),
            Err(e) => return Err(e).with_context(|| format!("reading {}", path.display())),
        };
        if m.config_sha256 != config_sha256 && !m.stages.is_empty() {
            log::warn!("configuration changed since earlier stages were recorded");
        }
        m.version = env!("CARGO_PKG_VERSION").to_string();
        m.seed = seed;
        m.config_sha256 = config_sha256.to_string();
        let entry = m.stages.entry(stage.to_string()).or_default();
        if entry.config_sha256 != config_sha256 {
            *entry = StageEntry::default();
        }
        entry.config_sha256 = config_sha256.to_string();
        entry.inputs.extend(self.inputs);
        entry.outputs.extend(self.outputs);
        let mut s = serde_json::to_string_pretty(&m)?;
        s.push('\n');
        fs::write(&path, s).with_context(|| format!("writing {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lock_is_exclusive_and_released() {
        let dir = tempfile::tempdir().unwrap();
        let lock = DirLock::acquire(dir.path()).unwrap();
        assert!(DirLock::acquire(dir.path()).is_err());
        drop(lock);
        assert!(DirLock::acquire(dir.path()).is_ok());
    }

    #[test]
    fn manifest_merges_stage_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let mut ws = Workspace::new(dir.path());
        ws.write_json("a/x.json", &1).unwrap();
        ws.commit("measure", "h", 1).unwrap();
        let mut ws = Workspace::new(dir.path());
        ws.write_json("a/y.json", &2).unwrap();
        ws.commit("measure", "h", 1).unwrap();
        let m: Manifest =
            serde_json::from_str(&fs::read_to_string(dir.path().join(MANIFEST)).unwrap()).unwrap();
        assert_eq!(m.stages["measure"].outputs.len(), 2);
        let ws = Workspace::new(dir.path());
        let err = ws.require("nope.json", "represent").unwrap_err().to_string();
        assert!(err.contains("run represent first"));
    }
}
