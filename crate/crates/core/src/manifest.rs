//! Run manifests: everything needed to reproduce a run byte-for-byte.
//!
//! No timestamps, hostnames, or absolute paths of the machine at hand go in
//! here — two identical runs must serialize to identical manifests.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// SHA-256 of a file's raw bytes, streamed.
pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = fs::File::open(path)
        .map_err(|e| Error::Validation(format!("cannot open {}: {e}", path.display())))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = file
            .read(&mut buf)
            .map_err(|e| Error::Validation(format!("cannot read {}: {e}", path.display())))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(format!("{:x}", hasher.finalize()))
}

/// SHA-256 of an in-memory byte string.
pub fn sha256_bytes(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    format!("{:x}", hasher.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// Which subcommand produced this run.
    pub command: String,
    pub tool_version: String,
    /// The fully resolved configuration, defaults included.
    pub config: serde_json::Value,
    /// Input file name -> content hash.
    pub input_hashes: BTreeMap<String, String>,
    /// Named seeds in effect for the run.
    pub seeds: BTreeMap<String, u64>,
    /// File names written under the output directory.
    pub outputs: Vec<String>,
    /// Headline numbers of the run, when the command produces any.
    pub summary: Option<serde_json::Value>,
}

impl RunManifest {
    pub fn new<C: Serialize>(command: &str, config: &C) -> Result<Self> {
        Ok(RunManifest {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config: serde_json::to_value(config)?,
            input_hashes: BTreeMap::new(),
            seeds: BTreeMap::new(),
            outputs: Vec::new(),
            summary: None,
        })
    }

    /// Record an input file under its file name (not its full path, which
    /// would differ between machines).
    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        let hash = sha256_file(path)?;
        self.input_hashes.insert(name, hash);
        Ok(())
    }

    pub fn add_named_hash(&mut self, name: &str, hash: String) {
        self.input_hashes.insert(name.to_string(), hash);
    }

    pub fn add_seed(&mut self, name: &str, seed: u64) {
        self.seeds.insert(name.to_string(), seed);
    }

    pub fn add_output(&mut self, name: &str) {
        self.outputs.push(name.to_string());
    }

    pub fn set_summary<S: Serialize>(&mut self, summary: &S) -> Result<()> {
        self.summary = Some(serde_json::to_value(summary)?);
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Write `manifest.json` (or the given name) under `dir`.
    pub fn write(&self, dir: &Path, name: &str) -> Result<std::path::PathBuf> {
        fs::create_dir_all(dir)
            .map_err(|e| Error::Validation(format!("cannot create {}: {e}", dir.display())))?;
        let path = dir.join(name);
        fs::write(&path, self.to_json()? + "\n")
            .map_err(|e| Error::Validation(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_is_deterministic_and_complete() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("input.csv");
        fs::write(&input, b"a,b\n1,2\n").unwrap();

        let build = || {
            let mut m = RunManifest::new("experiment", &serde_json::json!({"k": 5})).unwrap();
            m.add_input(&input).unwrap();
            m.add_seed("split", 42);
            m.add_output("report.json");
            m.set_summary(&serde_json::json!({"ba": 0.75})).unwrap();
            m
        };
        let a = build();
        let b = build();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        assert_eq!(
            a.input_hashes["input.csv"],
            sha256_bytes(b"a,b\n1,2\n")
        );

        let path = a.write(dir.path(), "manifest.json").unwrap();
        let read: RunManifest =
            serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
        assert_eq!(read, a);
    }

    #[test]
    fn hashes_change_with_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.txt");
        fs::write(&p, b"one").unwrap();
        let h1 = sha256_file(&p).unwrap();
        fs::write(&p, b"two").unwrap();
        let h2 = sha256_file(&p).unwrap();
        assert_ne!(h1, h2);
    }
}
