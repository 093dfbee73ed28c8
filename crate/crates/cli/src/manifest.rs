//! Run-directory manifest: which config and seed produced each artifact,
//! how long each stage took, and a checksum per file.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const FILE: &str = "manifest.toml";

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub config_hash: String,
    #[serde(default)]
    pub stages: BTreeMap<String, Stage>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct Stage {
    pub seconds: f64,
    /// Path relative to the run directory -> sha256 hex digest.
    pub artifacts: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Option<Self>> {
        let p = dir.join(FILE);
        if !p.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
        Ok(Some(toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?))
    }

    /// Records `stage` with checksums of `files` (relative to `dir`),
    /// replacing an earlier record of the same name.
    pub fn record(&mut self, dir: &Path, stage: &str, seconds: f64, files: &[String]) -> Result<()> {
        let mut artifacts = BTreeMap::new();
        for f in files {
            artifacts.insert(f.clone(), file_sha256(&dir.join(f))?);
        }
        self.stages.insert(stage.to_string(), Stage { seconds, artifacts });
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let p = dir.join(FILE);
        fs::write(&p, toml::to_string(self)?).with_context(|| format!("writing {}", p.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.csv"), "x\n").unwrap();
        let mut m = Manifest { seed: 3, config_hash: "h".into(), ..Default::default() };
        m.record(dir.path(), "simulate", 0.5, &["a.csv".into()]).unwrap();
        m.save(dir.path()).unwrap();
        let back = Manifest::load(dir.path()).unwrap().unwrap();
        assert_eq!(back.seed, 3);
        assert_eq!(back.stages["simulate"].artifacts["a.csv"], sha256_hex(b"x\n"));
    }
}
