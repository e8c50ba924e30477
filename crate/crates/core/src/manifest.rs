//! Run manifests: what a command read, what it wrote, and with which settings.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

impl FileDigest {
    pub fn of(path: &Path) -> std::io::Result<Self> {
        let data = std::fs::read(path)?;
        Ok(FileDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(&data),
            bytes: data.len() as u64,
        })
    }
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Arguments that select what the command does, beyond the config file.
    #[serde(default)]
    pub args: BTreeMap<String, serde_json::Value>,
    pub seed: u64,
    pub offline: bool,
    /// Fully resolved configuration as used by the run.
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub started_at: String,
    pub finished_at: String,
}

impl RunManifest {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }

    /// Output files whose current content differs from the recorded digest.
    pub fn changed_outputs(&self) -> Vec<String> {
        self.outputs
            .iter()
            .filter(|d| FileDigest::of(Path::new(&d.path)).map(|now| now.sha256 != d.sha256).unwrap_or(true))
            .map(|d| d.path.clone())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("a.txt");
        std::fs::write(&f, "abc").unwrap();
        let d = FileDigest::of(&f).unwrap();
        assert_eq!(d.sha256, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        let m = RunManifest {
            tool: "t".into(),
            version: "0".into(),
            command: "suite".into(),
            args: BTreeMap::new(),
            seed: 1,
            offline: true,
            config: serde_json::json!({"a": 1}),
            inputs: vec![d.clone()],
            outputs: vec![d],
            started_at: "x".into(),
            finished_at: "y".into(),
        };
        assert_eq!(RunManifest::from_json(&m.to_json()).unwrap(), m);
        assert!(m.changed_outputs().is_empty());
        std::fs::write(&f, "abd").unwrap();
        assert_eq!(m.changed_outputs().len(), 1);
    }
}
