//! Content-hash manifest for resumable stages.
//!
//! Each stage records SHA-256 hashes of its inputs (files plus a config
//! fingerprint) and outputs. A stage is skipped when the recorded input
//! hashes match the current files and every recorded output still exists
//! with its recorded hash.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub stages: BTreeMap<String, StageRecord>,
}

pub fn file_sha256(path: &Path) -> std::io::Result<String> {
    let mut hasher = Sha256::new();
    let mut file = fs::File::open(path)?;
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex(&hasher.finalize()))
}

pub fn bytes_sha256(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash a set of input files plus a config fingerprint into a stage's input
/// map. Paths are recorded relative to `root` where possible.
pub fn input_hashes(
    root: &Path,
    files: &[PathBuf],
    config_fingerprint: &str,
) -> std::io::Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    map.insert("config".to_string(), config_fingerprint.to_string());
    for file in files {
        let key = file
            .strip_prefix(root)
            .unwrap_or(file)
            .display()
            .to_string();
        map.insert(key, file_sha256(file)?);
    }
    Ok(map)
}

impl Manifest {
    pub fn load(path: &Path) -> Manifest {
        fs::read_to_string(path)
            .ok()
            .and_then(|text| serde_json::from_str(&text).ok())
            .unwrap_or_default()
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, serde_json::to_string_pretty(self).expect("manifest serializes"))
    }

    /// True when the stage's recorded inputs equal `inputs` and all recorded
    /// outputs still exist with matching hashes.
    pub fn stage_current(
        &self,
        stage: &str,
        inputs: &BTreeMap<String, String>,
        root: &Path,
    ) -> bool {
        let Some(record) = self.stages.get(stage) else {
            return false;
        };
        if &record.inputs != inputs || record.outputs.is_empty() {
            return false;
        }
        record.outputs.iter().all(|(rel, hash)| {
            let path = root.join(rel);
            matches!(file_sha256(&path), Ok(h) if &h == hash)
        })
    }

    pub fn record_stage(
        &mut self,
        stage: &str,
        inputs: BTreeMap<String, String>,
        output_files: &[PathBuf],
        root: &Path,
    ) -> std::io::Result<()> {
        let mut outputs = BTreeMap::new();
        for file in output_files {
            let key = file
                .strip_prefix(root)
                .unwrap_or(file)
                .display()
                .to_string();
            outputs.insert(key, file_sha256(file)?);
        }
        self.stages
            .insert(stage.to_string(), StageRecord { inputs, outputs });
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_skip_logic_tracks_inputs_and_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        let input = root.join("in.txt");
        let output = root.join("out.txt");
        fs::write(&input, "hello").unwrap();
        fs::write(&output, "result").unwrap();

        let inputs = input_hashes(root, std::slice::from_ref(&input), "cfg-v1").unwrap();
        let mut manifest = Manifest::default();
        assert!(!manifest.stage_current("build", &inputs, root));
        manifest
            .record_stage("build", inputs.clone(), std::slice::from_ref(&output), root)
            .unwrap();
        assert!(manifest.stage_current("build", &inputs, root));

        // Changed input -> stale.
        fs::write(&input, "changed").unwrap();
        let new_inputs = input_hashes(root, std::slice::from_ref(&input), "cfg-v1").unwrap();
        assert!(!manifest.stage_current("build", &new_inputs, root));

        // Changed config fingerprint -> stale.
        let cfg_inputs = input_hashes(root, &[input], "cfg-v2").unwrap();
        assert!(!manifest.stage_current("build", &cfg_inputs, root));

        // Tampered output -> stale.
        fs::write(&output, "tampered").unwrap();
        assert!(!manifest.stage_current("build", &inputs, root));
    }

    #[test]
    fn manifest_roundtrips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        let mut manifest = Manifest::default();
        manifest.stages.insert(
            "x".into(),
            StageRecord {
                inputs: [("config".to_string(), "abc".to_string())].into(),
                outputs: [("f".to_string(), "123".to_string())].into(),
            },
        );
        manifest.save(&path).unwrap();
        assert_eq!(Manifest::load(&path), manifest);
    }
}
