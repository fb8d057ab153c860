//! Artifact hashing, manifests, and the on-disk CSV conventions.
//!
//! Every stage directory carries a `manifest.json` recording the stage's
//! config hash (a digest of the semantically relevant config sections plus
//! the content hashes of its inputs). A stage re-run with an unchanged
//! hash is a cache hit and is skipped. CSV artifacts start with a
//! `# config <hash>` provenance comment, which all readers skip.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub config_hash: String,
    /// Input label -> content hash.
    pub inputs: BTreeMap<String, String>,
    /// Artifact file names relative to the stage directory.
    pub outputs: Vec<String>,
    /// Free-form counters and notes.
    #[serde(default)]
    pub info: BTreeMap<String, String>,
}

impl Manifest {
    pub fn path_in(dir: &Path) -> PathBuf {
        dir.join("manifest.json")
    }

    pub fn load(dir: &Path) -> Result<Option<Manifest>> {
        let path = Self::path_in(dir);
        if !path.exists() {
            return Ok(None);
        }
        let raw = std::fs::read_to_string(&path)
            .with_context(|| format!("reading {}", path.display()))?;
        Ok(Some(serde_json::from_str(&raw).with_context(|| {
            format!("parsing {}", path.display())
        })?))
    }

    pub fn store(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))?;
        let path = Self::path_in(dir);
        let body = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> Result<String> {
    let bytes =
        std::fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

/// Digest of the canonical JSON serialization of a stage's semantic inputs:
/// its config sections and the hashes of everything it reads.
pub fn config_hash(sections: &impl Serialize, inputs: &BTreeMap<String, String>) -> Result<String> {
    let value = serde_json::json!({
        "sections": serde_json::to_value(sections)?,
        "inputs": inputs,
    });
    Ok(sha256_hex(serde_json::to_string(&value)?.as_bytes()))
}

/// Load the manifest of an upstream stage, or fail naming the stage to run.
pub fn require_upstream(dir: &Path, stage: &str) -> Result<Manifest> {
    Manifest::load(dir)?
        .ok_or_else(|| anyhow!("missing artifacts for stage `{stage}`: run `{stage}` first"))
}

// ----------------------------------------------------------------------
// CSV helpers
// ----------------------------------------------------------------------

/// A CSV artifact: provenance comment, header, then data rows.
pub struct CsvArtifact {
    buffer: String,
}

impl CsvArtifact {
    pub fn new(config_hash: &str, header: &str) -> Self {
        Self {
            buffer: format!("# config {config_hash}\n{header}\n"),
        }
    }

    pub fn row(&mut self, fields: std::fmt::Arguments<'_>) {
        use std::fmt::Write;
        writeln!(self.buffer, "{fields}").expect("write to string");
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        std::fs::write(path, &self.buffer)
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

/// Read a CSV artifact, skipping `#` comment lines and the header row.
pub fn read_csv_rows(path: &Path) -> Result<Vec<Vec<String>>> {
    let raw =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut rows = Vec::new();
    let mut header_seen = false;
    for line in raw.lines() {
        if line.starts_with('#') || line.is_empty() {
            continue;
        }
        if !header_seen {
            header_seen = true;
            continue;
        }
        rows.push(line.split(',').map(str::to_string).collect());
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = Manifest {
            stage: "ingest".into(),
            config_hash: "abc".into(),
            inputs: [("transactions".to_string(), "123".to_string())].into(),
            outputs: vec!["stats.csv".into()],
            info: BTreeMap::new(),
        };
        manifest.store(dir.path()).unwrap();
        let loaded = Manifest::load(dir.path()).unwrap().unwrap();
        assert_eq!(loaded.config_hash, "abc");
        assert_eq!(loaded.inputs["transactions"], "123");
    }

    #[test]
    fn config_hash_tracks_semantic_changes_only() {
        #[derive(Serialize)]
        struct Sections {
            delta_t: usize,
        }
        let inputs: BTreeMap<String, String> =
            [("a".to_string(), "h1".to_string())].into();
        let h1 = config_hash(&Sections { delta_t: 2 }, &inputs).unwrap();
        let h2 = config_hash(&Sections { delta_t: 2 }, &inputs).unwrap();
        let h3 = config_hash(&Sections { delta_t: 3 }, &inputs).unwrap();
        assert_eq!(h1, h2);
        assert_ne!(h1, h3);
        let mut other_inputs = inputs.clone();
        other_inputs.insert("a".to_string(), "h2".to_string());
        let h4 = config_hash(&Sections { delta_t: 2 }, &other_inputs).unwrap();
        assert_ne!(h1, h4);
    }

    #[test]
    fn csv_reader_skips_comments_and_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        let mut artifact = CsvArtifact::new("deadbeef", "a,b");
        artifact.row(format_args!("1,2"));
        artifact.row(format_args!("3,4"));
        artifact.write_to(&path).unwrap();
        let rows = read_csv_rows(&path).unwrap();
        assert_eq!(rows, vec![vec!["1", "2"], vec!["3", "4"]]);
        let raw = std::fs::read_to_string(&path).unwrap();
        assert!(raw.starts_with("# config deadbeef\na,b\n"));
    }
}
