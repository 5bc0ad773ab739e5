use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const SPLIT_FILE: &str = "split.json";

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("split file: {0}")]
    Split(#[from] serde_json::Error),
    #[error("duplicate sequence id {0}")]
    DuplicateSequence(String),
    #[error("query sequence {sequence_id} belongs to {subject_id}, which is not a test subject")]
    QueryOutsideTest { sequence_id: String, subject_id: String },
    #[error("query sequence {0} not present in the manifest")]
    UnknownQuery(String),
    #[error("manifest has no entries")]
    Empty,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ManifestEntry {
    pub sequence_id: String,
    pub subject_id: String,
    pub camera_id: String,
    /// Path of the GPSQ file, relative to the manifest directory.
    pub path: String,
    pub num_frames: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq, Eq)]
pub struct Split {
    pub train_subjects: Vec<String>,
    pub test_subjects: Vec<String>,
    pub query_sequences: Vec<String>,
}

/// Index of a dataset on disk: one entry per stored sequence plus the
/// train/test/query partition.
#[derive(Debug, Clone)]
pub struct DatasetManifest {
    root: PathBuf,
    entries: Vec<ManifestEntry>,
    split: Split,
}

impl DatasetManifest {
    pub fn new(root: impl Into<PathBuf>, entries: Vec<ManifestEntry>, split: Split) -> Result<Self, ManifestError> {
        if entries.is_empty() {
            return Err(ManifestError::Empty);
        }
        let mut seen = HashSet::new();
        let mut by_id = BTreeMap::new();
        for e in &entries {
            if !seen.insert(e.sequence_id.clone()) {
                return Err(ManifestError::DuplicateSequence(e.sequence_id.clone()));
            }
            by_id.insert(e.sequence_id.clone(), e.subject_id.clone());
        }
        let test: HashSet<&String> = split.test_subjects.iter().collect();
        for q in &split.query_sequences {
            match by_id.get(q) {
                None => return Err(ManifestError::UnknownQuery(q.clone())),
                Some(subject) if !test.contains(subject) => {
                    return Err(ManifestError::QueryOutsideTest {
                        sequence_id: q.clone(),
                        subject_id: subject.clone(),
                    })
                }
                _ => {}
            }
        }
        Ok(DatasetManifest { root: root.into(), entries, split })
    }

    /// Loads `manifest.jsonl` + `split.json` from a dataset directory.
    pub fn load(dir: &Path) -> Result<Self, ManifestError> {
        let manifest_path = dir.join(MANIFEST_FILE);
        let file = std::fs::File::open(&manifest_path).map_err(|source| ManifestError::Io {
            path: manifest_path.display().to_string(),
            source,
        })?;
        let mut entries = Vec::new();
        for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|source| ManifestError::Io {
                path: manifest_path.display().to_string(),
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: ManifestEntry =
                serde_json::from_str(&line).map_err(|source| ManifestError::Parse { line: i + 1, source })?;
            entries.push(entry);
        }

        let split_path = dir.join(SPLIT_FILE);
        let split: Split = serde_json::from_str(&std::fs::read_to_string(&split_path).map_err(
            |source| ManifestError::Io { path: split_path.display().to_string(), source },
        )?)?;

        Self::new(dir.to_path_buf(), entries, split)
    }

    /// Writes `manifest.jsonl` + `split.json` into a dataset directory.
    pub fn save(&self, dir: &Path) -> Result<(), ManifestError> {
        let io_err = |path: &Path, source| ManifestError::Io { path: path.display().to_string(), source };
        let manifest_path = dir.join(MANIFEST_FILE);
        let mut out = Vec::new();
        for e in &self.entries {
            serde_json::to_writer(&mut out, e).expect("manifest entries serialize");
            out.push(b'\n');
        }
        let mut f = std::fs::File::create(&manifest_path).map_err(|e| io_err(&manifest_path, e))?;
        f.write_all(&out).map_err(|e| io_err(&manifest_path, e))?;

        let split_path = dir.join(SPLIT_FILE);
        let split_json = serde_json::to_string_pretty(&self.split).expect("split serializes");
        std::fs::write(&split_path, split_json).map_err(|e| io_err(&split_path, e))?;
        Ok(())
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn split(&self) -> &Split {
        &self.split
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Absolute path of a stored sequence.
    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(&entry.path)
    }

    pub fn entry(&self, sequence_id: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.sequence_id == sequence_id)
    }

    /// Entries whose subject is in the train split, in manifest order.
    pub fn train_entries(&self) -> Vec<&ManifestEntry> {
        let train: HashSet<&String> = self.split.train_subjects.iter().collect();
        self.entries.iter().filter(|e| train.contains(&e.subject_id)).collect()
    }

    /// Query entries in split order.
    pub fn query_entries(&self) -> Vec<&ManifestEntry> {
        self.split
            .query_sequences
            .iter()
            .filter_map(|q| self.entry(q))
            .collect()
    }

    /// Gallery = test-subject entries that are not queries, manifest order.
    pub fn gallery_entries(&self) -> Vec<&ManifestEntry> {
        let test: HashSet<&String> = self.split.test_subjects.iter().collect();
        let query: HashSet<&String> = self.split.query_sequences.iter().collect();
        self.entries
            .iter()
            .filter(|e| test.contains(&e.subject_id) && !query.contains(&e.sequence_id))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(seq: &str, subj: &str) -> ManifestEntry {
        ManifestEntry {
            sequence_id: seq.into(),
            subject_id: subj.into(),
            camera_id: "c00".into(),
            path: format!("{seq}.gpsq"),
            num_frames: 30,
        }
    }

    #[test]
    fn duplicate_sequence_rejected() {
        let err = DatasetManifest::new(
            ".",
            vec![entry("a", "s1"), entry("a", "s1")],
            Split::default(),
        );
        assert!(matches!(err, Err(ManifestError::DuplicateSequence(_))));
    }

    #[test]
    fn query_must_be_test_subject() {
        let split = Split {
            train_subjects: vec!["s1".into()],
            test_subjects: vec!["s2".into()],
            query_sequences: vec!["a".into()],
        };
        let err = DatasetManifest::new(".", vec![entry("a", "s1"), entry("b", "s2")], split);
        assert!(matches!(err, Err(ManifestError::QueryOutsideTest { .. })));
    }

    #[test]
    fn save_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let split = Split {
            train_subjects: vec!["s1".into()],
            test_subjects: vec!["s2".into()],
            query_sequences: vec!["b".into()],
        };
        let m = DatasetManifest::new(
            dir.path(),
            vec![entry("a", "s1"), entry("b", "s2"), entry("c", "s2")],
            split,
        )
        .unwrap();
        m.save(dir.path()).unwrap();
        let loaded = DatasetManifest::load(dir.path()).unwrap();
        assert_eq!(loaded.entries(), m.entries());
        assert_eq!(loaded.split(), m.split());
        assert_eq!(loaded.query_entries().len(), 1);
        assert_eq!(loaded.gallery_entries().len(), 1);
        assert_eq!(loaded.train_entries().len(), 1);
    }
}
