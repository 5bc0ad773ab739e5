use std::collections::HashMap;
use std::sync::Arc;

use gps_core::{read_gpsq, DatasetManifest, GaitParsingSequence};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::TrainError;

/// Decoded train-split sequences held in memory (datasets here are desk
/// scale), with the per-subject index used by identity-balanced sampling.
pub struct DatasetCache {
    sequences: HashMap<String, Arc<GaitParsingSequence>>,
    /// Sorted train subjects; a subject's position is its class label.
    subjects: Vec<String>,
    /// Sequence ids per subject, in manifest order.
    by_subject: HashMap<String, Vec<String>>,
}

impl DatasetCache {
    /// Loads every train-split sequence referenced by the manifest.
    pub fn load_train(manifest: &DatasetManifest) -> Result<Self, TrainError> {
        let entries = manifest.train_entries();
        if entries.is_empty() {
            return Err(TrainError::Split("train split has no sequences".into()));
        }
        let mut sequences = HashMap::new();
        let mut by_subject: HashMap<String, Vec<String>> = HashMap::new();
        for e in &entries {
            let frames = read_gpsq(&manifest.resolve(e))?;
            let seq = GaitParsingSequence::new(
                e.subject_id.clone(),
                e.sequence_id.clone(),
                e.camera_id.clone(),
                frames,
            )?;
            sequences.insert(e.sequence_id.clone(), Arc::new(seq));
            by_subject.entry(e.subject_id.clone()).or_default().push(e.sequence_id.clone());
        }
        let mut subjects: Vec<String> = by_subject.keys().cloned().collect();
        subjects.sort_unstable();
        Ok(DatasetCache { sequences, subjects, by_subject })
    }

    pub fn num_subjects(&self) -> usize {
        self.subjects.len()
    }

    pub fn num_sequences(&self) -> usize {
        self.sequences.len()
    }

    pub fn subjects(&self) -> &[String] {
        &self.subjects
    }

    pub fn label_of(&self, subject: &str) -> Option<usize> {
        self.subjects.iter().position(|s| s == subject)
    }

    pub fn sequence(&self, id: &str) -> Option<&Arc<GaitParsingSequence>> {
        self.sequences.get(id)
    }
}

/// One identity-balanced batch: P*K sequences of exactly T frames, plus
/// the class label (train-subject index) of each sequence.
pub struct Batch {
    pub sequences: Vec<GaitParsingSequence>,
    pub labels: Vec<usize>,
}

/// Draws P subjects and K sequences per subject (with replacement when a
/// subject has fewer), then crops or wraps every sequence to exactly T
/// frames: a random contiguous window when long enough, otherwise a
/// wrap-around repeat from a random start.
pub fn pk_sample(
    cache: &DatasetCache,
    batch_ids: usize,
    samples_per_id: usize,
    frames_per_sample: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Batch, TrainError> {
    if cache.num_subjects() < batch_ids {
        return Err(TrainError::Split(format!(
            "need {batch_ids} train subjects, have {}",
            cache.num_subjects()
        )));
    }

    let mut subjects = cache.subjects.clone();
    subjects.shuffle(rng);
    subjects.truncate(batch_ids);

    let mut sequences = Vec::with_capacity(batch_ids * samples_per_id);
    let mut labels = Vec::with_capacity(batch_ids * samples_per_id);
    for subject in &subjects {
        let label = cache.label_of(subject).expect("sampled subject is indexed");
        let pool = &cache.by_subject[subject];
        let chosen: Vec<&String> = if pool.len() >= samples_per_id {
            let mut ids: Vec<&String> = pool.iter().collect();
            ids.shuffle(rng);
            ids.truncate(samples_per_id);
            ids
        } else {
            (0..samples_per_id).map(|_| &pool[rng.gen_range(0..pool.len())]).collect()
        };
        for id in chosen {
            let seq = &cache.sequences[id];
            sequences.push(crop_or_wrap(seq, frames_per_sample, rng));
            labels.push(label);
        }
    }
    Ok(Batch { sequences, labels })
}

fn crop_or_wrap(
    seq: &GaitParsingSequence,
    target: usize,
    rng: &mut ChaCha8Rng,
) -> GaitParsingSequence {
    let n = seq.len();
    let frames = if n >= target {
        let start = rng.gen_range(0..=n - target);
        seq.frames()[start..start + target].to_vec()
    } else {
        let start = rng.gen_range(0..n);
        (0..target).map(|i| seq.frames()[(start + i) % n].clone()).collect()
    };
    GaitParsingSequence::new(
        seq.subject_id.clone(),
        seq.sequence_id.clone(),
        seq.camera_id.clone(),
        frames,
    )
    .expect("cropped sequence keeps frame dimensions")
}

#[cfg(test)]
mod tests {
    use super::*;
    use gps_core::{write_gpsq, ManifestEntry, ParsingFrame, Split};
    use rand::SeedableRng;

    fn make_dataset(dir: &std::path::Path, subjects: usize, seqs_per: usize, frames: usize) -> DatasetManifest {
        let mut entries = Vec::new();
        let mut train = Vec::new();
        for s in 0..subjects {
            let subject = format!("s{s:03}");
            train.push(subject.clone());
            for q in 0..seqs_per {
                let id = format!("{subject}-{q:02}");
                let fs: Vec<ParsingFrame> = (0..frames)
                    .map(|i| {
                        let label = ((s + q + i) % 11 + 1) as u8;
                        let mut labels = vec![0u8; 8 * 8];
                        labels[i % 64] = label;
                        ParsingFrame::new(8, 8, labels).unwrap()
                    })
                    .collect();
                let seq = GaitParsingSequence::new(&subject, &id, "c0", fs).unwrap();
                let path = format!("{id}.gpsq");
                write_gpsq(&dir.join(&path), &seq).unwrap();
                entries.push(ManifestEntry {
                    sequence_id: id,
                    subject_id: subject.clone(),
                    camera_id: "c0".into(),
                    path,
                    num_frames: frames,
                });
            }
        }
        let split = Split { train_subjects: train, ..Default::default() };
        DatasetManifest::new(dir, entries, split).unwrap()
    }

    #[test]
    fn batch_shape_contract() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = make_dataset(dir.path(), 5, 3, 12);
        let cache = DatasetCache::load_train(&manifest).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let batch = pk_sample(&cache, 4, 2, 10, &mut rng).unwrap();
        assert_eq!(batch.sequences.len(), 8);
        assert_eq!(batch.labels.len(), 8);
        for s in &batch.sequences {
            assert_eq!(s.len(), 10);
        }
        // K consecutive samples share one label.
        for pair in batch.labels.chunks(2) {
            assert_eq!(pair[0], pair[1]);
        }
    }

    #[test]
    fn short_sequence_wraps_with_its_period() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = make_dataset(dir.path(), 2, 2, 10);
        let cache = DatasetCache::load_train(&manifest).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let batch = pk_sample(&cache, 2, 2, 30, &mut rng).unwrap();
        for s in &batch.sequences {
            assert_eq!(s.len(), 30);
            for i in 0..20 {
                assert_eq!(s.frames()[i], s.frames()[i + 10], "wrap period");
            }
        }
    }

    #[test]
    fn same_seed_gives_identical_batches() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = make_dataset(dir.path(), 6, 2, 8);
        let cache = DatasetCache::load_train(&manifest).unwrap();
        let batch_a = {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            pk_sample(&cache, 3, 2, 6, &mut rng).unwrap()
        };
        let batch_b = {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            pk_sample(&cache, 3, 2, 6, &mut rng).unwrap()
        };
        assert_eq!(batch_a.labels, batch_b.labels);
        for (x, y) in batch_a.sequences.iter().zip(&batch_b.sequences) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn too_few_subjects_is_error() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = make_dataset(dir.path(), 2, 2, 8);
        let cache = DatasetCache::load_train(&manifest).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(pk_sample(&cache, 3, 2, 6, &mut rng).is_err());
    }
}
