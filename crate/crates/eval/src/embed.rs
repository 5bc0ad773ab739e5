use gait_model::Model;
use gps_core::{read_gpsq, DatasetManifest, GaitParsingSequence, ManifestEntry};

use crate::EvalError;

/// Per-sequence part embeddings: `features` is (n x parts x dim) row-major.
#[derive(Debug, Clone)]
pub struct EmbeddingSet {
    pub sequence_ids: Vec<String>,
    pub subject_ids: Vec<String>,
    pub parts: usize,
    pub dim: usize,
    pub features: Vec<f32>,
}

impl EmbeddingSet {
    pub fn len(&self) -> usize {
        self.sequence_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequence_ids.is_empty()
    }

    pub fn feature(&self, index: usize) -> &[f32] {
        let stride = self.parts * self.dim;
        &self.features[index * stride..(index + 1) * stride]
    }
}

/// Eval-mode full-sequence embeddings for the given manifest entries, in
/// the order given. Deterministic for a fixed model.
pub fn extract_embeddings(
    model: &Model<f32>,
    manifest: &DatasetManifest,
    entries: &[&ManifestEntry],
) -> Result<EmbeddingSet, EvalError> {
    let parts = model.config().num_parts();
    let dim = model.config().embedding_dim;
    let mut features = Vec::with_capacity(entries.len() * parts * dim);
    let mut sequence_ids = Vec::with_capacity(entries.len());
    let mut subject_ids = Vec::with_capacity(entries.len());

    for entry in entries {
        let frames = read_gpsq(&manifest.resolve(entry)).map_err(|source| EvalError::Sequence {
            sequence_id: entry.sequence_id.clone(),
            source,
        })?;
        let seq = GaitParsingSequence::new(
            entry.subject_id.clone(),
            entry.sequence_id.clone(),
            entry.camera_id.clone(),
            frames,
        )?;
        let emb = model.embed_sequence(&seq)?;
        if emb.iter().any(|v| !v.is_finite()) {
            return Err(EvalError::NonFinite("embedding"));
        }
        debug_assert_eq!(emb.len(), parts * dim);
        features.extend_from_slice(&emb);
        sequence_ids.push(entry.sequence_id.clone());
        subject_ids.push(entry.subject_id.clone());
    }

    Ok(EmbeddingSet { sequence_ids, subject_ids, parts, dim, features })
}
