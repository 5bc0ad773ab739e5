use serde::Serialize;
use thiserror::Error;

use crate::codec::{read_gpsq, CodecError};
use crate::manifest::DatasetManifest;
use crate::{NUM_CLASSES, NUM_PARTS};

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("sequence {sequence_id}: {source}")]
    Sequence {
        sequence_id: String,
        #[source]
        source: CodecError,
    },
}

/// Dataset-level label statistics.
///
/// `part_frame_counts[p]` counts frames in which part `p+1` occupies at
/// least one pixel. `distinct_part_histogram[d]` counts frames showing
/// exactly `d` distinct parts. `part_mean_sequence_proportion[p]` is the
/// mean over sequences of the within-sequence fraction of frames containing
/// part `p+1`, in percent.
#[derive(Debug, Clone, Serialize)]
pub struct DatasetStats {
    pub total_sequences: usize,
    pub total_frames: u64,
    pub part_names: Vec<String>,
    pub part_frame_counts: Vec<u64>,
    pub distinct_part_histogram: Vec<u64>,
    pub part_mean_sequence_proportion: Vec<f64>,
}

/// Scans every sequence referenced by the manifest and aggregates the
/// per-part occurrence statistics.
pub fn dataset_stats(manifest: &DatasetManifest) -> Result<DatasetStats, StatsError> {
    let mut part_frame_counts = vec![0u64; NUM_PARTS];
    let mut distinct_hist = vec![0u64; NUM_PARTS + 1];
    let mut proportion_sums = vec![0f64; NUM_PARTS];
    let mut total_frames = 0u64;

    for entry in manifest.entries() {
        let frames = read_gpsq(&manifest.resolve(entry)).map_err(|source| StatsError::Sequence {
            sequence_id: entry.sequence_id.clone(),
            source,
        })?;
        let mut frames_with_part = vec![0u64; NUM_PARTS];
        for frame in &frames {
            let mut present = [false; NUM_CLASSES];
            for &l in frame.labels() {
                present[l as usize] = true;
            }
            let mut distinct = 0usize;
            for p in 0..NUM_PARTS {
                if present[p + 1] {
                    frames_with_part[p] += 1;
                    distinct += 1;
                }
            }
            distinct_hist[distinct] += 1;
        }
        total_frames += frames.len() as u64;
        for p in 0..NUM_PARTS {
            part_frame_counts[p] += frames_with_part[p];
            proportion_sums[p] += frames_with_part[p] as f64 / frames.len() as f64;
        }
    }

    let n_seq = manifest.entries().len();
    let part_mean_sequence_proportion = proportion_sums
        .iter()
        .map(|s| 100.0 * s / n_seq as f64)
        .collect();

    Ok(DatasetStats {
        total_sequences: n_seq,
        total_frames,
        part_names: crate::labels::NAMES[1..].iter().map(|s| s.to_string()).collect(),
        part_frame_counts,
        distinct_part_histogram: distinct_hist,
        part_mean_sequence_proportion,
    })
}
