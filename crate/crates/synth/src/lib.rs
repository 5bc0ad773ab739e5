//! Deterministic procedural generator of labeled gait datasets: articulated
//! walking figures with per-identity geometry and dynamics, 2-D affine
//! viewpoints, occlusion, and the train/test/query/gallery split layout.

mod dataset;
mod figure;
mod profile;

pub use dataset::{binarize_dataset, generate_dataset, OcclusionConfig, SynthConfig, ViewConfig};
pub use figure::{mirror_frame, render_walk_sequence, Viewpoint};
pub use profile::{generate_identity, IdentityProfile};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    Config(String),
    #[error("figure exceeds frame bounds: keypoint ({x:.1}, {y:.1}) outside {h}x{w}")]
    OutOfBounds { x: f64, y: f64, h: usize, w: usize },
    #[error(transparent)]
    Frame(#[from] gps_core::FrameError),
    #[error(transparent)]
    Codec(#[from] gps_core::CodecError),
    #[error(transparent)]
    Manifest(#[from] gps_core::ManifestError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// SplitMix64 step, used to derive independent per-sequence seeds.
pub(crate) fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}
