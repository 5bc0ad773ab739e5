//! Open-set retrieval evaluation (Rank-k and mAP over a query/gallery
//! split) and the ablation harness sweeping part graphs, graph
//! convolution, blend factors, and the parsing-vs-silhouette input
//! comparison.

mod ablate;
mod embed;
mod metrics;

pub use ablate::{ablate, AblationReport, AblationRow, RepresentationRow};
pub use embed::{extract_embeddings, EmbeddingSet};
pub use metrics::{
    distance_matrix, evaluate, mean_average_precision, rank_k, DistanceMetric, MetricsReport,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("sequence {sequence_id}: {source}")]
    Sequence {
        sequence_id: String,
        #[source]
        source: gps_core::CodecError,
    },
    #[error(transparent)]
    Frame(#[from] gps_core::FrameError),
    #[error(transparent)]
    Model(#[from] gait_model::ModelError),
    #[error(transparent)]
    Train(#[from] gait_train::TrainError),
    #[error(transparent)]
    Synth(#[from] gait_synth::SynthError),
    #[error("embedding sets disagree: {0}")]
    Shape(String),
    #[error("gallery is empty")]
    EmptyGallery,
    #[error("query set is empty")]
    EmptyQuery,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
