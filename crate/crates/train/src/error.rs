use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid train config: {0}")]
    Config(String),
    #[error("train split is unusable: {0}")]
    Split(String),
    #[error(transparent)]
    Model(#[from] gait_model::ModelError),
    #[error(transparent)]
    Tensor(#[from] autodiff::TensorError),
    #[error(transparent)]
    Codec(#[from] gps_core::CodecError),
    #[error(transparent)]
    Frame(#[from] gps_core::FrameError),
    #[error("loss is not finite at epoch {epoch}, iteration {iter} ({term})")]
    NanLoss { epoch: usize, iter: usize, term: &'static str },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
