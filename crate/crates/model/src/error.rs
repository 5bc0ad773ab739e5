use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Tensor(#[from] autodiff::TensorError),
    #[error(transparent)]
    Frame(#[from] gps_core::FrameError),
    #[error(transparent)]
    Graph(#[from] partgraph::GraphError),
    #[error("input batch: {0}")]
    Input(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
