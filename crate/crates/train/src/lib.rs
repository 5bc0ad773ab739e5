//! Training for the gait recognition model: identity-balanced batch
//! sampling, triplet + cross-entropy loss, SGD with a step learning-rate
//! schedule, and resumable checkpoints with bit-exact continuation.

mod config;
mod data;
mod error;
mod loss;
mod optim;
mod runner;

pub use config::TrainConfig;
pub use data::{pk_sample, Batch, DatasetCache};
pub use error::TrainError;
pub use loss::{combined_loss, id_loss, triplet_loss, IdClassifier};
pub use optim::{lr_at, Sgd};
pub use runner::{resume_run, train_run, EpochStats, TrainOutcome};
