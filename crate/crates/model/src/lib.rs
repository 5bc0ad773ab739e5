//! The two-head gait recognition network over parsing-frame sequences:
//! a 9-convolution residual backbone, a global head (temporal max pooling
//! plus horizontal pyramid pooling), a cross-part head (per-node mask
//! blending, regional pooling, two graph-convolution layers over the part
//! graph), and per-part embedding layers, together with the PGCK
//! checkpoint format.

mod backbone;
mod checkpoint;
mod config;
mod error;
mod heads;
mod init;
mod model;

pub use checkpoint::{read_checkpoint, write_checkpoint, CheckpointMeta, Record};
pub use config::{GammaMode, InputEncoding, ModelConfig, GAMMA_INIT};
pub use error::ModelError;
pub use heads::{gcn_layer, global_head, regional_pooling};
pub use model::{GammaBank, Model};
