use partgraph::GraphKind;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// How parsing frames enter the backbone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputEncoding {
    /// One channel per label class (12 channels).
    OneHot,
    /// Single channel with intensity `label / (K - 1)`.
    Scalar,
}

/// Per-node blend factor: trained, or clamped to a fixed value for
/// ablations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GammaMode {
    Learnable,
    Fixed(f32),
}

pub const GAMMA_INIT: f32 = 0.75;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Input frame size (height, width).
    pub input_size: (usize, usize),
    pub input_encoding: InputEncoding,
    /// Backbone stage widths; the stem shares the first width.
    pub channels: [usize; 4],
    /// Horizontal pyramid scales; each must divide the feature-map height.
    pub hpp_bins: Vec<usize>,
    pub part_graph: GraphKind,
    pub use_gcn: bool,
    pub gamma_mode: GammaMode,
    /// Per-part output feature dimension.
    pub embedding_dim: usize,
    /// Classifier width used by the identity loss during training.
    pub num_ids: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            input_size: (64, 44),
            input_encoding: InputEncoding::OneHot,
            channels: [32, 64, 128, 256],
            hpp_bins: vec![1, 2, 4, 8, 16],
            part_graph: GraphKind::Coarse,
            use_gcn: true,
            gamma_mode: GammaMode::Learnable,
            embedding_dim: 128,
            num_ids: 1,
        }
    }
}

impl ModelConfig {
    /// Backbone input channel count for the configured encoding.
    pub fn input_channels(&self) -> usize {
        match self.input_encoding {
            InputEncoding::OneHot => gps_core::NUM_CLASSES,
            InputEncoding::Scalar => 1,
        }
    }

    /// Spatial size of the backbone output: two stride-2 stages, each
    /// mapping `x -> ceil(x / 2)` under 3x3/pad-1 convolution.
    pub fn feature_size(&self) -> (usize, usize) {
        let halve = |x: usize| (x - 1) / 2 + 1;
        let (h, w) = self.input_size;
        (halve(halve(h)), halve(halve(w)))
    }

    /// Number of graph nodes for the configured part graph.
    pub fn node_count(&self) -> usize {
        match self.part_graph {
            GraphKind::Fine => 11,
            GraphKind::Coarse => 5,
        }
    }

    /// Total part count of the embedding: HPP strips plus graph nodes.
    pub fn num_parts(&self) -> usize {
        self.hpp_bins.iter().sum::<usize>() + self.node_count()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let (h, w) = self.input_size;
        if h < 8 || w < 8 {
            return Err(ModelError::Config(format!("input size {h}x{w} too small (min 8x8)")));
        }
        if self.channels.iter().any(|&c| c == 0) {
            return Err(ModelError::Config("backbone widths must be positive".into()));
        }
        if self.embedding_dim == 0 {
            return Err(ModelError::Config("embedding_dim must be positive".into()));
        }
        if self.num_ids == 0 {
            return Err(ModelError::Config("num_ids must be positive".into()));
        }
        if self.hpp_bins.is_empty() {
            return Err(ModelError::Config("hpp_bins must not be empty".into()));
        }
        let (fh, _) = self.feature_size();
        for &b in &self.hpp_bins {
            if b == 0 || fh % b != 0 {
                return Err(ModelError::Config(format!(
                    "hpp bin {b} does not divide feature height {fh}"
                )));
            }
        }
        if let GammaMode::Fixed(v) = self.gamma_mode {
            if !v.is_finite() {
                return Err(ModelError::Config("fixed gamma must be finite".into()));
            }
        }
        Ok(())
    }
}
