use serde::{Deserialize, Serialize};

use crate::error::TrainError;

/// Training hyperparameters. Defaults follow the reference recipe:
/// identity-balanced batches of (32 ids x 2 samples x 30 frames), SGD with
/// initial LR 0.1 decayed 10x at the 135th/270th/335th of 400 epochs
/// (stored as fractions so shorter runs keep the schedule shape), weight
/// decay 5e-4, and unit loss weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Identities per batch (P).
    pub batch_ids: usize,
    /// Sequences per identity (K).
    pub samples_per_id: usize,
    /// Frames per sampled sequence (T).
    pub frames_per_sample: usize,
    pub epochs: usize,
    pub base_lr: f64,
    /// LR decay points as fractions of `epochs`, strictly increasing in (0, 1).
    pub milestones: Vec<f64>,
    pub momentum: f64,
    pub weight_decay: f64,
    pub triplet_margin: f64,
    /// Weight of the triplet term.
    pub alpha: f64,
    /// Weight of the cross-entropy term.
    pub beta: f64,
    pub seed: u64,
    /// Extra checkpoint every N epochs (0 = final checkpoint only).
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_ids: 32,
            samples_per_id: 2,
            frames_per_sample: 30,
            epochs: 400,
            base_lr: 0.1,
            milestones: vec![135.0 / 400.0, 270.0 / 400.0, 335.0 / 400.0],
            momentum: 0.9,
            weight_decay: 5e-4,
            triplet_margin: 0.2,
            alpha: 1.0,
            beta: 1.0,
            seed: 0,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.batch_ids < 2 || self.samples_per_id < 2 {
            return Err(TrainError::Config(
                "triplet mining needs batch_ids >= 2 and samples_per_id >= 2".into(),
            ));
        }
        if self.frames_per_sample == 0 || self.epochs == 0 {
            return Err(TrainError::Config("frames_per_sample and epochs must be positive".into()));
        }
        if !(self.base_lr > 0.0) {
            return Err(TrainError::Config("base_lr must be positive".into()));
        }
        let mut prev = 0.0;
        for &m in &self.milestones {
            if !(m > prev && m < 1.0) {
                return Err(TrainError::Config(
                    "milestones must be strictly increasing fractions in (0, 1)".into(),
                ));
            }
            prev = m;
        }
        if self.triplet_margin < 0.0 {
            return Err(TrainError::Config("triplet_margin must be nonnegative".into()));
        }
        Ok(())
    }
}
