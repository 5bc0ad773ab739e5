use std::path::{Path, PathBuf};

use autodiff::Parameter;
use gait_model::{read_checkpoint, write_checkpoint, CheckpointMeta, Model, ModelConfig, Record};
use gps_core::DatasetManifest;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::TrainConfig;
use crate::data::{pk_sample, DatasetCache};
use crate::error::TrainError;
use crate::loss::{combined_loss, id_loss, triplet_loss, IdClassifier};
use crate::optim::{lr_at, Sgd};

#[derive(Debug, Clone, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub lr: f64,
}

pub struct TrainOutcome {
    pub model: Model<f32>,
    pub classifier: IdClassifier<f32>,
    pub history: Vec<EpochStats>,
    pub checkpoint_path: Option<PathBuf>,
}

/// Trainer-owned extension stored in the checkpoint meta blob.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct TrainMeta {
    config: TrainConfig,
    /// Next epoch to run when resuming.
    epoch: usize,
    sampler_seed: String,
    sampler_word_pos: String,
}

fn sampler_seed(seed: u64) -> u64 {
    seed.wrapping_add(0x9E3779B97F4A7C15)
}

fn classifier_seed(seed: u64) -> u64 {
    seed.wrapping_add(0x6A09E667F3BCC909)
}

fn hex_encode(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn hex_decode(s: &str) -> Result<Vec<u8>, TrainError> {
    if s.len() % 2 != 0 {
        return Err(TrainError::Checkpoint("odd hex length".into()));
    }
    (0..s.len() / 2)
        .map(|i| {
            u8::from_str_radix(&s[2 * i..2 * i + 2], 16)
                .map_err(|e| TrainError::Checkpoint(format!("bad hex: {e}")))
        })
        .collect()
}

struct TrainState {
    model: Model<f32>,
    classifier: IdClassifier<f32>,
    params: Vec<Parameter<f32>>,
    optimizer: Sgd<f32>,
    sampler: ChaCha8Rng,
    cache: DatasetCache,
    history: Vec<EpochStats>,
    start_epoch: usize,
}

impl TrainState {
    fn fresh(
        mut model_config: ModelConfig,
        train_config: &TrainConfig,
        manifest: &DatasetManifest,
    ) -> Result<Self, TrainError> {
        train_config.validate()?;
        let cache = DatasetCache::load_train(manifest)?;
        if cache.num_subjects() < train_config.batch_ids {
            return Err(TrainError::Split(format!(
                "{} train subjects cannot fill batches of {} ids",
                cache.num_subjects(),
                train_config.batch_ids
            )));
        }
        // The classifier spans exactly the train identities.
        model_config.num_ids = cache.num_subjects();
        model_config.validate()?;

        let model = Model::<f32>::new(model_config.clone(), train_config.seed)?;
        let mut class_rng = ChaCha8Rng::seed_from_u64(classifier_seed(train_config.seed));
        let classifier = IdClassifier::<f32>::new(
            model_config.num_parts(),
            model_config.embedding_dim,
            model_config.num_ids,
            &mut class_rng,
        );

        let mut params = model.named_parameters();
        params.extend(classifier.named_parameters());
        let optimizer = Sgd::new(
            &params,
            train_config.momentum as f32,
            train_config.weight_decay as f32,
        );

        let sampler = ChaCha8Rng::seed_from_u64(sampler_seed(train_config.seed));

        Ok(TrainState {
            model,
            classifier,
            params,
            optimizer,
            sampler,
            cache,
            history: Vec::new(),
            start_epoch: 0,
        })
    }

    fn run(mut self, train_config: &TrainConfig, out_dir: Option<&Path>) -> Result<TrainOutcome, TrainError> {
        let per_batch = train_config.batch_ids * train_config.samples_per_id;
        let iters_per_epoch = self.cache.num_sequences().div_ceil(per_batch).max(1);

        for epoch in self.start_epoch..train_config.epochs {
            let lr = lr_at(epoch, train_config) as f32;
            let mut loss_sum = 0.0f64;
            for iter in 0..iters_per_epoch {
                let batch = pk_sample(
                    &self.cache,
                    train_config.batch_ids,
                    train_config.samples_per_id,
                    train_config.frames_per_sample,
                    &mut self.sampler,
                )?;
                let refs: Vec<&gps_core::GaitParsingSequence> = batch.sequences.iter().collect();

                self.optimizer.zero_grad(&self.params);
                let embeddings = self.model.forward_embeddings(&refs, true)?;
                let tri = triplet_loss(&embeddings, &batch.labels, train_config.triplet_margin as f32)?;
                let ce = id_loss(&embeddings, &batch.labels, &self.classifier, true)?;
                let loss = combined_loss(&tri, &ce, train_config.alpha as f32, train_config.beta as f32)?;

                let value = loss.item()? as f64;
                if !value.is_finite() {
                    let term = if !tri.item()?.is_finite() { "triplet" } else { "cross-entropy" };
                    return Err(TrainError::NanLoss { epoch, iter, term });
                }
                loss.backward()?;
                self.optimizer.step(&self.params, lr)?;
                loss_sum += value;
            }
            self.history.push(EpochStats {
                epoch,
                mean_loss: loss_sum / iters_per_epoch as f64,
                lr: lr as f64,
            });

            if let Some(dir) = out_dir {
                let every = train_config.checkpoint_every;
                if every > 0 && (epoch + 1) % every == 0 && epoch + 1 < train_config.epochs {
                    self.save_checkpoint(&dir.join(format!("checkpoint-{:04}.pgck", epoch + 1)), train_config, epoch + 1)?;
                }
            }
        }

        let checkpoint_path = match out_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir).map_err(|source| TrainError::Io {
                    path: dir.display().to_string(),
                    source,
                })?;
                let path = dir.join("checkpoint-final.pgck");
                self.save_checkpoint(&path, train_config, train_config.epochs)?;
                write_history(&dir.join("loss_history.csv"), &self.history)?;
                Some(path)
            }
            None => None,
        };

        Ok(TrainOutcome {
            model: self.model,
            classifier: self.classifier,
            history: self.history,
            checkpoint_path,
        })
    }

    fn save_checkpoint(&self, path: &Path, train_config: &TrainConfig, next_epoch: usize) -> Result<(), TrainError> {
        let mut records = self.model.to_records();
        for p in self.classifier.named_parameters() {
            records.push(Record::new(p.name, p.tensor.shape().to_vec(), p.tensor.to_vec()));
        }
        for (name, buf) in self.classifier.named_buffers() {
            let data = buf.borrow().clone();
            records.push(Record::new(name, vec![data.len()], data));
        }
        for (name, data) in self.optimizer.state(&self.params) {
            records.push(Record::new(name, vec![data.len()], data));
        }
        let train_meta = TrainMeta {
            config: train_config.clone(),
            epoch: next_epoch,
            sampler_seed: hex_encode(&self.sampler.get_seed()),
            sampler_word_pos: self.sampler.get_word_pos().to_string(),
        };
        let meta = CheckpointMeta {
            model: self.model.config().clone(),
            train: Some(serde_json::to_value(&train_meta).expect("train meta serializes")),
        };
        write_checkpoint(path, &meta, &records)?;
        Ok(())
    }
}

/// Trains from scratch. `out_dir`, when given, receives checkpoints and
/// the per-epoch loss history (`epoch,mean_loss,lr` CSV).
pub fn train_run(
    model_config: ModelConfig,
    train_config: &TrainConfig,
    manifest: &DatasetManifest,
    out_dir: Option<&Path>,
) -> Result<TrainOutcome, TrainError> {
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)
            .map_err(|source| TrainError::Io { path: dir.display().to_string(), source })?;
    }
    let state = TrainState::fresh(model_config, train_config, manifest)?;
    state.run(train_config, out_dir)
}

/// Resumes a checkpoint written by [`train_run`] and continues to the
/// configured epoch count. Restores parameters, optimizer momentum,
/// batch-norm statistics, and the sampler RNG, so the continuation is
/// bit-identical to an uninterrupted run.
pub fn resume_run(
    checkpoint: &Path,
    manifest: &DatasetManifest,
    out_dir: Option<&Path>,
) -> Result<TrainOutcome, TrainError> {
    let (meta, records) = read_checkpoint(checkpoint)?;
    let train_value = meta
        .train
        .clone()
        .ok_or_else(|| TrainError::Checkpoint("checkpoint has no training state".into()))?;
    let train_meta: TrainMeta = serde_json::from_value(train_value)
        .map_err(|e| TrainError::Checkpoint(format!("train meta parse: {e}")))?;

    let mut state = TrainState::fresh(meta.model.clone(), &train_meta.config, manifest)?;

    // Overwrite the fresh initialization with the stored tensors.
    let (model, extra) = Model::<f32>::from_records(&meta, records)?;
    state.model = model;
    let mut remaining: Vec<(String, Vec<f32>)> =
        extra.into_iter().map(|r| (r.name, r.data)).collect();
    for p in state.classifier.named_parameters() {
        let idx = remaining
            .iter()
            .position(|(name, _)| *name == p.name)
            .ok_or_else(|| TrainError::Checkpoint(format!("missing classifier record {}", p.name)))?;
        let (_, data) = remaining.swap_remove(idx);
        p.tensor.update_data(|dst| dst.copy_from_slice(&data));
    }
    for (name, buf) in state.classifier.named_buffers() {
        let idx = remaining
            .iter()
            .position(|(n, _)| *n == name)
            .ok_or_else(|| TrainError::Checkpoint(format!("missing classifier buffer {name}")))?;
        let (_, data) = remaining.swap_remove(idx);
        buf.borrow_mut().copy_from_slice(&data);
    }
    // Parameter handles changed when the model was rebuilt.
    state.params = state.model.named_parameters();
    state.params.extend(state.classifier.named_parameters());
    state.optimizer = Sgd::new(
        &state.params,
        train_meta.config.momentum as f32,
        train_meta.config.weight_decay as f32,
    );
    state.optimizer.restore(&state.params, &remaining)?;

    let seed_bytes = hex_decode(&train_meta.sampler_seed)?;
    let seed: [u8; 32] = seed_bytes
        .try_into()
        .map_err(|_| TrainError::Checkpoint("sampler seed must be 32 bytes".into()))?;
    let mut sampler = ChaCha8Rng::from_seed(seed);
    sampler.set_word_pos(
        train_meta
            .sampler_word_pos
            .parse::<u128>()
            .map_err(|e| TrainError::Checkpoint(format!("sampler position: {e}")))?,
    );
    state.sampler = sampler;
    state.start_epoch = train_meta.epoch;

    state.run(&train_meta.config, out_dir)
}

fn write_history(path: &Path, history: &[EpochStats]) -> Result<(), TrainError> {
    let mut out = String::from("epoch,mean_loss,lr\n");
    for h in history {
        out.push_str(&format!("{},{},{}\n", h.epoch, h.mean_loss, h.lr));
    }
    std::fs::write(path, out)
        .map_err(|source| TrainError::Io { path: path.display().to_string(), source })
}
