use autodiff::{Elem, Parameter, RunningStats, Tensor};
use rand_chacha::ChaCha8Rng;

use crate::error::TrainError;

/// Batch-all triplet loss on per-part euclidean distances (see the tensor
/// op for the exact reduction). `embeddings` is (batch x parts x dim).
pub fn triplet_loss<T: Elem>(
    embeddings: &Tensor<T>,
    labels: &[usize],
    margin: T,
) -> Result<Tensor<T>, TrainError> {
    Ok(embeddings.batch_all_triplet(labels, margin)?)
}

/// Per-part identity classifier: batch-norm over each part's embedding
/// followed by a bias-free linear map to the class logits.
pub struct IdClassifier<T: Elem> {
    bn_gamma: Vec<Tensor<T>>,
    bn_beta: Vec<Tensor<T>>,
    bn_stats: Vec<RunningStats<T>>,
    weights: Vec<Tensor<T>>,
    num_ids: usize,
}

impl<T: Elem> IdClassifier<T> {
    pub fn new(parts: usize, dim: usize, num_ids: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut bn_gamma = Vec::with_capacity(parts);
        let mut bn_beta = Vec::with_capacity(parts);
        let mut bn_stats = Vec::with_capacity(parts);
        let mut weights = Vec::with_capacity(parts);
        for _ in 0..parts {
            bn_gamma.push(Tensor::param(vec![dim], vec![T::one(); dim]).expect("bn gamma"));
            bn_beta.push(Tensor::param(vec![dim], vec![T::zero(); dim]).expect("bn beta"));
            bn_stats.push(RunningStats::new(dim));
            let data = crate::loss::xavier(rng, dim * num_ids, dim, num_ids);
            weights.push(Tensor::param(vec![dim, num_ids], data).expect("classifier weight"));
        }
        IdClassifier { bn_gamma, bn_beta, bn_stats, weights, num_ids }
    }

    pub fn num_ids(&self) -> usize {
        self.num_ids
    }

    pub fn parts(&self) -> usize {
        self.weights.len()
    }

    /// Stacked logits for every (part, sample) pair: (parts*batch x ids).
    pub fn logits(&self, embeddings: &Tensor<T>, train: bool) -> Result<Tensor<T>, TrainError> {
        let s = embeddings.shape().to_vec();
        if s.len() != 3 || s[1] != self.weights.len() {
            return Err(TrainError::Config(format!(
                "classifier expects (batch x {} x dim) embeddings, got {s:?}",
                self.weights.len()
            )));
        }
        let (batch, parts, dim) = (s[0], s[1], s[2]);
        let mut per_part = Vec::with_capacity(parts);
        for p in 0..parts {
            let part = embeddings.narrow(1, p, 1)?.reshape(vec![batch, dim])?;
            let normed = part.batch_norm(
                &self.bn_gamma[p],
                &self.bn_beta[p],
                &self.bn_stats[p],
                train,
                T::from_f64(0.1),
                T::from_f64(1e-5),
            )?;
            per_part.push(normed.matmul(&self.weights[p])?);
        }
        let refs: Vec<&Tensor<T>> = per_part.iter().collect();
        Ok(Tensor::concat(&refs, 0)?)
    }

    pub fn named_parameters(&self) -> Vec<Parameter<T>> {
        let mut out = Vec::new();
        for p in 0..self.weights.len() {
            out.push(Parameter::new(format!("classifier.part{p}.bn.gamma"), self.bn_gamma[p].clone()));
            out.push(Parameter::new(format!("classifier.part{p}.bn.beta"), self.bn_beta[p].clone()));
            out.push(Parameter::new(format!("classifier.part{p}.weight"), self.weights[p].clone()));
        }
        out
    }

    pub fn named_buffers(&self) -> Vec<(String, std::rc::Rc<std::cell::RefCell<Vec<T>>>)> {
        let mut out = Vec::new();
        for p in 0..self.bn_stats.len() {
            out.push((format!("classifier.part{p}.bn.running_mean"), std::rc::Rc::clone(&self.bn_stats[p].mean)));
            out.push((format!("classifier.part{p}.bn.running_var"), std::rc::Rc::clone(&self.bn_stats[p].var)));
        }
        out
    }
}

pub(crate) fn xavier<T: Elem>(rng: &mut ChaCha8Rng, n: usize, fan_in: usize, fan_out: usize) -> Vec<T> {
    use rand::Rng;
    let std = (2.0 / (fan_in + fan_out) as f64).sqrt();
    (0..n)
        .map(|_| {
            let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            let u2: f64 = rng.gen::<f64>();
            T::from_f64((-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos() * std)
        })
        .collect()
}

/// Cross-entropy of the per-part classifier, averaged over parts and batch.
pub fn id_loss<T: Elem>(
    embeddings: &Tensor<T>,
    labels: &[usize],
    classifier: &IdClassifier<T>,
    train: bool,
) -> Result<Tensor<T>, TrainError> {
    if let Some(&bad) = labels.iter().find(|&&l| l >= classifier.num_ids()) {
        return Err(TrainError::Config(format!(
            "label {bad} outside classifier range {}",
            classifier.num_ids()
        )));
    }
    let logits = classifier.logits(embeddings, train)?;
    let batch = embeddings.shape()[0];
    let mut targets = Vec::with_capacity(classifier.parts() * batch);
    for _ in 0..classifier.parts() {
        targets.extend_from_slice(labels);
    }
    Ok(logits.softmax_cross_entropy(&targets)?)
}

/// `alpha * triplet + beta * cross_entropy`.
pub fn combined_loss<T: Elem>(
    triplet: &Tensor<T>,
    cross_entropy: &Tensor<T>,
    alpha: T,
    beta: T,
) -> Result<Tensor<T>, TrainError> {
    Ok(triplet.scalar_mul(alpha).add(&cross_entropy.scalar_mul(beta))?)
}
