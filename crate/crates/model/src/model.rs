use autodiff::{no_grad, Elem, Parameter, Tensor};
use gps_core::{one_hot, scalar_encode, GaitParsingSequence, ParsingFrame};
use partgraph::{graph, PartGraph};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::backbone::{Backbone, BufferRef};
use crate::config::{GammaMode, InputEncoding, ModelConfig, GAMMA_INIT};
use crate::error::ModelError;
use crate::heads::{gcn_layer, global_head, regional_pooling};
use crate::init::xavier_normal;

/// One blend factor per graph node. Learnable unless the config pins a
/// fixed value.
pub struct GammaBank<T: Elem> {
    pub gammas: Vec<Tensor<T>>,
}

impl<T: Elem> GammaBank<T> {
    fn new(config: &ModelConfig) -> Self {
        let nodes = config.node_count();
        let gammas = (0..nodes)
            .map(|_| match config.gamma_mode {
                GammaMode::Learnable => {
                    Tensor::param(vec![1], vec![T::from_f64(GAMMA_INIT as f64)]).expect("gamma")
                }
                GammaMode::Fixed(v) => Tensor::from_vec(vec![1], vec![T::from_f64(v as f64)])
                    .expect("gamma"),
            })
            .collect();
        GammaBank { gammas }
    }
}

/// The two-head recognition network. Embeds a parsing-frame sequence into
/// P part features of dimension d: HPP strips from the global head
/// followed by graph-node features from the cross-part head, each mapped
/// through its own linear layer.
pub struct Model<T: Elem> {
    config: ModelConfig,
    backbone: Backbone<T>,
    graph: PartGraph,
    adj_norm: Tensor<T>,
    gammas: GammaBank<T>,
    gcn_weights: Option<(Tensor<T>, Tensor<T>)>,
    part_fcs: Vec<Tensor<T>>,
}

impl<T: Elem> Model<T> {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let backbone = Backbone::new(&mut rng, config.input_channels(), config.channels);
        let part_graph = graph(config.part_graph);
        let c = config.channels[3];
        let nodes = part_graph.node_count();

        let adj_data: Vec<T> = part_graph.normalized().iter().map(|&v| T::from_f64(v)).collect();
        let adj_norm = Tensor::from_vec(vec![nodes, nodes], adj_data).expect("adjacency");

        let gcn_weights = if config.use_gcn {
            let w1 = Tensor::param(vec![c, c], xavier_normal(&mut rng, c * c, c, c)).expect("gcn w1");
            let w2 = Tensor::param(vec![c, c], xavier_normal(&mut rng, c * c, c, c)).expect("gcn w2");
            Some((w1, w2))
        } else {
            None
        };

        let d = config.embedding_dim;
        let part_fcs = (0..config.num_parts())
            .map(|_| Tensor::param(vec![c, d], xavier_normal(&mut rng, c * d, c, d)).expect("fc"))
            .collect();

        Ok(Model {
            gammas: GammaBank::new(&config),
            backbone,
            graph: part_graph,
            adj_norm,
            gcn_weights,
            part_fcs,
            config,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn graph(&self) -> &PartGraph {
        &self.graph
    }

    pub fn gammas(&self) -> &GammaBank<T> {
        &self.gammas
    }

    /// Ordered, uniquely named trainable parameters.
    pub fn named_parameters(&self) -> Vec<Parameter<T>> {
        let mut out = Vec::new();
        self.backbone.params("backbone", &mut out);
        if let GammaMode::Learnable = self.config.gamma_mode {
            for (k, g) in self.gammas.gammas.iter().enumerate() {
                out.push(Parameter::new(format!("cross_part.gamma{k}"), g.clone()));
            }
        }
        if let Some((w1, w2)) = &self.gcn_weights {
            out.push(Parameter::new("cross_part.gcn.w1".to_string(), w1.clone()));
            out.push(Parameter::new("cross_part.gcn.w2".to_string(), w2.clone()));
        }
        for (i, fc) in self.part_fcs.iter().enumerate() {
            out.push(Parameter::new(format!("embed.fc{i}.weight"), fc.clone()));
        }
        debug_assert!({
            let mut names: Vec<&str> = out.iter().map(|p| p.name.as_str()).collect();
            let n = names.len();
            names.sort_unstable();
            names.dedup();
            names.len() == n
        });
        out
    }

    /// Ordered batch-norm running statistics.
    pub fn named_buffers(&self) -> Vec<BufferRef<T>> {
        let mut out = Vec::new();
        self.backbone.buffers("backbone", &mut out);
        out
    }

    fn check_batch(&self, seqs: &[&GaitParsingSequence]) -> Result<(usize, usize), ModelError> {
        let Some(first) = seqs.first() else {
            return Err(ModelError::Input("empty batch".into()));
        };
        let t = first.len();
        let (h, w) = self.config.input_size;
        for s in seqs {
            if s.height() != h || s.width() != w {
                return Err(ModelError::Input(format!(
                    "sequence {} is {}x{}, model expects {}x{}",
                    s.sequence_id,
                    s.height(),
                    s.width(),
                    h,
                    w
                )));
            }
            if s.len() != t {
                return Err(ModelError::Input(format!(
                    "sequence {} has {} frames, batch expects {}",
                    s.sequence_id,
                    s.len(),
                    t
                )));
            }
        }
        Ok((seqs.len(), t))
    }

    /// Encodes all frames of the batch as one (B*T x C_in x H x W) tensor.
    fn encode_batch(&self, seqs: &[&GaitParsingSequence]) -> Result<Tensor<T>, ModelError> {
        let mut planes: Vec<Tensor<T>> = Vec::new();
        for s in seqs {
            for f in s.frames() {
                let enc = match self.config.input_encoding {
                    InputEncoding::OneHot => one_hot::<T>(f, gps_core::NUM_CLASSES)?,
                    InputEncoding::Scalar => scalar_encode::<T>(f, gps_core::NUM_CLASSES)?,
                };
                planes.push(enc);
            }
        }
        let (h, w) = self.config.input_size;
        let c_in = self.config.input_channels();
        let per = c_in * h * w;
        let mut data = Vec::with_capacity(planes.len() * per);
        for p in &planes {
            data.extend_from_slice(&p.data());
        }
        Ok(Tensor::from_vec(vec![planes.len(), c_in, h, w], data)?)
    }

    /// Per-node binary mask tensors at feature-map resolution, one
    /// (B*T x fh x fw) tensor per graph node.
    pub fn node_mask_tensors(
        &self,
        seqs: &[&GaitParsingSequence],
    ) -> Result<Vec<Tensor<T>>, ModelError> {
        let (fh, fw) = self.config.feature_size();
        let mut resized: Vec<ParsingFrame> = Vec::new();
        for s in seqs {
            for f in s.frames() {
                resized.push(f.resize(fh, fw)?);
            }
        }
        let nodes = self.graph.node_count();
        let plane = fh * fw;
        let mut out = Vec::with_capacity(nodes);
        for k in 0..nodes {
            let mut data = vec![T::zero(); resized.len() * plane];
            for (fi, frame) in resized.iter().enumerate() {
                let mask = self.graph.group_mask(frame, k)?;
                for (pi, &m) in mask.labels().iter().enumerate() {
                    if m == 1 {
                        data[fi * plane + pi] = T::one();
                    }
                }
            }
            out.push(Tensor::from_vec(vec![resized.len(), fh, fw], data)?);
        }
        Ok(out)
    }

    /// Cross-part head over precomputed per-node masks: blend, regional
    /// pooling, optional two-layer graph convolution, temporal max.
    /// Returns (batch x nodes x c).
    pub fn cross_part_head(
        &self,
        features: &Tensor<T>,
        node_masks: &[Tensor<T>],
        batch: usize,
        t: usize,
    ) -> Result<Tensor<T>, ModelError> {
        let nodes = self.graph.node_count();
        if node_masks.len() != nodes {
            return Err(ModelError::Input(format!(
                "expected {nodes} node masks, got {}",
                node_masks.len()
            )));
        }
        let frames = features.shape()[0];
        for m in node_masks {
            if m.shape()[0] != frames {
                return Err(ModelError::Input(format!(
                    "mask covers {} frames, features cover {frames}",
                    m.shape()[0]
                )));
            }
        }
        let c = features.shape()[1];

        let mut per_node = Vec::with_capacity(nodes);
        for k in 0..nodes {
            let blended = features.regional_blend(&node_masks[k], &self.gammas.gammas[k])?;
            let pooled = regional_pooling(&blended)?;
            per_node.push(pooled.reshape(vec![frames, 1, c])?);
        }
        let refs: Vec<&Tensor<T>> = per_node.iter().collect();
        let x0 = Tensor::concat(&refs, 1)?; // frames x nodes x c

        let propagated = match &self.gcn_weights {
            Some((w1, w2)) => {
                let h1 = gcn_layer(&x0, &self.adj_norm, w1)?;
                gcn_layer(&h1, &self.adj_norm, w2)?
            }
            None => x0,
        };

        let stacked = propagated.reshape(vec![batch, t, nodes, c])?;
        Ok(stacked.max_over(1)?)
    }

    /// Backbone feature maps for a batch: (B*T x c x fh x fw).
    pub fn backbone_features(
        &self,
        seqs: &[&GaitParsingSequence],
        train: bool,
    ) -> Result<Tensor<T>, ModelError> {
        self.check_batch(seqs)?;
        let encoded = self.encode_batch(seqs)?;
        self.backbone.forward(&encoded, train)
    }

    /// Full forward pass: backbone, both heads, per-part linear maps.
    /// All sequences in the batch must share one frame count. Returns
    /// (batch x P x d) embeddings.
    pub fn forward_embeddings(
        &self,
        seqs: &[&GaitParsingSequence],
        train: bool,
    ) -> Result<Tensor<T>, ModelError> {
        let (batch, t) = self.check_batch(seqs)?;
        let encoded = self.encode_batch(seqs)?;
        let features = self.backbone.forward(&encoded, train)?;

        let strips = global_head(&features, batch, t, &self.config.hpp_bins)?;
        let node_masks = self.node_mask_tensors(seqs)?;
        let node_feats = self.cross_part_head(&features, &node_masks, batch, t)?;

        self.assemble_parts(&strips, &node_feats, batch)
    }

    /// Like [`Model::forward_embeddings`] but with the cross-part masks
    /// taken from `mask_source` sequences instead of the input sequences
    /// (the inputs still drive the backbone). Used to verify that fixed
    /// gamma = 0.5 makes embeddings mask-independent.
    pub fn forward_embeddings_with_masks(
        &self,
        seqs: &[&GaitParsingSequence],
        mask_source: &[&GaitParsingSequence],
        train: bool,
    ) -> Result<Tensor<T>, ModelError> {
        let (batch, t) = self.check_batch(seqs)?;
        let (mask_batch, mask_t) = self.check_batch(mask_source)?;
        if mask_batch != batch || mask_t != t {
            return Err(ModelError::Input("mask source batch shape mismatch".into()));
        }
        let encoded = self.encode_batch(seqs)?;
        let features = self.backbone.forward(&encoded, train)?;
        let strips = global_head(&features, batch, t, &self.config.hpp_bins)?;
        let node_masks = self.node_mask_tensors(mask_source)?;
        let node_feats = self.cross_part_head(&features, &node_masks, batch, t)?;
        self.assemble_parts(&strips, &node_feats, batch)
    }

    fn assemble_parts(
        &self,
        strips: &[Tensor<T>],
        node_feats: &Tensor<T>,
        batch: usize,
    ) -> Result<Tensor<T>, ModelError> {
        let c = self.config.channels[3];
        let d = self.config.embedding_dim;
        let nodes = self.graph.node_count();
        debug_assert_eq!(strips.len() + nodes, self.part_fcs.len());

        let mut parts = Vec::with_capacity(self.part_fcs.len());
        for (i, strip) in strips.iter().enumerate() {
            let mapped = strip.matmul(&self.part_fcs[i])?;
            parts.push(mapped.reshape(vec![batch, 1, d])?);
        }
        for k in 0..nodes {
            let node = node_feats.narrow(1, k, 1)?.reshape(vec![batch, c])?;
            let mapped = node.matmul(&self.part_fcs[strips.len() + k])?;
            parts.push(mapped.reshape(vec![batch, 1, d])?);
        }
        let refs: Vec<&Tensor<T>> = parts.iter().collect();
        Ok(Tensor::concat(&refs, 1)?)
    }

    /// Eval-mode embedding of one full sequence (no gradient recording):
    /// flattened (P x d) values.
    pub fn embed_sequence(&self, seq: &GaitParsingSequence) -> Result<Vec<T>, ModelError> {
        no_grad(|| {
            let emb = self.forward_embeddings(&[seq], false)?;
            Ok(emb.to_vec())
        })
    }
}
