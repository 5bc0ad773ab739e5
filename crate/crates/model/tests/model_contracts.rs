//! End-to-end contracts of the model: shape arithmetic, determinism,
//! temporal-order invariance, blend identities, and checkpoint round-trips.

use autodiff::Tensor;
use gait_model::{global_head, GammaMode, Model, ModelConfig};
use gps_core::{GaitParsingSequence, ParsingFrame};
use partgraph::GraphKind;

fn lcg_frames(seed: u64, n: usize, h: usize, w: usize) -> Vec<ParsingFrame> {
    let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15) | 1;
    (0..n)
        .map(|_| {
            let labels: Vec<u8> = (0..h * w)
                .map(|_| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    ((state >> 33) % 12) as u8
                })
                .collect();
            ParsingFrame::new(h, w, labels).unwrap()
        })
        .collect()
}

fn seq(seed: u64, n: usize, h: usize, w: usize) -> GaitParsingSequence {
    GaitParsingSequence::new(
        format!("s{seed}"),
        format!("s{seed}-00"),
        "c00",
        lcg_frames(seed, n, h, w),
    )
    .unwrap()
}

fn toy_config() -> ModelConfig {
    ModelConfig {
        input_size: (32, 22),
        channels: [4, 4, 8, 8],
        hpp_bins: vec![1, 2, 4],
        part_graph: GraphKind::Coarse,
        use_gcn: true,
        embedding_dim: 16,
        num_ids: 4,
        ..Default::default()
    }
}

#[test]
fn backbone_spatial_size_matches_stride_arithmetic() {
    let cfg64 = ModelConfig { channels: [2, 2, 2, 2], embedding_dim: 4, ..Default::default() };
    let model = Model::<f32>::new(cfg64, 1).unwrap();
    let s = seq(1, 2, 64, 44);
    let feats = model.backbone_features(&[&s], false).unwrap();
    assert_eq!(feats.shape(), &[2, 2, 16, 11]);

    let cfg32 = toy_config();
    let model = Model::<f32>::new(cfg32, 1).unwrap();
    let s = seq(2, 3, 32, 22);
    let feats = model.backbone_features(&[&s], false).unwrap();
    assert_eq!(feats.shape(), &[3, 8, 8, 6]);
}

#[test]
fn zero_input_stays_finite() {
    let model = Model::<f32>::new(toy_config(), 3).unwrap();
    let frames = vec![ParsingFrame::background(32, 22).unwrap(); 2];
    let s = GaitParsingSequence::new("s", "q", "c", frames).unwrap();
    let emb = model.forward_embeddings(&[&s], false).unwrap();
    assert!(emb.to_vec().iter().all(|v| v.is_finite()));
}

#[test]
fn identical_frames_give_identical_features_in_eval() {
    let model = Model::<f32>::new(toy_config(), 4).unwrap();
    let s1 = seq(10, 2, 32, 22);
    let s2 = s1.clone();
    let emb = model.forward_embeddings(&[&s1, &s2], false).unwrap();
    let v = emb.to_vec();
    let (a, b) = v.split_at(v.len() / 2);
    assert_eq!(a, b);
}

#[test]
fn embedding_part_count_for_both_graphs() {
    let fine = ModelConfig {
        part_graph: GraphKind::Fine,
        ..ModelConfig { channels: [2, 2, 2, 2], embedding_dim: 4, ..Default::default() }
    };
    assert_eq!(fine.num_parts(), 42);
    let model = Model::<f32>::new(fine, 5).unwrap();
    let s = seq(11, 2, 64, 44);
    let emb = model.forward_embeddings(&[&s], false).unwrap();
    assert_eq!(emb.shape(), &[1, 42, 4]);

    let coarse = ModelConfig { channels: [2, 2, 2, 2], embedding_dim: 4, ..Default::default() };
    assert_eq!(coarse.num_parts(), 36);
    let model = Model::<f32>::new(coarse, 5).unwrap();
    let emb = model.forward_embeddings(&[&s], false).unwrap();
    assert_eq!(emb.shape(), &[1, 36, 4]);
}

#[test]
fn frame_permutation_leaves_embedding_bitwise_identical() {
    let model = Model::<f32>::new(toy_config(), 6).unwrap();
    for trial in 0..20 {
        let base = seq(100 + trial, 5, 32, 22);
        let mut frames = base.frames().to_vec();
        // Deterministic shuffle.
        let mut state = 0xD1B54A32D192ED03u64.wrapping_add(trial);
        for i in (1..frames.len()).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let j = ((state >> 33) as usize) % (i + 1);
            frames.swap(i, j);
        }
        let shuffled = GaitParsingSequence::new("s", "q2", "c", frames).unwrap();
        let a = model.embed_sequence(&base).unwrap();
        let b = model.embed_sequence(&shuffled).unwrap();
        assert_eq!(a, b, "trial {trial}");
    }
}

#[test]
fn gamma_half_makes_embeddings_mask_independent() {
    let cfg = ModelConfig { gamma_mode: GammaMode::Fixed(0.5), ..toy_config() };
    let model = Model::<f32>::new(cfg, 7).unwrap();
    let a = seq(200, 4, 32, 22);
    let b = seq(201, 4, 32, 22);
    let with_own = model.forward_embeddings(&[&a], false).unwrap();
    let with_swapped = model.forward_embeddings_with_masks(&[&a], &[&b], false).unwrap();
    assert_eq!(with_own.to_vec(), with_swapped.to_vec());
}

#[test]
fn gamma_one_zeroes_background_regions() {
    // With gamma = 1 the blend keeps only mask pixels, so a node whose
    // mask is empty contributes an all-zero region map. Verified through
    // the public blend op at the tensor level.
    let feats = Tensor::<f32>::from_vec(vec![1, 2, 2, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]).unwrap();
    let empty_mask = Tensor::<f32>::zeros(vec![1, 2, 2]);
    let gamma = Tensor::scalar(1.0f32);
    let out = feats.regional_blend(&empty_mask, &gamma).unwrap();
    assert!(out.to_vec().iter().all(|&v| v == 0.0));
}

#[test]
fn all_background_masks_stay_finite() {
    let model = Model::<f32>::new(toy_config(), 8).unwrap();
    let frames = vec![ParsingFrame::background(32, 22).unwrap(); 3];
    let s = GaitParsingSequence::new("s", "q", "c", frames).unwrap();
    let emb = model.forward_embeddings(&[&s], false).unwrap();
    assert!(emb.to_vec().iter().all(|v| v.is_finite()));
}

#[test]
fn gcn_off_changes_node_path_but_keeps_shape() {
    let with = Model::<f32>::new(toy_config(), 9).unwrap();
    let without = Model::<f32>::new(ModelConfig { use_gcn: false, ..toy_config() }, 9).unwrap();
    let s = seq(300, 3, 32, 22);
    let a = with.forward_embeddings(&[&s], false).unwrap();
    let b = without.forward_embeddings(&[&s], false).unwrap();
    assert_eq!(a.shape(), b.shape());
    assert_ne!(a.to_vec(), b.to_vec());
    // The GCN weights exist only when the layer is enabled.
    assert!(with.named_parameters().iter().any(|p| p.name == "cross_part.gcn.w1"));
    assert!(!without.named_parameters().iter().any(|p| p.name.contains("gcn")));
}

#[test]
fn global_head_constant_map_gives_two_v_per_strip() {
    let v = 1.25f32;
    let feats = Tensor::full(vec![2, 3, 8, 4], v);
    let strips = global_head(&feats, 1, 2, &[1, 2, 4]).unwrap();
    assert_eq!(strips.len(), 7);
    for s in strips {
        assert_eq!(s.shape(), &[1, 3]);
        assert!(s.to_vec().iter().all(|&x| x == 2.0 * v));
    }
}

#[test]
fn global_head_single_frame_is_identity_pooling() {
    let data: Vec<f32> = (0..1 * 2 * 4 * 3).map(|i| i as f32 * 0.5 - 2.0).collect();
    let feats = Tensor::from_vec(vec![1, 2, 4, 3], data.clone()).unwrap();
    // t = 1: temporal max must not change values; scale 1 pools the whole
    // plane to max + mean.
    let strips = global_head(&feats, 1, 1, &[1]).unwrap();
    let out = strips[0].to_vec();
    for c in 0..2 {
        let plane = &data[c * 12..(c + 1) * 12];
        let mx = plane.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
        let mean = plane.iter().sum::<f32>() / 12.0;
        assert!((out[c] - (mx + mean)).abs() < 1e-6);
    }
}

#[test]
fn checkpoint_roundtrip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.pgck");
    let model = Model::<f32>::new(toy_config(), 10).unwrap();
    let s = seq(400, 3, 32, 22);
    let before = model.embed_sequence(&s).unwrap();
    model.save(&path).unwrap();

    let (loaded, meta) = Model::<f32>::load(&path).unwrap();
    assert_eq!(meta.model, *model.config());
    for (a, b) in model.named_parameters().iter().zip(loaded.named_parameters()) {
        assert_eq!(a.name, b.name);
        assert_eq!(a.tensor.to_vec(), b.tensor.to_vec(), "{}", a.name);
    }
    let after = loaded.embed_sequence(&s).unwrap();
    assert_eq!(before, after);
}

#[test]
fn wrong_input_size_is_rejected() {
    let model = Model::<f32>::new(toy_config(), 11).unwrap();
    let s = seq(500, 2, 64, 44);
    assert!(model.forward_embeddings(&[&s], false).is_err());
}

#[test]
fn mismatched_lengths_in_batch_rejected() {
    let model = Model::<f32>::new(toy_config(), 12).unwrap();
    let a = seq(600, 2, 32, 22);
    let b = seq(601, 3, 32, 22);
    assert!(model.forward_embeddings(&[&a, &b], false).is_err());
}
