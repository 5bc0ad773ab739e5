//! Property tests for the GPS invariants: codec round-trips, entropy
//! bounds, transform laws.

use gps_core::{
    decode_gps, encode_gps, entropy_bits, one_hot, GaitParsingSequence, LabelHistogram,
    ParsingFrame, NUM_CLASSES,
};
use proptest::prelude::*;

fn arb_frame(max_h: usize, max_w: usize) -> impl Strategy<Value = ParsingFrame> {
    (1..=max_h, 1..=max_w).prop_flat_map(|(h, w)| {
        proptest::collection::vec(0u8..NUM_CLASSES as u8, h * w)
            .prop_map(move |labels| ParsingFrame::new(h, w, labels).unwrap())
    })
}

fn arb_sequence() -> impl Strategy<Value = GaitParsingSequence> {
    (1usize..=8, 1usize..=12, 1usize..=10).prop_flat_map(|(n, h, w)| {
        proptest::collection::vec(
            proptest::collection::vec(0u8..NUM_CLASSES as u8, h * w),
            n,
        )
        .prop_map(move |frames| {
            let frames = frames
                .into_iter()
                .map(|labels| ParsingFrame::new(h, w, labels).unwrap())
                .collect();
            GaitParsingSequence::new("s", "q", "c", frames).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn codec_roundtrip_is_exact(seq in arb_sequence()) {
        let bytes = encode_gps(&seq).unwrap();
        let decoded = decode_gps(&bytes).unwrap();
        let frames: &[ParsingFrame] = &decoded;
        prop_assert_eq!(frames, seq.frames());
    }

    #[test]
    fn decoded_histogram_matches_original(seq in arb_sequence()) {
        let bytes = encode_gps(&seq).unwrap();
        let decoded = decode_gps(&bytes).unwrap();
        let rebuilt = GaitParsingSequence::new("s", "q", "c", decoded).unwrap();
        prop_assert_eq!(rebuilt.histogram(), seq.histogram());
    }

    #[test]
    fn entropy_is_bounded_by_log_support(counts in proptest::collection::vec(0u64..1000, 1..24)) {
        let hist = LabelHistogram::new(counts);
        prop_assume!(hist.total() > 0);
        let support = hist.counts().iter().filter(|&&c| c > 0).count();
        let h = entropy_bits(&hist).unwrap();
        prop_assert!(h >= -1e-12);
        prop_assert!(h <= (support as f64).log2() + 1e-12);
    }

    #[test]
    fn entropy_is_permutation_invariant(counts in proptest::collection::vec(0u64..1000, 2..12), seed in any::<u64>()) {
        let hist = LabelHistogram::new(counts.clone());
        prop_assume!(hist.total() > 0);
        let mut shuffled = counts;
        // Deterministic Fisher-Yates driven by the seed.
        let mut state = seed | 1;
        for i in (1..shuffled.len()).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let j = (state >> 33) as usize % (i + 1);
            shuffled.swap(i, j);
        }
        let h1 = entropy_bits(&hist).unwrap();
        let h2 = entropy_bits(&LabelHistogram::new(shuffled)).unwrap();
        prop_assert!((h1 - h2).abs() < 1e-12);
    }

    #[test]
    fn binarize_entropy_at_most_one_bit(frame in arb_frame(12, 12)) {
        let b = frame.binarize();
        let twice = b.binarize();
        prop_assert_eq!(twice.labels(), b.labels());
        let h = entropy_bits(&b.histogram()).unwrap();
        prop_assert!(h <= 1.0 + 1e-12);
    }

    #[test]
    fn resize_introduces_no_new_labels(frame in arb_frame(16, 16), oh in 1usize..20, ow in 1usize..20) {
        let resized = frame.resize(oh, ow).unwrap();
        let original: std::collections::HashSet<u8> = frame.labels().iter().copied().collect();
        for &l in resized.labels() {
            prop_assert!(original.contains(&l));
        }
    }

    #[test]
    fn one_hot_channels_partition(frame in arb_frame(8, 8)) {
        let t = one_hot::<f32>(&frame, NUM_CLASSES).unwrap();
        let data = t.to_vec();
        let plane = frame.height() * frame.width();
        for p in 0..plane {
            let s: f32 = (0..NUM_CLASSES).map(|c| data[c * plane + p]).sum();
            prop_assert_eq!(s, 1.0);
        }
    }
}

#[test]
fn entropy_equality_cases() {
    // 0 iff a single label; log2(n) iff uniform.
    let single = LabelHistogram::new(vec![0, 9, 0]);
    assert_eq!(entropy_bits(&single).unwrap(), 0.0);
    let uniform = LabelHistogram::new(vec![4; 8]);
    assert_eq!(entropy_bits(&uniform).unwrap(), 3.0);
    let non_uniform = LabelHistogram::new(vec![1, 3, 4]);
    let h = entropy_bits(&non_uniform).unwrap();
    assert!(h > 0.0 && h < (3f64).log2());
}

#[test]
fn roundtrip_of_100_random_sequences() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for i in 0..100 {
        let h = rng.gen_range(1..=40);
        let w = rng.gen_range(1..=30);
        let n = rng.gen_range(1..=10);
        let frames: Vec<ParsingFrame> = (0..n)
            .map(|_| {
                let labels = (0..h * w).map(|_| rng.gen_range(0..12u8)).collect();
                ParsingFrame::new(h, w, labels).unwrap()
            })
            .collect();
        let seq = GaitParsingSequence::new(format!("s{i}"), format!("q{i}"), "c", frames).unwrap();
        let decoded = decode_gps(&encode_gps(&seq).unwrap()).unwrap();
        assert_eq!(decoded.as_slice(), seq.frames());
    }
}
