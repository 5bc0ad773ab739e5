//! Independent brute-force implementations of Rank-k and mAP, compared
//! exactly against the production code on random instances.

use gait_eval::{distance_matrix, mean_average_precision, rank_k, DistanceMetric, EmbeddingSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Reference Rank-k: explicit full sort of (distance, index) pairs per
/// query, no shared code with the library implementation.
fn oracle_rank_k(d: &[f64], qs: &[String], gs: &[String], k: usize) -> f64 {
    let g = gs.len();
    let mut hits = 0usize;
    let mut evaluable = 0usize;
    for (q, q_subject) in qs.iter().enumerate() {
        if !gs.iter().any(|s| s == q_subject) {
            continue;
        }
        evaluable += 1;
        let mut pairs: Vec<(f64, usize)> =
            (0..g).map(|gi| (d[q * g + gi], gi)).collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        if pairs.iter().take(k).any(|&(_, gi)| gs[gi] == *q_subject) {
            hits += 1;
        }
    }
    100.0 * hits as f64 / evaluable as f64
}

/// Reference mAP via the direct formula.
fn oracle_map(d: &[f64], qs: &[String], gs: &[String]) -> f64 {
    let g = gs.len();
    let mut total = 0.0;
    let mut evaluable = 0usize;
    for (q, q_subject) in qs.iter().enumerate() {
        let relevant = gs.iter().filter(|s| *s == q_subject).count();
        if relevant == 0 {
            continue;
        }
        evaluable += 1;
        let mut pairs: Vec<(f64, usize)> =
            (0..g).map(|gi| (d[q * g + gi], gi)).collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let mut seen = 0usize;
        let mut ap = 0.0;
        for (rank0, &(_, gi)) in pairs.iter().enumerate() {
            if gs[gi] == *q_subject {
                seen += 1;
                ap += seen as f64 / (rank0 + 1) as f64;
            }
        }
        total += ap / relevant as f64;
    }
    100.0 * total / evaluable as f64
}

fn random_instance(
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, Vec<String>, Vec<String>) {
    let q = rng.gen_range(1..=20);
    let g = rng.gen_range(2..=200);
    let subjects = rng.gen_range(1..=12);
    let qs: Vec<String> = (0..q).map(|_| format!("s{}", rng.gen_range(0..subjects))).collect();
    let gs: Vec<String> = (0..g).map(|_| format!("s{}", rng.gen_range(0..subjects))).collect();
    let d: Vec<f64> = (0..q * g).map(|_| rng.gen_range(0.0..10.0)).collect();
    (d, qs, gs)
}

#[test]
fn rank_and_map_match_oracles_on_100_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0;
    while checked < 100 {
        let (d, qs, gs) = random_instance(&mut rng);
        if !qs.iter().any(|q| gs.contains(q)) {
            continue; // no evaluable query; both sides would error
        }
        checked += 1;
        for k in [1usize, 5, 10] {
            let got = rank_k(&d, &qs, &gs, k).unwrap();
            let want = oracle_rank_k(&d, &qs, &gs, k);
            assert_eq!(got, want, "rank-{k} diverged");
        }
        let got = mean_average_precision(&d, &qs, &gs).unwrap();
        let want = oracle_map(&d, &qs, &gs);
        assert_eq!(got, want, "mAP diverged");
    }
}

#[test]
fn rank_k_is_monotone_in_k() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let (d, qs, gs) = random_instance(&mut rng);
        if !qs.iter().any(|q| gs.contains(q)) {
            continue;
        }
        let mut prev = 0.0;
        for k in 1..=gs.len().min(30) {
            let r = rank_k(&d, &qs, &gs, k).unwrap();
            assert!(r >= prev - 1e-12);
            prev = r;
        }
    }
}

#[test]
fn distance_matrix_matches_per_pair_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (n_q, n_g, parts, dim) = (3, 5, 4, 6);
    let make = |rng: &mut ChaCha8Rng, n: usize, tag: &str| EmbeddingSet {
        sequence_ids: (0..n).map(|i| format!("{tag}{i}")).collect(),
        subject_ids: (0..n).map(|i| format!("s{i}")).collect(),
        parts,
        dim,
        features: (0..n * parts * dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect(),
    };
    let q = make(&mut rng, n_q, "q");
    let g = make(&mut rng, n_g, "g");

    for metric in [DistanceMetric::Euclidean, DistanceMetric::Cosine] {
        let d = distance_matrix(&q, &g, metric).unwrap();
        for qi in 0..n_q {
            for gi in 0..n_g {
                let mut per_part_sum = 0.0f64;
                for p in 0..parts {
                    let qv = &q.feature(qi)[p * dim..(p + 1) * dim];
                    let gv = &g.feature(gi)[p * dim..(p + 1) * dim];
                    per_part_sum += match metric {
                        DistanceMetric::Euclidean => qv
                            .iter()
                            .zip(gv)
                            .map(|(a, b)| (*a as f64 - *b as f64).powi(2))
                            .sum::<f64>()
                            .sqrt(),
                        DistanceMetric::Cosine => {
                            let dot: f64 = qv.iter().zip(gv).map(|(a, b)| *a as f64 * *b as f64).sum();
                            let nq: f64 = qv.iter().map(|a| (*a as f64).powi(2)).sum::<f64>().sqrt();
                            let ng: f64 = gv.iter().map(|b| (*b as f64).powi(2)).sum::<f64>().sqrt();
                            1.0 - dot / (nq * ng).max(1e-12)
                        }
                    };
                }
                let want = per_part_sum / parts as f64;
                let got = d[qi * n_g + gi];
                assert!((got - want).abs() < 1e-12, "{metric}: {got} vs {want}");
            }
        }
    }
}

#[test]
fn self_distance_matrix_has_zero_diagonal_and_symmetry() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 6;
    let (parts, dim) = (3, 4);
    let set = EmbeddingSet {
        sequence_ids: (0..n).map(|i| format!("x{i}")).collect(),
        subject_ids: (0..n).map(|i| format!("s{i}")).collect(),
        parts,
        dim,
        features: (0..n * parts * dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect(),
    };
    let d = distance_matrix(&set, &set, DistanceMetric::Euclidean).unwrap();
    for i in 0..n {
        assert_eq!(d[i * n + i], 0.0);
        for j in 0..n {
            assert_eq!(d[i * n + j], d[j * n + i]);
        }
    }
}
