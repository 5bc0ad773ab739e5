use gait_model::Model;
use gps_core::DatasetManifest;
use serde::{Deserialize, Serialize};

use crate::embed::{extract_embeddings, EmbeddingSet};
use crate::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMetric {
    Euclidean,
    Cosine,
}

impl std::str::FromStr for DistanceMetric {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "euclidean" => Ok(DistanceMetric::Euclidean),
            "cosine" => Ok(DistanceMetric::Cosine),
            other => Err(format!("unknown metric {other:?} (euclidean|cosine)")),
        }
    }
}

impl std::fmt::Display for DistanceMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DistanceMetric::Euclidean => write!(f, "euclidean"),
            DistanceMetric::Cosine => write!(f, "cosine"),
        }
    }
}

/// Q x G distances, averaged over the P parts: per part the L2 distance,
/// or one minus the cosine similarity. Accumulated in f64.
pub fn distance_matrix(
    query: &EmbeddingSet,
    gallery: &EmbeddingSet,
    metric: DistanceMetric,
) -> Result<Vec<f64>, EvalError> {
    if query.parts != gallery.parts || query.dim != gallery.dim {
        return Err(EvalError::Shape(format!(
            "query is {}x{}, gallery is {}x{}",
            query.parts, query.dim, gallery.parts, gallery.dim
        )));
    }
    let (parts, dim) = (query.parts, query.dim);
    let mut out = vec![0.0f64; query.len() * gallery.len()];
    for qi in 0..query.len() {
        let qf = query.feature(qi);
        for gi in 0..gallery.len() {
            let gf = gallery.feature(gi);
            let mut acc = 0.0f64;
            for p in 0..parts {
                let qp = &qf[p * dim..(p + 1) * dim];
                let gp = &gf[p * dim..(p + 1) * dim];
                acc += match metric {
                    DistanceMetric::Euclidean => {
                        let mut s = 0.0f64;
                        for (a, b) in qp.iter().zip(gp) {
                            let d = *a as f64 - *b as f64;
                            s += d * d;
                        }
                        s.sqrt()
                    }
                    DistanceMetric::Cosine => {
                        let (mut dot, mut nq, mut ng) = (0.0f64, 0.0f64, 0.0f64);
                        for (a, b) in qp.iter().zip(gp) {
                            dot += *a as f64 * *b as f64;
                            nq += (*a as f64).powi(2);
                            ng += (*b as f64).powi(2);
                        }
                        1.0 - dot / (nq.sqrt() * ng.sqrt()).max(1e-12)
                    }
                };
            }
            out[qi * gallery.len() + gi] = acc / parts as f64;
        }
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(EvalError::NonFinite("distance matrix"));
    }
    Ok(out)
}

/// Gallery indices of one query row, ascending by distance, ties broken by
/// gallery index order.
fn ranked_gallery(row: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..row.len()).collect();
    idx.sort_by(|&a, &b| row[a].partial_cmp(&row[b]).unwrap().then(a.cmp(&b)));
    idx
}

fn evaluable_queries(query_subjects: &[String], gallery_subjects: &[String]) -> Vec<usize> {
    (0..query_subjects.len())
        .filter(|&q| gallery_subjects.iter().any(|g| *g == query_subjects[q]))
        .collect()
}

/// Fraction (in percent) of evaluable queries whose top-k ranked gallery
/// contains a same-subject entry. Queries without any same-subject gallery
/// entry are excluded from the average.
pub fn rank_k(
    distances: &[f64],
    query_subjects: &[String],
    gallery_subjects: &[String],
    k: usize,
) -> Result<f64, EvalError> {
    if gallery_subjects.is_empty() {
        return Err(EvalError::EmptyGallery);
    }
    let g = gallery_subjects.len();
    let evaluable = evaluable_queries(query_subjects, gallery_subjects);
    if evaluable.is_empty() {
        return Err(EvalError::EmptyQuery);
    }
    let mut hits = 0usize;
    for &q in &evaluable {
        let row = &distances[q * g..(q + 1) * g];
        let ranked = ranked_gallery(row);
        if ranked.iter().take(k).any(|&gi| gallery_subjects[gi] == query_subjects[q]) {
            hits += 1;
        }
    }
    Ok(100.0 * hits as f64 / evaluable.len() as f64)
}

/// Mean average precision in percent over evaluable queries:
/// AP = (1/R) * sum over relevant hits of precision@rank.
pub fn mean_average_precision(
    distances: &[f64],
    query_subjects: &[String],
    gallery_subjects: &[String],
) -> Result<f64, EvalError> {
    if gallery_subjects.is_empty() {
        return Err(EvalError::EmptyGallery);
    }
    let g = gallery_subjects.len();
    let evaluable = evaluable_queries(query_subjects, gallery_subjects);
    if evaluable.is_empty() {
        return Err(EvalError::EmptyQuery);
    }
    let mut ap_sum = 0.0f64;
    for &q in &evaluable {
        let row = &distances[q * g..(q + 1) * g];
        let ranked = ranked_gallery(row);
        let mut relevant_seen = 0usize;
        let mut precision_sum = 0.0f64;
        for (rank0, &gi) in ranked.iter().enumerate() {
            if gallery_subjects[gi] == query_subjects[q] {
                relevant_seen += 1;
                precision_sum += relevant_seen as f64 / (rank0 + 1) as f64;
            }
        }
        ap_sum += precision_sum / relevant_seen as f64;
    }
    Ok(100.0 * ap_sum / evaluable.len() as f64)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rank1: f64,
    pub rank5: f64,
    pub map: f64,
    pub num_query: usize,
    pub num_gallery: usize,
    pub excluded_queries: usize,
    pub metric: DistanceMetric,
}

/// Full protocol over the manifest's query/gallery split: extract
/// embeddings, compute distances, report Rank-1/Rank-5/mAP.
pub fn evaluate(
    model: &Model<f32>,
    manifest: &DatasetManifest,
    metric: DistanceMetric,
) -> Result<MetricsReport, EvalError> {
    let query_entries = manifest.query_entries();
    let gallery_entries = manifest.gallery_entries();
    if query_entries.is_empty() {
        return Err(EvalError::EmptyQuery);
    }
    if gallery_entries.is_empty() {
        return Err(EvalError::EmptyGallery);
    }
    let query = extract_embeddings(model, manifest, &query_entries)?;
    let gallery = extract_embeddings(model, manifest, &gallery_entries)?;
    evaluate_sets(&query, &gallery, metric)
}

/// Metric computation over already-extracted embeddings.
pub fn evaluate_sets(
    query: &EmbeddingSet,
    gallery: &EmbeddingSet,
    metric: DistanceMetric,
) -> Result<MetricsReport, EvalError> {
    let distances = distance_matrix(query, gallery, metric)?;
    let rank1 = rank_k(&distances, &query.subject_ids, &gallery.subject_ids, 1)?;
    let rank5 = rank_k(&distances, &query.subject_ids, &gallery.subject_ids, 5)?;
    let map = mean_average_precision(&distances, &query.subject_ids, &gallery.subject_ids)?;
    let excluded = query.len() - evaluable_queries(&query.subject_ids, &gallery.subject_ids).len();
    Ok(MetricsReport {
        rank1,
        rank5,
        map,
        num_query: query.len(),
        num_gallery: gallery.len(),
        excluded_queries: excluded,
        metric,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(subject_ids: Vec<&str>, parts: usize, dim: usize, features: Vec<f32>) -> EmbeddingSet {
        EmbeddingSet {
            sequence_ids: (0..subject_ids.len()).map(|i| format!("q{i}")).collect(),
            subject_ids: subject_ids.into_iter().map(String::from).collect(),
            parts,
            dim,
            features,
        }
    }

    #[test]
    fn identical_rows_have_zero_euclidean_distance() {
        let q = set(vec!["a"], 2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        let g = set(vec!["a", "b"], 2, 2, vec![1.0, 2.0, 3.0, 4.0, 9.0, 9.0, 9.0, 9.0]);
        let d = distance_matrix(&q, &g, DistanceMetric::Euclidean).unwrap();
        assert_eq!(d[0], 0.0);
        assert!(d[1] > 0.0);
    }

    #[test]
    fn cosine_is_scale_invariant() {
        let q = set(vec!["a"], 1, 3, vec![1.0, 2.0, 3.0]);
        let g = set(vec!["a"], 1, 3, vec![2.0, 4.0, 6.0]);
        let d = distance_matrix(&q, &g, DistanceMetric::Cosine).unwrap();
        assert!(d[0].abs() < 1e-9);
    }

    #[test]
    fn exact_copies_give_perfect_rank1() {
        let q = set(vec!["a", "b"], 1, 2, vec![0.0, 1.0, 5.0, 5.0]);
        let g = set(vec!["b", "a"], 1, 2, vec![5.0, 5.0, 0.0, 1.0]);
        let d = distance_matrix(&q, &g, DistanceMetric::Euclidean).unwrap();
        let r1 = rank_k(&d, &q.subject_ids, &g.subject_ids, 1).unwrap();
        assert_eq!(r1, 100.0);
    }

    #[test]
    fn rank_k_saturates_at_gallery_size() {
        let q = set(vec!["a"], 1, 1, vec![0.0]);
        let g = set(vec!["b", "c", "a"], 1, 1, vec![1.0, 2.0, 3.0]);
        let d = distance_matrix(&q, &g, DistanceMetric::Euclidean).unwrap();
        assert_eq!(rank_k(&d, &q.subject_ids, &g.subject_ids, 3).unwrap(), 100.0);
        assert_eq!(rank_k(&d, &q.subject_ids, &g.subject_ids, 1).unwrap(), 0.0);
    }

    #[test]
    fn single_relevant_first_gives_full_ap() {
        let d = vec![0.1, 0.5, 0.9];
        let ap = mean_average_precision(
            &d,
            &["a".to_string()],
            &["a".to_string(), "b".to_string(), "c".to_string()],
        )
        .unwrap();
        assert_eq!(ap, 100.0);
    }

    #[test]
    fn one_relevant_at_rank_two_gives_half() {
        let d = vec![0.5, 0.1, 0.9, 0.95];
        let ap = mean_average_precision(
            &d,
            &["a".to_string()],
            &["a".to_string(), "b".to_string(), "c".to_string(), "d".to_string()],
        )
        .unwrap();
        assert_eq!(ap, 50.0);
    }

    #[test]
    fn queries_without_relevant_gallery_are_excluded() {
        // Query "z" has no gallery entry: only "a" counts.
        let d = vec![
            0.1, 0.2, // query a
            0.3, 0.1, // query z
        ];
        let qs = vec!["a".to_string(), "z".to_string()];
        let gs = vec!["a".to_string(), "b".to_string()];
        assert_eq!(rank_k(&d, &qs, &gs, 1).unwrap(), 100.0);
        assert_eq!(mean_average_precision(&d, &qs, &gs).unwrap(), 100.0);
    }

    #[test]
    fn metrics_invariant_under_monotone_distance_transform() {
        let d: Vec<f64> = vec![0.3, 1.2, 0.7, 2.0, 0.4, 0.9, 1.5, 0.2];
        let qs = vec!["a".to_string(), "b".to_string()];
        let gs = vec!["b".to_string(), "a".to_string(), "a".to_string(), "c".to_string()];
        let transformed: Vec<f64> = d.iter().map(|x| 3.0 * x + 1.0).collect();
        for k in 1..=4 {
            assert_eq!(
                rank_k(&d, &qs, &gs, k).unwrap(),
                rank_k(&transformed, &qs, &gs, k).unwrap()
            );
        }
        assert_eq!(
            mean_average_precision(&d, &qs, &gs).unwrap(),
            mean_average_precision(&transformed, &qs, &gs).unwrap()
        );
    }

    #[test]
    fn empty_gallery_is_error() {
        assert!(matches!(
            rank_k(&[], &["a".to_string()], &[], 1),
            Err(EvalError::EmptyGallery)
        ));
    }
}
