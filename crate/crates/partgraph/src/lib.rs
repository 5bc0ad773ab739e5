//! Body-part graphs for cross-part feature propagation: the 11-node
//! fine-class graph (one node per part) and the 5-node coarse-class graph
//! (trunk plus four limbs), together with the self-loop-augmented
//! degree-normalized adjacency used by graph convolution layers.

use gps_core::{labels, ParsingFrame, NUM_PARTS};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("adjacency must be square, got {0} entries")]
    NotSquare(usize),
    #[error("adjacency must be symmetric (differs at ({0}, {1}))")]
    NotSymmetric(usize, usize),
    #[error("node index {index} out of range for {nodes}-node graph")]
    NodeOutOfRange { index: usize, nodes: usize },
}

/// Which part graph the cross-part head runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphKind {
    Fine,
    Coarse,
}

/// A fixed body-part graph: the grouping of part labels onto nodes, the
/// 0/1 adjacency, and its normalized form
/// `D^{-1/2} (A + I) D^{-1/2}` (self-loops added before normalization so
/// the degree matrix is never singular).
#[derive(Debug, Clone, PartialEq)]
pub struct PartGraph {
    kind: GraphKind,
    node_labels: Vec<Vec<u8>>,
    adjacency: Vec<f64>,
    normalized: Vec<f64>,
}

impl PartGraph {
    fn build(kind: GraphKind, node_labels: Vec<Vec<u8>>, edges: &[(usize, usize)]) -> Self {
        let c = node_labels.len();
        let mut adjacency = vec![0.0; c * c];
        for &(i, j) in edges {
            adjacency[i * c + j] = 1.0;
            adjacency[j * c + i] = 1.0;
        }
        let normalized = normalize_adjacency(&adjacency, c).expect("built-in adjacency is valid");
        PartGraph { kind, node_labels, adjacency, normalized }
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    pub fn node_count(&self) -> usize {
        self.node_labels.len()
    }

    /// Part labels grouped onto `node`.
    pub fn node_labels(&self, node: usize) -> &[u8] {
        &self.node_labels[node]
    }

    pub fn adjacency(&self) -> &[f64] {
        &self.adjacency
    }

    pub fn normalized(&self) -> &[f64] {
        &self.normalized
    }

    /// Binary mask of the pixels whose label belongs to `node`.
    pub fn group_mask(&self, frame: &ParsingFrame, node: usize) -> Result<ParsingFrame, GraphError> {
        if node >= self.node_count() {
            return Err(GraphError::NodeOutOfRange { index: node, nodes: self.node_count() });
        }
        let members = &self.node_labels[node];
        let mask: Vec<u8> = frame
            .labels()
            .iter()
            .map(|l| u8::from(members.contains(l)))
            .collect();
        Ok(ParsingFrame::new(frame.height(), frame.width(), mask)
            .expect("mask preserves frame dimensions"))
    }
}

/// The 11-node graph: one node per part, label `p` on node `p - 1`.
/// Edges follow anatomical contact: head-torso, torso to both arms, both
/// legs and the dress, arm-hand and leg-foot chains, and dress to both
/// legs.
pub fn fine_graph() -> PartGraph {
    let node_labels: Vec<Vec<u8>> = (1..=NUM_PARTS as u8).map(|l| vec![l]).collect();
    let e = |a: u8, b: u8| (a as usize - 1, b as usize - 1);
    let edges = [
        e(labels::HEAD, labels::TORSO),
        e(labels::TORSO, labels::LEFT_ARM),
        e(labels::TORSO, labels::RIGHT_ARM),
        e(labels::TORSO, labels::LEFT_LEG),
        e(labels::TORSO, labels::RIGHT_LEG),
        e(labels::TORSO, labels::DRESS),
        e(labels::LEFT_ARM, labels::LEFT_HAND),
        e(labels::RIGHT_ARM, labels::RIGHT_HAND),
        e(labels::LEFT_LEG, labels::LEFT_FOOT),
        e(labels::RIGHT_LEG, labels::RIGHT_FOOT),
        e(labels::DRESS, labels::LEFT_LEG),
        e(labels::DRESS, labels::RIGHT_LEG),
    ];
    PartGraph::build(GraphKind::Fine, node_labels, &edges)
}

/// The 5-node graph: trunk {head, torso, dress} plus the four limb chains,
/// with the trunk connected to every limb (star topology, the fine edges
/// collapsed under the grouping).
pub fn coarse_graph() -> PartGraph {
    let node_labels: Vec<Vec<u8>> = vec![
        vec![labels::HEAD, labels::TORSO, labels::DRESS],
        vec![labels::LEFT_ARM, labels::LEFT_HAND],
        vec![labels::RIGHT_ARM, labels::RIGHT_HAND],
        vec![labels::LEFT_LEG, labels::LEFT_FOOT],
        vec![labels::RIGHT_LEG, labels::RIGHT_FOOT],
    ];
    let edges = [(0, 1), (0, 2), (0, 3), (0, 4)];
    PartGraph::build(GraphKind::Coarse, node_labels, &edges)
}

pub fn graph(kind: GraphKind) -> PartGraph {
    match kind {
        GraphKind::Fine => fine_graph(),
        GraphKind::Coarse => coarse_graph(),
    }
}

/// `D^{-1/2} (A + I) D^{-1/2}` for a symmetric 0/1 adjacency `a` (row-major
/// c x c), where `D` is the degree matrix of `A + I`.
pub fn normalize_adjacency(a: &[f64], c: usize) -> Result<Vec<f64>, GraphError> {
    if a.len() != c * c {
        return Err(GraphError::NotSquare(a.len()));
    }
    for i in 0..c {
        for j in (i + 1)..c {
            if a[i * c + j] != a[j * c + i] {
                return Err(GraphError::NotSymmetric(i, j));
            }
        }
    }
    let mut with_loops = a.to_vec();
    for i in 0..c {
        with_loops[i * c + i] += 1.0;
    }
    let deg: Vec<f64> = (0..c)
        .map(|i| with_loops[i * c..(i + 1) * c].iter().sum())
        .collect();
    // a_ij / sqrt(d_i * d_j): one square root per entry keeps values like
    // 1/sqrt(4) exact.
    let mut out = vec![0.0; c * c];
    for i in 0..c {
        for j in 0..c {
            out[i * c + j] = with_loops[i * c + j] / (deg[i] * deg[j]).sqrt();
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent dense-matrix evaluation of D^{-1/2}(A+I)D^{-1/2}.
    fn dense_oracle(a: &[f64], c: usize) -> Vec<f64> {
        let mut ai = a.to_vec();
        for i in 0..c {
            ai[i * c + i] += 1.0;
        }
        let mut d_inv_sqrt = vec![0.0; c * c];
        for i in 0..c {
            let deg: f64 = (0..c).map(|j| ai[i * c + j]).sum();
            d_inv_sqrt[i * c + i] = deg.powf(-0.5);
        }
        let matmul = |x: &[f64], y: &[f64]| {
            let mut out = vec![0.0; c * c];
            for i in 0..c {
                for j in 0..c {
                    for k in 0..c {
                        out[i * c + j] += x[i * c + k] * y[k * c + j];
                    }
                }
            }
            out
        };
        matmul(&matmul(&d_inv_sqrt, &ai), &d_inv_sqrt)
    }

    #[test]
    fn fine_graph_has_eleven_symmetric_nodes() {
        let g = fine_graph();
        assert_eq!(g.node_count(), 11);
        let c = 11;
        for i in 0..c {
            assert_eq!(g.adjacency()[i * c + i], 0.0);
            for j in 0..c {
                assert_eq!(g.adjacency()[i * c + j], g.adjacency()[j * c + i]);
            }
        }
        // head-torso connected, head-left-foot not.
        let head = labels::HEAD as usize - 1;
        let torso = labels::TORSO as usize - 1;
        let left_foot = labels::LEFT_FOOT as usize - 1;
        assert_eq!(g.adjacency()[head * c + torso], 1.0);
        assert_eq!(g.adjacency()[head * c + left_foot], 0.0);
    }

    #[test]
    fn fine_normalized_matches_dense_oracle() {
        let g = fine_graph();
        let want = dense_oracle(g.adjacency(), 11);
        for (a, b) in g.normalized().iter().zip(&want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn coarse_graph_grouping_and_star() {
        let g = coarse_graph();
        assert_eq!(g.node_count(), 5);
        assert_eq!(g.node_labels(0), &[1, 2, 11]);
        assert_eq!(g.node_labels(1), &[3, 5]);
        assert_eq!(g.node_labels(2), &[4, 6]);
        assert_eq!(g.node_labels(3), &[7, 9]);
        assert_eq!(g.node_labels(4), &[8, 10]);
        // Trunk to every limb, limbs disconnected from each other.
        for limb in 1..5 {
            assert_eq!(g.adjacency()[limb], 1.0);
        }
        for i in 1..5 {
            for j in 1..5 {
                if i != j {
                    assert_eq!(g.adjacency()[i * 5 + j], 0.0);
                }
            }
        }
        let want = dense_oracle(g.adjacency(), 5);
        for (a, b) in g.normalized().iter().zip(&want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_adjacency_normalizes_to_identity() {
        let out = normalize_adjacency(&[0.0; 9], 3).unwrap();
        let eye = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        assert_eq!(out, eye);
    }

    #[test]
    fn two_node_path_gives_all_halves() {
        let out = normalize_adjacency(&[0.0, 1.0, 1.0, 0.0], 2).unwrap();
        assert_eq!(out, vec![0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn asymmetric_input_rejected() {
        let a = [0.0, 1.0, 0.0, 0.0];
        assert!(matches!(normalize_adjacency(&a, 2), Err(GraphError::NotSymmetric(0, 1))));
    }

    #[test]
    fn normalized_entries_bounded_and_symmetric() {
        for g in [fine_graph(), coarse_graph()] {
            let c = g.node_count();
            for i in 0..c {
                for j in 0..c {
                    let v = g.normalized()[i * c + j];
                    assert!((0.0..=1.0).contains(&v));
                    assert_eq!(v, g.normalized()[j * c + i]);
                }
                assert!(g.normalized()[i * c + i] > 0.0);
            }
        }
    }

    #[test]
    fn graphs_are_connected_with_self_loops() {
        for g in [fine_graph(), coarse_graph()] {
            let c = g.node_count();
            let mut reached = vec![false; c];
            let mut stack = vec![0usize];
            while let Some(i) = stack.pop() {
                if reached[i] {
                    continue;
                }
                reached[i] = true;
                for j in 0..c {
                    if g.normalized()[i * c + j] > 0.0 && !reached[j] {
                        stack.push(j);
                    }
                }
            }
            assert!(reached.iter().all(|&r| r));
        }
    }

    #[test]
    fn group_mask_selects_member_labels() {
        let g = fine_graph();
        // Frame with no head pixels: head mask is all zero.
        let frame = ParsingFrame::new(2, 2, vec![0, 2, 7, 11]).unwrap();
        let head = g.group_mask(&frame, 0).unwrap();
        assert!(head.labels().iter().all(|&v| v == 0));
        let torso = g.group_mask(&frame, 1).unwrap();
        assert_eq!(torso.labels(), &[0, 1, 0, 0]);
    }

    #[test]
    fn coarse_trunk_mask_is_union_of_fine_masks() {
        let fine = fine_graph();
        let coarse = coarse_graph();
        let frame = ParsingFrame::new(2, 3, vec![1, 2, 11, 0, 7, 4]).unwrap();
        let trunk = coarse.group_mask(&frame, 0).unwrap();
        let mut union = vec![0u8; 6];
        for label in [labels::HEAD, labels::TORSO, labels::DRESS] {
            let m = fine.group_mask(&frame, label as usize - 1).unwrap();
            for (u, &v) in union.iter_mut().zip(m.labels()) {
                *u |= v;
            }
        }
        assert_eq!(trunk.labels(), union.as_slice());
    }

    #[test]
    fn fine_masks_partition_foreground() {
        let g = fine_graph();
        let frame = ParsingFrame::new(3, 3, vec![0, 1, 2, 3, 4, 5, 9, 10, 11]).unwrap();
        let mut sum = vec![0u8; 9];
        for node in 0..g.node_count() {
            let m = g.group_mask(&frame, node).unwrap();
            for (s, &v) in sum.iter_mut().zip(m.labels()) {
                *s += v;
            }
        }
        let fg = frame.binarize();
        assert_eq!(sum.as_slice(), fg.labels());
    }

    #[test]
    fn node_out_of_range_is_error() {
        let g = coarse_graph();
        let frame = ParsingFrame::background(2, 2).unwrap();
        assert!(matches!(
            g.group_mask(&frame, 5),
            Err(GraphError::NodeOutOfRange { index: 5, nodes: 5 })
        ));
    }

    #[test]
    fn permutation_consistency_of_normalization() {
        // Relabeling nodes with a permutation P maps the normalized matrix
        // to P A P^T.
        let g = fine_graph();
        let c = g.node_count();
        let perm: Vec<usize> = vec![3, 1, 4, 0, 2, 9, 10, 5, 6, 7, 8];
        let mut permuted = vec![0.0; c * c];
        for i in 0..c {
            for j in 0..c {
                permuted[perm[i] * c + perm[j]] = g.adjacency()[i * c + j];
            }
        }
        let norm_perm = normalize_adjacency(&permuted, c).unwrap();
        for i in 0..c {
            for j in 0..c {
                let want = g.normalized()[i * c + j];
                let got = norm_perm[perm[i] * c + perm[j]];
                assert!((want - got).abs() < 1e-15);
            }
        }
    }
}
