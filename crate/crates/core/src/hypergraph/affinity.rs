use crate::corpus::HierarchyWeights;
use crate::embedding::{cosine_distance, FeatureVector};
use crate::exec::Execution;
use crate::frame::Frame;

use super::{EmbeddingTable, Hypergraph, HypergraphError};

/// Σ_k exp(−γ·δ(x_k, y_k)) over aligned element vectors.
pub fn kernel_sum(
    x: &[&FeatureVector],
    y: &[&FeatureVector],
    gamma: f64,
) -> Result<f64, HypergraphError> {
    if x.len() != y.len() {
        return Err(HypergraphError::InvalidParameter(format!(
            "arity mismatch {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let mut s = 0.0;
    for (a, b) in x.iter().zip(y) {
        s += (-gamma * cosine_distance(a, b)?).exp();
    }
    Ok(s)
}

/// Kernel affinity between two frames scaled by a hierarchy weight `w`.
pub fn pairwise_affinity(
    e1: &Frame,
    e2: &Frame,
    table: &EmbeddingTable,
    gamma: f64,
    w: f64,
) -> Result<f64, HypergraphError> {
    check_params(gamma, w)?;
    let x = table.frame_vectors(e1)?;
    let y = table.frame_vectors(e2)?;
    Ok(w * kernel_sum(&x, &y, gamma)?)
}

fn check_params(gamma: f64, w: f64) -> Result<(), HypergraphError> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(HypergraphError::InvalidParameter(format!(
            "gamma must be > 0, got {gamma}"
        )));
    }
    if !(w.is_finite() && w >= 0.0) {
        return Err(HypergraphError::InvalidParameter(format!(
            "weight must be ≥ 0, got {w}"
        )));
    }
    Ok(())
}

/// Dense |E|×|E| affinity matrix with the per-pair hierarchy weight that
/// scaled each entry.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    labels: Vec<String>,
    k: usize,
    entries: Vec<f64>,
    weights: Vec<f64>,
    gamma: f64,
    hierarchy_applied: bool,
    temporal: bool,
}

impl AffinityMatrix {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn hierarchy_applied(&self) -> bool {
        self.hierarchy_applied
    }

    pub fn temporal(&self) -> bool {
        self.temporal
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.len() + j]
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.len();
        &self.entries[i * n..(i + 1) * n]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Mean per-element kernel similarity A/(K·w), in (0, 1]. `None` when the
    /// pair weight is zero.
    pub fn kernel_mean(&self, i: usize, j: usize) -> Option<f64> {
        let w = self.weight(i, j);
        (w > 0.0).then(|| self.get(i, j) / (self.k as f64 * w))
    }
}

pub fn affinity_matrix(
    g: &Hypergraph,
    gamma: f64,
    weights: &HierarchyWeights,
    temporal: bool,
) -> Result<AffinityMatrix, HypergraphError> {
    affinity_matrix_with(g, gamma, weights, temporal, Execution::default())
}

/// Fill the upper triangle pair by pair and mirror it. Each cell is a pure
/// function of its pair, so the result does not depend on `exec`.
///
/// In temporal mode hyperedges are labelled `frame@t`; the matrix then holds
/// A(i_mt, j_m't') for every pair of time-indexed frames.
pub fn affinity_matrix_with(
    g: &Hypergraph,
    gamma: f64,
    weights: &HierarchyWeights,
    temporal: bool,
    exec: Execution,
) -> Result<AffinityMatrix, HypergraphError> {
    check_params(gamma, 1.0)?;
    let n = g.edge_count();
    let edges = g.hyperedges();
    let features: Vec<Vec<&FeatureVector>> = (0..n).map(|e| g.edge_features(e)).collect();
    let rows = exec.try_map_indexed(n, |i| {
        (i..n)
            .map(|j| {
                let w = weights.weight(edges[i].document(), edges[j].document());
                Ok((w * kernel_sum(&features[i], &features[j], gamma)?, w))
            })
            .collect::<Result<Vec<(f64, f64)>, HypergraphError>>()
    })?;
    let mut entries = vec![0.0; n * n];
    let mut pair_w = vec![0.0; n * n];
    for (i, row) in rows.into_iter().enumerate() {
        for (off, (a, w)) in row.into_iter().enumerate() {
            let j = i + off;
            entries[i * n + j] = a;
            entries[j * n + i] = a;
            pair_w[i * n + j] = w;
            pair_w[j * n + i] = w;
        }
    }
    let labels = edges
        .iter()
        .map(|h| match (temporal, h.frame.time_index) {
            (true, Some(t)) => format!("{}@{t}", h.id()),
            _ => h.id().to_string(),
        })
        .collect();
    Ok(AffinityMatrix {
        labels,
        k: g.k(),
        entries,
        weights: pair_w,
        gamma,
        hierarchy_applied: !weights.is_uniform(),
        temporal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{EmbeddingProvider, LookupEmbedder};
    use crate::frame::FrameSchema;

    fn unit(i: usize) -> Vec<f64> {
        let mut v = vec![0.0; 4];
        v[i] = 1.0;
        v
    }

    fn two_frames() -> (Frame, Frame, EmbeddingTable) {
        // δ per element: (0, 1, 1, 2)
        let emb = LookupEmbedder::new([
            ("c", unit(0)),
            ("e1", unit(1)),
            ("e2", unit(2)),
            ("d1", unit(0)),
            ("d2", unit(3)),
            ("i1", vec![1.0, 1.0, 0.0, 0.0]),
            ("i2", vec![-1.0, -1.0, 0.0, 0.0]),
        ])
        .unwrap();
        let s = FrameSchema::open();
        let f1 = Frame::from_texts("f1", "a", &s, &["c", "e1", "d1", "i1"]);
        let f2 = Frame::from_texts("f2", "b", &s, &["c", "e2", "d2", "i2"]);
        let mut t = EmbeddingTable::default();
        for text in ["c", "e1", "e2", "d1", "d2", "i1", "i2"] {
            t.insert(text, emb.embed_text(text).unwrap());
        }
        (f1, f2, t)
    }

    #[test]
    fn identical_frames_score_k() {
        let (f1, _, t) = two_frames();
        assert_eq!(pairwise_affinity(&f1, &f1, &t, 1.0, 1.0).unwrap(), 4.0);
    }

    #[test]
    fn hand_distances_match_closed_form() {
        let (f1, f2, t) = two_frames();
        let got = pairwise_affinity(&f1, &f2, &t, 1.0, 1.0).unwrap();
        // scalar-by-scalar: exp(-0) + exp(-1) + exp(-1) + exp(-2)
        let mut oracle = 0.0;
        for d in [0.0f64, 1.0, 1.0, 2.0] {
            oracle += (-d).exp();
        }
        assert!((got - oracle).abs() < 1e-12);
        assert!((got - 1.8710).abs() < 1e-4);
        assert_eq!(got, pairwise_affinity(&f2, &f1, &t, 1.0, 1.0).unwrap());
    }

    #[test]
    fn zero_weight_zeroes_affinity() {
        let (f1, f2, t) = two_frames();
        assert_eq!(pairwise_affinity(&f1, &f2, &t, 1.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn missing_embedding_names_frame_and_role() {
        let (f1, _, t) = two_frames();
        let mut f3 = f1.clone();
        f3.frame_id = "f3".into();
        f3.elements[2].text = "unseen".into();
        assert_eq!(
            pairwise_affinity(&f1, &f3, &t, 1.0, 1.0),
            Err(HypergraphError::MissingEmbedding {
                frame_id: "f3".into(),
                role: "driver".into()
            })
        );
    }

    #[test]
    fn rejects_bad_parameters() {
        let (f1, f2, t) = two_frames();
        assert!(pairwise_affinity(&f1, &f2, &t, 0.0, 1.0).is_err());
        assert!(pairwise_affinity(&f1, &f2, &t, 1.0, -1.0).is_err());
    }
}
