use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::exec::Execution;
use crate::frame::FrameId;

use super::{AffinityMatrix, Hypergraph, HypergraphError, IntimacyMatrix, Origin};

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub hyperedge: FrameId,
    pub index: usize,
    /// Intimacy S(source, candidate).
    pub score: f64,
    /// Mean per-element kernel similarity A/(K·w) that admitted it to the ε-ball.
    pub kernel_mean: f64,
}

/// Rank the hyperedges most intimate to `source`.
///
/// Same-document hyperedges are excluded (in temporal mode only those that
/// also share the time index and lineage), as is anything whose mean
/// per-element kernel similarity falls below `epsilon`. Ties are broken by
/// hyperedge id.
pub fn candidates(
    g: &Hypergraph,
    a: &AffinityMatrix,
    s: &IntimacyMatrix,
    source: &FrameId,
    topk: usize,
    epsilon: f64,
) -> Result<Vec<Candidate>, HypergraphError> {
    if topk == 0 {
        return Err(HypergraphError::InvalidParameter("topk must be ≥ 1".into()));
    }
    let n = g.edge_count();
    if a.len() != n || s.len() != n {
        return Err(HypergraphError::InvalidParameter(format!(
            "matrix size {}/{} does not match {} hyperedges",
            a.len(),
            s.len(),
            n
        )));
    }
    let src = g
        .index_of(source)
        .ok_or_else(|| HypergraphError::UnknownHyperedge(source.0.clone()))?;
    let edges = g.hyperedges();
    let se = &edges[src];
    let mut out: Vec<Candidate> = (0..n)
        .filter(|&j| j != src)
        .filter(|&j| {
            let e = &edges[j];
            if a.temporal() {
                !(e.lineage == se.lineage && e.frame.time_index == se.frame.time_index)
            } else {
                e.document() != se.document()
            }
        })
        .filter_map(|j| {
            let km = a.kernel_mean(src, j)?;
            (km >= epsilon).then(|| Candidate {
                hyperedge: edges[j].id().clone(),
                index: j,
                score: s.get(src, j),
                kernel_mean: km,
            })
        })
        .collect();
    out.sort_by(|x, y| {
        y.score
            .partial_cmp(&x.score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| x.hyperedge.cmp(&y.hyperedge))
    });
    out.truncate(topk);
    Ok(out)
}

/// Ranked candidates for every original hyperedge, keyed by source id.
pub fn all_candidates(
    g: &Hypergraph,
    a: &AffinityMatrix,
    s: &IntimacyMatrix,
    topk: usize,
    epsilon: f64,
    exec: Execution,
) -> Result<BTreeMap<FrameId, Vec<Candidate>>, HypergraphError> {
    let sources: Vec<&FrameId> = g
        .hyperedges()
        .iter()
        .filter(|h| h.origin == Origin::Original)
        .map(|h| h.id())
        .collect();
    let lists = exec.try_map_indexed(sources.len(), |i| {
        candidates(g, a, s, sources[i], topk, epsilon)
    })?;
    Ok(sources.into_iter().cloned().zip(lists).collect())
}
