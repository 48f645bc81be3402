//! Dyadic link-prediction baselines.
//!
//! Frames become nodes of an ordinary graph, joined when they belong to
//! different documents and their mean per-element affinity reaches τ.
//! Unconnected inter-document pairs are then ranked by a neighbourhood
//! heuristic and the top pairs are mixed exactly like hypergraph candidates.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::frame::{DocumentId, FrameId};
use crate::hypergraph::{AffinityMatrix, Hypergraph};

/// Default interpolation weight of common-neighbour centrality.
pub const DEFAULT_CNC_ALPHA: f64 = 0.8;

#[derive(Debug, Error, PartialEq)]
pub enum LinkPredError {
    #[error("graph needs at least 2 nodes, has {0}")]
    TooSmall(usize),
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("edge ({0}, {1}) references a missing node")]
    BadEdge(usize, usize),
    #[error("affinity matrix has {0} rows for {1} hyperedges")]
    SizeMismatch(usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DyadicGraph {
    nodes: Vec<FrameId>,
    documents: Vec<DocumentId>,
    adjacency: Vec<BTreeSet<usize>>,
    tau: f64,
}

impl DyadicGraph {
    /// Build from nodes and undirected edges; duplicate edges collapse.
    pub fn from_edges(
        nodes: Vec<(FrameId, DocumentId)>,
        edges: &[(usize, usize)],
        tau: f64,
    ) -> Result<Self, LinkPredError> {
        let n = nodes.len();
        let mut adjacency = vec![BTreeSet::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(LinkPredError::BadEdge(u, v));
            }
            if u == v {
                return Err(LinkPredError::SelfLoop(u));
            }
            adjacency[u].insert(v);
            adjacency[v].insert(u);
        }
        let (nodes, documents) = nodes.into_iter().unzip();
        Ok(Self {
            nodes,
            documents,
            adjacency,
            tau,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn node(&self, i: usize) -> &FrameId {
        &self.nodes[i]
    }

    pub fn document(&self, i: usize) -> &DocumentId {
        &self.documents[i]
    }

    pub fn neighbors(&self, i: usize) -> &BTreeSet<usize> {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u].contains(&v)
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(BTreeSet::len).sum::<usize>() / 2
    }

    /// Edges as (u, v) with u < v.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (u, ns) in self.adjacency.iter().enumerate() {
            out.extend(ns.iter().filter(|&&v| v > u).map(|&v| (u, v)));
        }
        out
    }

    /// Hop distances from `src`; `None` when unreachable.
    pub fn bfs(&self, src: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.len()];
        dist[src] = Some(0);
        let mut q = VecDeque::from([src]);
        while let Some(u) = q.pop_front() {
            let du = dist[u].expect("queued nodes have distances");
            for &v in &self.adjacency[u] {
                if dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    q.push_back(v);
                }
            }
        }
        dist
    }
}

/// Join inter-document hyperedges whose affinity per element, A/K, is at least τ.
pub fn project_dyadic(
    g: &Hypergraph,
    affinity: &AffinityMatrix,
    tau: f64,
) -> Result<DyadicGraph, LinkPredError> {
    let n = g.edge_count();
    if affinity.len() != n {
        return Err(LinkPredError::SizeMismatch(affinity.len(), n));
    }
    let k = affinity.k() as f64;
    let edges_h = g.hyperedges();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if edges_h[i].document() != edges_h[j].document() && affinity.get(i, j) / k >= tau {
                edges.push((i, j));
            }
        }
    }
    let nodes = edges_h
        .iter()
        .map(|h| (h.id().clone(), h.document().clone()))
        .collect();
    DyadicGraph::from_edges(nodes, &edges, tau)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkMethod {
    Jaccard,
    PreferentialAttachment,
    AdamicAdar,
    ResourceAllocation,
    CommonNeighborCentrality,
}

impl LinkMethod {
    pub const ALL: [LinkMethod; 5] = [
        LinkMethod::Jaccard,
        LinkMethod::PreferentialAttachment,
        LinkMethod::AdamicAdar,
        LinkMethod::ResourceAllocation,
        LinkMethod::CommonNeighborCentrality,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LinkMethod::Jaccard => "jaccard",
            LinkMethod::PreferentialAttachment => "preferential_attachment",
            LinkMethod::AdamicAdar => "adamic_adar",
            LinkMethod::ResourceAllocation => "resource_allocation",
            LinkMethod::CommonNeighborCentrality => "common_neighbor_centrality",
        }
    }
}

impl fmt::Display for LinkMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LinkMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LinkMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown link prediction method {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    /// Lexicographically smaller frame id.
    pub u: FrameId,
    pub v: FrameId,
    pub score: f64,
}

fn common(g: &DyadicGraph, u: usize, v: usize) -> impl Iterator<Item = usize> + '_ {
    g.adjacency[u].intersection(&g.adjacency[v]).copied()
}

/// Score one pair. `dist_uv` is only consulted by common-neighbour centrality.
pub fn pair_score(
    g: &DyadicGraph,
    method: LinkMethod,
    u: usize,
    v: usize,
    dist_uv: Option<usize>,
    cnc_alpha: f64,
) -> f64 {
    match method {
        LinkMethod::Jaccard => {
            let inter = common(g, u, v).count();
            let union = g.adjacency[u].union(&g.adjacency[v]).count();
            if union == 0 {
                0.0
            } else {
                inter as f64 / union as f64
            }
        }
        LinkMethod::PreferentialAttachment => (g.degree(u) * g.degree(v)) as f64,
        LinkMethod::AdamicAdar => common(g, u, v)
            .filter(|&z| g.degree(z) > 1)
            .map(|z| 1.0 / (g.degree(z) as f64).ln())
            .sum(),
        LinkMethod::ResourceAllocation => common(g, u, v).map(|z| 1.0 / g.degree(z) as f64).sum(),
        LinkMethod::CommonNeighborCentrality => {
            let cn = common(g, u, v).count() as f64;
            let centrality = match dist_uv {
                Some(d) if d > 0 => g.len() as f64 / d as f64,
                _ => 0.0,
            };
            cnc_alpha * cn + (1.0 - cnc_alpha) * centrality
        }
    }
}

/// Rank every unconnected inter-document pair by `method`.
pub fn score_links(
    g: &DyadicGraph,
    method: LinkMethod,
    cnc_alpha: f64,
    exec: Execution,
) -> Result<Vec<ScoredPair>, LinkPredError> {
    let n = g.len();
    if n < 2 {
        return Err(LinkPredError::TooSmall(n));
    }
    let distances: Vec<Vec<Option<usize>>> = if method == LinkMethod::CommonNeighborCentrality {
        exec.map_indexed(n, |u| g.bfs(u))
    } else {
        Vec::new()
    };
    let rows = exec.map_indexed(n, |u| {
        ((u + 1)..n)
            .filter(|&v| !g.has_edge(u, v) && g.documents[u] != g.documents[v])
            .map(|v| {
                let d = distances.get(u).and_then(|row| row[v]);
                let score = pair_score(g, method, u, v, d, cnc_alpha);
                let (a, b) = if g.nodes[u] <= g.nodes[v] {
                    (u, v)
                } else {
                    (v, u)
                };
                ScoredPair {
                    u: g.nodes[a].clone(),
                    v: g.nodes[b].clone(),
                    score,
                }
            })
            .collect::<Vec<_>>()
    });
    let mut out: Vec<ScoredPair> = rows.into_iter().flatten().collect();
    out.sort_by(|x, y| {
        y.score
            .partial_cmp(&x.score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| (&x.u, &x.v).cmp(&(&y.u, &y.v)))
    });
    Ok(out)
}

/// Per-node partner lists in ranked order, as used by the mixup planner.
pub fn ranked_partners(
    pairs: &[ScoredPair],
    per_node: usize,
) -> BTreeMap<FrameId, Vec<(FrameId, f64)>> {
    let mut out: BTreeMap<FrameId, Vec<(FrameId, f64)>> = BTreeMap::new();
    for p in pairs {
        for (a, b) in [(&p.u, &p.v), (&p.v, &p.u)] {
            let list = out.entry(a.clone()).or_default();
            if list.len() < per_node {
                list.push((b.clone(), p.score));
            }
        }
    }
    out
}

/// CSV of scored pairs: `u,v,method,score`.
pub fn links_csv(pairs: &[ScoredPair], method: LinkMethod) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["u", "v", "method", "score"])
        .expect("in-memory write");
    for p in pairs {
        w.write_record([
            p.u.as_str(),
            p.v.as_str(),
            method.name(),
            &p.score.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}
