//! K-uniform heterogeneous hypergraph over frame elements.
//!
//! Vertices are distinct (role, text) pairs; hyperedges are frames. Mined
//! hyperedges are recombinations of existing elements, so the vertex set is
//! fixed by the original frames. Hyperedges are kept sorted by id, which makes
//! every derived matrix independent of input order.

mod affinity;
mod candidates;
mod export;
mod intimacy;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::embedding::{EmbedError, EmbeddingProvider, FeatureVector};
use crate::frame::{DocumentId, Frame, FrameId, FrameSchema};
use crate::mixup::MinedFrame;

pub use affinity::{
    affinity_matrix, affinity_matrix_with, kernel_sum, pairwise_affinity, AffinityMatrix,
};
pub use candidates::{all_candidates, candidates, Candidate};
pub use export::{hypergraph_dot, hypergraph_snapshot, matrix_csv};
pub use intimacy::{
    intimacy, intimacy_with, normalize, row_normalize, IntimacyMatrix, IntimacyMode, LabeledMatrix,
    ITERATIVE_MAX_ITERATIONS, ITERATIVE_TOLERANCE,
};

#[derive(Debug, Error, PartialEq)]
pub enum HypergraphError {
    #[error("no embedding for frame {frame_id} role {role}")]
    MissingEmbedding { frame_id: String, role: String },
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("frame {frame_id} does not match the schema: {message}")]
    Schema { frame_id: String, message: String },
    #[error("unknown hyperedge {0}")]
    UnknownHyperedge(String),
    #[error("duplicate hyperedge {0}")]
    DuplicateHyperedge(String),
    #[error("mined hyperedge {frame_id} would add vertex ({role}, {text:?})")]
    NewVertex {
        frame_id: String,
        role: String,
        text: String,
    },
    #[error("{0}")]
    InvalidParameter(String),
    #[error("row {0} of the affinity matrix has no positive mass")]
    ZeroRow(usize),
}

/// Text → feature vector for one provider.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingTable {
    vectors: BTreeMap<String, FeatureVector>,
}

impl EmbeddingTable {
    /// Embed every distinct element text of `frames`.
    pub fn for_frames<'a, I>(
        frames: I,
        provider: &dyn EmbeddingProvider,
    ) -> Result<Self, EmbedError>
    where
        I: IntoIterator<Item = &'a Frame>,
    {
        let mut texts: Vec<String> = frames
            .into_iter()
            .flat_map(|f| f.elements.iter().map(|e| e.text.clone()))
            .collect();
        texts.sort();
        texts.dedup();
        let vectors = provider.embed_batch(&texts)?;
        Ok(Self {
            vectors: texts.into_iter().zip(vectors).collect(),
        })
    }

    pub fn insert(&mut self, text: impl Into<String>, v: FeatureVector) {
        self.vectors.insert(text.into(), v);
    }

    pub fn get(&self, text: &str) -> Option<&FeatureVector> {
        self.vectors.get(text)
    }

    /// Element vectors of a frame in role order.
    pub fn frame_vectors<'a>(
        &'a self,
        frame: &Frame,
    ) -> Result<Vec<&'a FeatureVector>, HypergraphError> {
        frame
            .elements
            .iter()
            .map(|e| {
                self.get(&e.text)
                    .ok_or_else(|| HypergraphError::MissingEmbedding {
                        frame_id: frame.frame_id.0.clone(),
                        role: e.role.clone(),
                    })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub role: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Origin {
    Original,
    Mined { parents: (FrameId, FrameId) },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperedge {
    pub frame: Frame,
    /// One vertex per role, in role order.
    pub vertices: Vec<usize>,
    pub origin: Origin,
    pub lineage: String,
}

impl Hyperedge {
    pub fn id(&self) -> &FrameId {
        &self.frame.frame_id
    }

    pub fn document(&self) -> &DocumentId {
        &self.frame.document_id
    }
}

#[derive(Debug, Clone)]
pub struct Hypergraph {
    schema: FrameSchema,
    vertices: Vec<Vertex>,
    features: Vec<FeatureVector>,
    vertex_index: BTreeMap<(usize, String), usize>,
    hyperedges: Vec<Hyperedge>,
}

impl Hypergraph {
    /// Build from a corpus: original frames define the vertices, then any
    /// mined frames already in the corpus are attached as mined hyperedges.
    pub fn build(
        corpus: &Corpus,
        provider: &dyn EmbeddingProvider,
    ) -> Result<Self, HypergraphError> {
        let table = EmbeddingTable::for_frames(&corpus.frames, provider)?;
        let lineage = |d: &DocumentId| corpus.lineage_of(d).unwrap_or(d.as_str()).to_string();
        let mut g = Self::from_frames(
            corpus.schema.clone(),
            corpus
                .frames
                .iter()
                .map(|f| (f.clone(), lineage(&f.document_id))),
            &table,
        )?;
        if !corpus.mined.is_empty() {
            let mined: Vec<(MinedFrame, String)> = corpus
                .mined
                .iter()
                .map(|m| (m.clone(), lineage(&m.frame.document_id)))
                .collect();
            g.insert_mined(mined)?;
        }
        Ok(g)
    }

    /// Build from (frame, lineage) pairs and a table covering every element text.
    pub fn from_frames<I>(
        schema: FrameSchema,
        frames: I,
        table: &EmbeddingTable,
    ) -> Result<Self, HypergraphError>
    where
        I: IntoIterator<Item = (Frame, String)>,
    {
        let mut g = Self {
            schema,
            vertices: Vec::new(),
            features: Vec::new(),
            vertex_index: BTreeMap::new(),
            hyperedges: Vec::new(),
        };
        let mut frames: Vec<(Frame, String)> = frames.into_iter().collect();
        frames.sort_by(|a, b| a.0.frame_id.cmp(&b.0.frame_id));
        for (frame, lineage) in frames {
            g.check_shape(&frame)?;
            let vecs = table.frame_vectors(&frame)?;
            let mut vertices = Vec::with_capacity(g.k());
            for (k, (el, fv)) in frame.elements.iter().zip(vecs).enumerate() {
                let key = (k, el.text.clone());
                let id = match g.vertex_index.get(&key) {
                    Some(&id) => id,
                    None => {
                        let id = g.vertices.len();
                        g.vertices.push(Vertex {
                            role: k,
                            text: el.text.clone(),
                        });
                        g.features.push(fv.clone());
                        g.vertex_index.insert(key, id);
                        id
                    }
                };
                vertices.push(id);
            }
            g.push_edge(Hyperedge {
                frame,
                vertices,
                origin: Origin::Original,
                lineage,
            })?;
        }
        g.sort_edges();
        Ok(g)
    }

    fn check_shape(&self, frame: &Frame) -> Result<(), HypergraphError> {
        let ok = frame.elements.len() == self.k()
            && frame
                .elements
                .iter()
                .zip(self.schema.roles())
                .all(|(e, r)| &e.role == r);
        if ok {
            Ok(())
        } else {
            Err(HypergraphError::Schema {
                frame_id: frame.frame_id.0.clone(),
                message: format!("expected roles {:?}", self.schema.roles()),
            })
        }
    }

    fn push_edge(&mut self, e: Hyperedge) -> Result<(), HypergraphError> {
        if self
            .hyperedges
            .iter()
            .any(|h| h.frame.frame_id == e.frame.frame_id)
        {
            return Err(HypergraphError::DuplicateHyperedge(
                e.frame.frame_id.0.clone(),
            ));
        }
        self.hyperedges.push(e);
        Ok(())
    }

    fn sort_edges(&mut self) {
        self.hyperedges
            .sort_by(|a, b| a.frame.frame_id.cmp(&b.frame.frame_id));
    }

    /// Attach mined frames. Every element must already be a vertex.
    pub(crate) fn insert_mined<I>(&mut self, mined: I) -> Result<(), HypergraphError>
    where
        I: IntoIterator<Item = (MinedFrame, String)>,
    {
        let mut staged = Vec::new();
        for (m, lineage) in mined {
            self.check_shape(&m.frame)?;
            let vertices = m
                .frame
                .elements
                .iter()
                .enumerate()
                .map(|(k, el)| {
                    self.vertex_index
                        .get(&(k, el.text.clone()))
                        .copied()
                        .ok_or_else(|| HypergraphError::NewVertex {
                            frame_id: m.frame.frame_id.0.clone(),
                            role: el.role.clone(),
                            text: el.text.clone(),
                        })
                })
                .collect::<Result<Vec<_>, _>>()?;
            staged.push(Hyperedge {
                frame: m.frame,
                vertices,
                origin: Origin::Mined { parents: m.parents },
                lineage,
            });
        }
        for e in staged {
            self.push_edge(e)?;
        }
        self.sort_edges();
        Ok(())
    }

    pub fn schema(&self) -> &FrameSchema {
        &self.schema
    }

    pub fn k(&self) -> usize {
        self.schema.k()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn hyperedges(&self) -> &[Hyperedge] {
        &self.hyperedges
    }

    pub fn edge_count(&self) -> usize {
        self.hyperedges.len()
    }

    pub fn index_of(&self, id: &FrameId) -> Option<usize> {
        self.hyperedges
            .binary_search_by(|h| h.frame.frame_id.cmp(id))
            .ok()
    }

    pub fn hyperedge(&self, id: &FrameId) -> Option<&Hyperedge> {
        self.index_of(id).map(|i| &self.hyperedges[i])
    }

    pub fn feature(&self, vertex: usize) -> &FeatureVector {
        &self.features[vertex]
    }

    /// Element feature vectors of hyperedge `e` in role order.
    pub fn edge_features(&self, e: usize) -> Vec<&FeatureVector> {
        self.hyperedges[e]
            .vertices
            .iter()
            .map(|&v| &self.features[v])
            .collect()
    }

    /// Table of every vertex text's vector.
    pub fn embedding_table(&self) -> EmbeddingTable {
        let mut t = EmbeddingTable::default();
        for (v, f) in self.vertices.iter().zip(&self.features) {
            t.insert(v.text.clone(), f.clone());
        }
        t
    }
}
