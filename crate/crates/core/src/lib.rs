//! Semantic-frame hypergraph mining for controlled synthetic document
//! generation.
//!
//! Documents are parsed into K-tuples of role-tagged phrases (frames). The
//! frames form a K-uniform hypergraph whose hyperedges are compared with a
//! Gaussian kernel over element embeddings, smoothed with a PageRank-style
//! damping step, and recombined into new frames by masked mixup. Frames,
//! original and mined, are then rendered back to text by a language model
//! under a control attribute.

pub mod config;
pub mod corpus;
pub mod embedding;
pub mod exec;
pub mod frame;
pub mod hashing;
pub mod hypergraph;
pub mod linkpred;
pub mod llm;
pub mod metrics;
pub mod mixup;
pub mod pipeline;
pub mod temporal;
pub mod toy;

pub use corpus::{Corpus, CorpusError, HierarchyWeights};
pub use exec::Execution;
pub use frame::{
    validate_frame, Document, DocumentId, Frame, FrameElement, FrameId, FrameSchema, Violation,
};
