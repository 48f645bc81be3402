use crate::hashing::fnv1a;

use super::{l2_normalize, EmbedError, EmbeddingProvider, FeatureVector};

/// Offline embedder: hashed character-trigram counts, L2-normalized.
///
/// Text is lowercased and padded with one space on each side, so every
/// non-empty input has at least one trigram and never maps to zero.
#[derive(Debug, Clone)]
pub struct TrigramEmbedder {
    dim: usize,
    id: String,
}

impl TrigramEmbedder {
    pub const DEFAULT_DIM: usize = 64;

    pub fn new(dim: usize) -> Result<Self, EmbedError> {
        if dim < 2 {
            return Err(EmbedError::DimensionMismatch {
                left: dim,
                right: 2,
            });
        }
        Ok(Self {
            dim,
            id: format!("trigram-{dim}"),
        })
    }

    fn embed_one(&self, text: &str) -> Result<FeatureVector, EmbedError> {
        if text.is_empty() {
            return Err(EmbedError::EmptyText);
        }
        let padded: Vec<char> = format!(" {} ", text.to_lowercase()).chars().collect();
        let mut counts = vec![0.0f64; self.dim];
        let mut buf = String::with_capacity(12);
        for w in padded.windows(3) {
            buf.clear();
            buf.extend(w);
            let bucket = (fnv1a(buf.as_bytes()) % self.dim as u64) as usize;
            counts[bucket] += 1.0;
        }
        if !l2_normalize(&mut counts) {
            return Err(EmbedError::ZeroVector {
                provider: self.id.clone(),
            });
        }
        FeatureVector::new(counts, self.id.clone())
    }
}

impl Default for TrigramEmbedder {
    fn default() -> Self {
        Self::new(Self::DEFAULT_DIM).expect("default dimension is valid")
    }
}

impl EmbeddingProvider for TrigramEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn dimension(&self) -> Option<usize> {
        Some(self.dim)
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<FeatureVector>, EmbedError> {
        texts.iter().map(|t| self.embed_one(t)).collect()
    }
}
