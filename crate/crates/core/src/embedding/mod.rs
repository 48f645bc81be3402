//! Feature vectors for frame elements and the cosine distance used by the
//! kernel affinities.

mod cache;
mod remote;
mod trigram;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::CachedEmbedder;
pub use remote::{RemoteEmbedder, RemoteEmbedderConfig};
pub use trigram::TrigramEmbedder;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbedError {
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("provider mismatch: {left} vs {right}")]
    ProviderMismatch { left: String, right: String },
    #[error("provider {provider} returned an all-zero vector")]
    ZeroVector { provider: String },
    #[error("provider {provider} has no vector for {text:?}")]
    UnknownText { provider: String, text: String },
    #[error("remote embedding provider failed (retryable: {retryable}): {message}")]
    Remote {
        retryable: bool,
        status: Option<u16>,
        message: String,
    },
    #[error("embedding cache: {0}")]
    Cache(String),
}

impl EmbedError {
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            EmbedError::Remote {
                retryable: true,
                ..
            }
        )
    }
}

/// A provider-tagged embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    values: Vec<f64>,
    provider_id: String,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>, provider_id: impl Into<String>) -> Result<Self, EmbedError> {
        let provider_id = provider_id.into();
        if values.iter().all(|v| *v == 0.0) {
            return Err(EmbedError::ZeroVector {
                provider: provider_id,
            });
        }
        Ok(Self {
            values,
            provider_id,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn provider_id(&self) -> &str {
        &self.provider_id
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Source of element feature vectors. Implementations must be deterministic
/// per (provider, text) and safe to call concurrently.
pub trait EmbeddingProvider: Send + Sync {
    fn id(&self) -> &str;

    /// Fixed output dimension, when known ahead of the first call.
    fn dimension(&self) -> Option<usize>;

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<FeatureVector>, EmbedError>;

    fn embed_text(&self, text: &str) -> Result<FeatureVector, EmbedError> {
        let mut v = self.embed_batch(&[text.to_string()])?;
        v.pop().ok_or(EmbedError::EmptyText)
    }
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for &P {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn dimension(&self) -> Option<usize> {
        (**self).dimension()
    }
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<FeatureVector>, EmbedError> {
        (**self).embed_batch(texts)
    }
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for Box<P> {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn dimension(&self) -> Option<usize> {
        (**self).dimension()
    }
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<FeatureVector>, EmbedError> {
        (**self).embed_batch(texts)
    }
}

/// Hand-set vectors keyed by exact text. Used for oracles and small fixtures.
#[derive(Debug, Clone)]
pub struct LookupEmbedder {
    id: String,
    dim: usize,
    table: BTreeMap<String, Vec<f64>>,
}

impl LookupEmbedder {
    pub fn new<I, S>(entries: I) -> Result<Self, EmbedError>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        let mut table = BTreeMap::new();
        let mut dim = None;
        for (text, v) in entries {
            if v.iter().all(|x| *x == 0.0) {
                return Err(EmbedError::ZeroVector {
                    provider: "lookup".into(),
                });
            }
            match dim {
                None => dim = Some(v.len()),
                Some(d) if d != v.len() => {
                    return Err(EmbedError::DimensionMismatch {
                        left: d,
                        right: v.len(),
                    })
                }
                _ => {}
            }
            table.insert(text.into(), v);
        }
        Ok(Self {
            id: "lookup".into(),
            dim: dim.unwrap_or(0),
            table,
        })
    }
}

impl EmbeddingProvider for LookupEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn dimension(&self) -> Option<usize> {
        Some(self.dim)
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<FeatureVector>, EmbedError> {
        texts
            .iter()
            .map(|t| {
                if t.is_empty() {
                    return Err(EmbedError::EmptyText);
                }
                let v = self.table.get(t).ok_or_else(|| EmbedError::UnknownText {
                    provider: self.id.clone(),
                    text: t.clone(),
                })?;
                FeatureVector::new(v.clone(), self.id.clone())
            })
            .collect()
    }
}

fn check_compatible(x: &FeatureVector, y: &FeatureVector) -> Result<(), EmbedError> {
    if x.provider_id != y.provider_id {
        return Err(EmbedError::ProviderMismatch {
            left: x.provider_id.clone(),
            right: y.provider_id.clone(),
        });
    }
    if x.values.len() != y.values.len() {
        return Err(EmbedError::DimensionMismatch {
            left: x.values.len(),
            right: y.values.len(),
        });
    }
    Ok(())
}

/// Cosine of two raw vectors. Identical inputs give exactly 1.
pub fn cosine(x: &[f64], y: &[f64]) -> f64 {
    if x == y {
        return 1.0;
    }
    let (mut dot, mut nx, mut ny) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        dot += a * b;
        nx += a * a;
        ny += b * b;
    }
    let denom = (nx * ny).sqrt();
    if denom == 0.0 {
        return 0.0;
    }
    (dot / denom).clamp(-1.0, 1.0)
}

/// δ(x, y) = 1 − cos(x, y), in [0, 2].
pub fn cosine_distance(x: &FeatureVector, y: &FeatureVector) -> Result<f64, EmbedError> {
    check_compatible(x, y)?;
    Ok(1.0 - cosine(&x.values, &y.values))
}

pub fn cosine_similarity(x: &FeatureVector, y: &FeatureVector) -> Result<f64, EmbedError> {
    check_compatible(x, y)?;
    Ok(cosine(&x.values, &y.values))
}

/// L2-normalize in place; returns false for a zero vector.
pub(crate) fn l2_normalize(v: &mut [f64]) -> bool {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= n);
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fv(v: &[f64]) -> FeatureVector {
        FeatureVector::new(v.to_vec(), "t").unwrap()
    }

    #[test]
    fn distance_identity_antipodal_orthogonal() {
        let x = fv(&[0.3, -1.2, 4.0]);
        let neg = fv(&[-0.3, 1.2, -4.0]);
        assert_eq!(cosine_distance(&x, &x).unwrap(), 0.0);
        assert_eq!(cosine_distance(&x, &neg).unwrap(), 2.0);
        assert_eq!(
            cosine_distance(&fv(&[1.0, 0.0]), &fv(&[0.0, 1.0])).unwrap(),
            1.0
        );
    }

    #[test]
    fn distance_rejects_mismatches() {
        assert!(matches!(
            cosine_distance(&fv(&[1.0, 0.0]), &fv(&[1.0, 0.0, 0.0])),
            Err(EmbedError::DimensionMismatch { left: 2, right: 3 })
        ));
        let other = FeatureVector::new(vec![1.0, 0.0], "u").unwrap();
        assert!(matches!(
            cosine_distance(&fv(&[1.0, 0.0]), &other),
            Err(EmbedError::ProviderMismatch { .. })
        ));
    }

    #[test]
    fn zero_vectors_rejected() {
        assert!(FeatureVector::new(vec![0.0; 4], "t").is_err());
    }

    #[test]
    fn lookup_embedder_errors_on_unknown() {
        let e = LookupEmbedder::new([("a", vec![1.0, 0.0])]).unwrap();
        assert!(e.embed_text("a").is_ok());
        assert!(matches!(
            e.embed_text("b"),
            Err(EmbedError::UnknownText { .. })
        ));
    }

    proptest! {
        #[test]
        fn distance_symmetric_and_bounded(
            a in proptest::collection::vec(-10.0f64..10.0, 5),
            b in proptest::collection::vec(-10.0f64..10.0, 5),
            gamma in 0.01f64..10.0,
        ) {
            prop_assume!(a.iter().any(|v| *v != 0.0) && b.iter().any(|v| *v != 0.0));
            let (x, y) = (fv(&a), fv(&b));
            let dxy = cosine_distance(&x, &y).unwrap();
            let dyx = cosine_distance(&y, &x).unwrap();
            prop_assert!((dxy - dyx).abs() <= 1e-12);
            prop_assert!((0.0..=2.0).contains(&dxy));
            let k = (-gamma * dxy).exp();
            prop_assert!(k > 0.0 && k <= 1.0);
        }
    }
}
