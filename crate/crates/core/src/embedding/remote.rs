use std::sync::OnceLock;
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{EmbedError, EmbeddingProvider, FeatureVector};

#[derive(Debug, Clone)]
pub struct RemoteEmbedderConfig {
    /// Full endpoint URL, e.g. `http://host:8080/v1/embeddings`.
    pub url: String,
    pub model: String,
    pub token: Option<String>,
    pub timeout: Duration,
}

/// HTTP client for an embedding service speaking
/// `{"input": [..], "model": ..} -> {"data": [{"embedding": [..]}, ..]}`.
pub struct RemoteEmbedder {
    config: RemoteEmbedderConfig,
    agent: ureq::Agent,
    id: String,
    dim: OnceLock<usize>,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingItem>,
}

#[derive(Deserialize)]
struct EmbeddingItem {
    embedding: Vec<f64>,
}

impl RemoteEmbedder {
    pub fn new(config: RemoteEmbedderConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let id = format!("remote:{}", config.model);
        Self {
            config,
            agent,
            id,
            dim: OnceLock::new(),
        }
    }

    fn request(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbedError> {
        let body = json!({ "input": texts, "model": self.config.model });
        let mut req = self
            .agent
            .post(&self.config.url)
            .header("Content-Type", "application/json");
        if let Some(token) = &self.config.token {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        let mut resp = req.send_json(&body).map_err(|e| EmbedError::Remote {
            retryable: true,
            status: None,
            message: format!("transport error: {e}"),
        })?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| EmbedError::Remote {
                retryable: true,
                status: Some(status),
                message: format!("reading body: {e}"),
            })?;
        if !(200..300).contains(&status) {
            let retryable = status == 408 || status == 429 || status >= 500;
            return Err(EmbedError::Remote {
                retryable,
                status: Some(status),
                message: truncate(&text, 512),
            });
        }
        let parsed: EmbeddingResponse =
            serde_json::from_str(&text).map_err(|e| EmbedError::Remote {
                retryable: false,
                status: Some(status),
                message: format!("unexpected response shape: {e}"),
            })?;
        if parsed.data.len() != texts.len() {
            return Err(EmbedError::Remote {
                retryable: false,
                status: Some(status),
                message: format!(
                    "expected {} embeddings, got {}",
                    texts.len(),
                    parsed.data.len()
                ),
            });
        }
        Ok(parsed.data.into_iter().map(|d| d.embedding).collect())
    }
}

fn truncate(s: &str, n: usize) -> String {
    s.chars().take(n).collect()
}

impl EmbeddingProvider for RemoteEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn dimension(&self) -> Option<usize> {
        self.dim.get().copied()
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<FeatureVector>, EmbedError> {
        if texts.iter().any(|t| t.is_empty()) {
            return Err(EmbedError::EmptyText);
        }
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let vectors = self.request(texts)?;
        let mut out = Vec::with_capacity(vectors.len());
        for v in vectors {
            let d = *self.dim.get_or_init(|| v.len());
            if v.len() != d || d < 2 {
                return Err(EmbedError::DimensionMismatch {
                    left: d,
                    right: v.len(),
                });
            }
            out.push(FeatureVector::new(v, self.id.clone())?);
        }
        Ok(out)
    }
}
