use std::time::{Duration, Instant};

use serde_json::{json, Value};

use super::client::{Completion, CompletionClient};
use super::{CompletionRequest, LlmError};

/// Request/response layout of the completion endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RequestShape {
    /// `{"messages": [{"role": "user", "content": ..}]}` → `choices[0].message.content`
    #[default]
    Chat,
    /// `{"prompt": ..}` → `choices[0].text`
    Completions,
}

impl std::str::FromStr for RequestShape {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "chat" => Ok(Self::Chat),
            "completions" => Ok(Self::Completions),
            _ => Err(format!("unknown request shape {s:?}")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct HttpCompletionConfig {
    pub url: String,
    pub model: String,
    pub token: Option<String>,
    pub timeout: Duration,
    pub shape: RequestShape,
}

pub struct HttpCompletionClient {
    config: HttpCompletionConfig,
    agent: ureq::Agent,
    id: String,
}

impl HttpCompletionClient {
    pub fn new(config: HttpCompletionConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let id = format!("http:{}", config.model);
        Self { config, agent, id }
    }

    fn body(&self, r: &CompletionRequest) -> Value {
        let model = if r.model.is_empty() {
            &self.config.model
        } else {
            &r.model
        };
        match self.config.shape {
            RequestShape::Chat => json!({
                "model": model,
                "messages": [{"role": "user", "content": r.prompt}],
                "temperature": r.temperature,
                "max_tokens": r.max_tokens,
            }),
            RequestShape::Completions => json!({
                "model": model,
                "prompt": r.prompt,
                "temperature": r.temperature,
                "max_tokens": r.max_tokens,
            }),
        }
    }

    fn extract(&self, v: &Value) -> Option<String> {
        let choice = v.get("choices")?.get(0)?;
        let text = match self.config.shape {
            RequestShape::Chat => choice.get("message")?.get("content")?,
            RequestShape::Completions => choice.get("text")?,
        };
        text.as_str().map(str::to_string)
    }
}

impl CompletionClient for HttpCompletionClient {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, request: &CompletionRequest) -> Result<Completion, LlmError> {
        let start = Instant::now();
        let mut req = self
            .agent
            .post(&self.config.url)
            .header("Content-Type", "application/json");
        if let Some(token) = &self.config.token {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        let mut resp = req
            .send_json(self.body(request))
            .map_err(|e| LlmError::Transient {
                status: None,
                message: format!("transport error: {e}"),
            })?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| LlmError::Transient {
                status: Some(status),
                message: format!("reading body: {e}"),
            })?;
        let message: String = text.chars().take(512).collect();
        match status {
            200..=299 => {}
            401 | 403 => return Err(LlmError::Auth { status, message }),
            408 | 429 | 500..=599 => {
                return Err(LlmError::Transient {
                    status: Some(status),
                    message,
                })
            }
            _ => return Err(LlmError::Remote { status, message }),
        }
        let v: Value = serde_json::from_str(&text).map_err(|e| LlmError::Remote {
            status,
            message: format!("response is not JSON: {e}"),
        })?;
        let text = self.extract(&v).ok_or_else(|| LlmError::Remote {
            status,
            message: "response has no completion text".into(),
        })?;
        Ok(Completion {
            text,
            latency_ms: start.elapsed().as_millis() as u64,
        })
    }
}
