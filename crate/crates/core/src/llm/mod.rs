//! Language-model stage: prompt construction, completion clients and
//! parsing of tuple-formatted model output back into frames.

mod client;
mod http;
mod prompt;
mod tuples;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::{DocumentId, FrameId};

pub use client::{
    build_client, CannedProvider, Completer, Completion, CompletionClient, EchoProvider,
    MockProvider, ProviderSettings, RunLogEntry, DEFAULT_ATTEMPTS, DEFAULT_MAX_CONCURRENCY,
};
pub use http::{HttpCompletionClient, HttpCompletionConfig, RequestShape};
pub use prompt::{
    build_generation_prompt, build_parse_prompt, category_clause, test_block, ParseExemplar,
    PromptPack, DEFAULT_PACK,
};
pub use tuples::{parse_llm_tuples, render_tuple, sanitize_element, ParseDiagnostic, ParseOutcome};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("prompt is empty")]
    EmptyPrompt,
    #[error("text to parse is empty")]
    EmptyText,
    #[error("at least one exemplar is required")]
    NoExemplars,
    #[error("at least one frame is required")]
    NoFrames,
    #[error("prompt pack: {0}")]
    Pack(String),
    #[error("completion provider not configured: {0}")]
    NotConfigured(String),
    #[error("authentication failed (status {status}): {message}")]
    Auth { status: u16, message: String },
    #[error("transient provider failure{}: {message}", status.map(|s| format!(" (status {s})")).unwrap_or_default())]
    Transient {
        status: Option<u16>,
        message: String,
    },
    #[error("provider error (status {status}): {message}")]
    Remote { status: u16, message: String },
    #[error("no canned response for prompt")]
    UnknownPrompt,
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted { attempts: usize, last: String },
    #[error("io: {0}")]
    Io(String),
}

impl LlmError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, LlmError::Transient { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub model: String,
}

impl CompletionRequest {
    pub fn new(prompt: impl Into<String>) -> Result<Self, LlmError> {
        let prompt = prompt.into();
        if prompt.trim().is_empty() {
            return Err(LlmError::EmptyPrompt);
        }
        Ok(Self {
            prompt,
            temperature: 0.0,
            max_tokens: 1024,
            model: String::new(),
        })
    }

    pub fn with_model(mut self, model: impl Into<String>) -> Self {
        self.model = model.into();
        self
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum ControlKind {
    #[default]
    Compact,
    Optimistic,
    Faq,
    Counterfactual,
    Mixups,
}

impl ControlKind {
    pub const ALL: [ControlKind; 5] = [
        ControlKind::Compact,
        ControlKind::Optimistic,
        ControlKind::Faq,
        ControlKind::Counterfactual,
        ControlKind::Mixups,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ControlKind::Compact => "compact",
            ControlKind::Optimistic => "optimistic",
            ControlKind::Faq => "faq",
            ControlKind::Counterfactual => "counterfactual",
            ControlKind::Mixups => "mixups",
        }
    }
}

impl fmt::Display for ControlKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ControlKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ControlKind::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown control attribute {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ControlAttribute {
    pub kind: ControlKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directive: Option<String>,
}

impl ControlAttribute {
    pub fn new(kind: ControlKind) -> Self {
        Self {
            kind,
            directive: None,
        }
    }

    pub fn with_directive(mut self, directive: impl Into<String>) -> Self {
        self.directive = Some(directive.into());
        self
    }
}

/// A frame handed to the generator, with where it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobFrame {
    pub frame_id: FrameId,
    pub tuple: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parents: Option<(FrameId, FrameId)>,
}

impl JobFrame {
    pub fn is_mined(&self) -> bool {
        self.parents.is_some()
    }
}

/// Link from a generated sentence to the frame it best expresses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceLink {
    pub sentence: usize,
    pub frame_id: FrameId,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationJob {
    pub job_id: String,
    pub document_id: DocumentId,
    pub frames: Vec<JobFrame>,
    pub control: ControlAttribute,
    #[serde(default)]
    pub temporal_annotations: Vec<String>,
    pub prompt: String,
    pub output: String,
    #[serde(default)]
    pub trace: Vec<TraceLink>,
}

impl GenerationJob {
    /// Every traced frame is one of the job's frames.
    pub fn trace_is_consistent(&self) -> bool {
        self.trace
            .iter()
            .all(|l| self.frames.iter().any(|f| f.frame_id == l.frame_id))
    }
}
