//! Documents, frame schemas and frames.
//!
//! A frame is a K-tuple of role-tagged phrases. Elements are stored in schema
//! role order so that per-role comparisons between frames are positional.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Literal value used when a frame element is not applicable.
pub const NOT_APPLICABLE: &str = "n/a";

/// Default roles for risk-section frames.
pub const DEFAULT_ROLES: [&str; 4] = ["category", "event", "driver", "impact"];

/// Closed risk-category vocabulary used by the default parse prompt.
pub const RISK_CATEGORIES: [&str; 14] = [
    "credit",
    "market",
    "liquidity",
    "operational",
    "compliance",
    "regulatory",
    "legal",
    "capital",
    "conduct",
    "strategic",
    "technology",
    "reputation",
    "supplychain",
    "environment",
];

macro_rules! string_id {
    ($name:ident) => {
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(s: impl Into<String>) -> Self {
                Self(s.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_string())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

string_id!(FrameId);
string_id!(DocumentId);

#[derive(Debug, Error, PartialEq)]
pub enum SchemaError {
    #[error("schema needs at least 2 roles, got {0}")]
    TooFewRoles(usize),
    #[error("role names must be non-empty")]
    EmptyRole,
    #[error("duplicate role {0:?}")]
    DuplicateRole(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSchema {
    roles: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    category_vocabulary: Option<BTreeSet<String>>,
}

impl FrameSchema {
    pub fn new(
        roles: Vec<String>,
        category_vocabulary: Option<BTreeSet<String>>,
    ) -> Result<Self, SchemaError> {
        if roles.len() < 2 {
            return Err(SchemaError::TooFewRoles(roles.len()));
        }
        let mut seen = BTreeSet::new();
        for r in &roles {
            if r.trim().is_empty() {
                return Err(SchemaError::EmptyRole);
            }
            if !seen.insert(r.as_str()) {
                return Err(SchemaError::DuplicateRole(r.clone()));
            }
        }
        Ok(Self {
            roles,
            category_vocabulary,
        })
    }

    /// The four risk roles with no category restriction.
    pub fn open() -> Self {
        Self {
            roles: DEFAULT_ROLES.iter().map(|s| s.to_string()).collect(),
            category_vocabulary: None,
        }
    }

    pub fn k(&self) -> usize {
        self.roles.len()
    }

    pub fn roles(&self) -> &[String] {
        &self.roles
    }

    pub fn role_index(&self, role: &str) -> Option<usize> {
        self.roles.iter().position(|r| r == role)
    }

    pub fn category_vocabulary(&self) -> Option<&BTreeSet<String>> {
        self.category_vocabulary.as_ref()
    }

    /// Category values may name several comma-separated categories
    /// ("environment, regulatory"); each part must be in the vocabulary.
    /// Without a vocabulary every category is accepted.
    pub fn category_allowed(&self, category: &str) -> bool {
        let Some(vocab) = &self.category_vocabulary else {
            return true;
        };
        category
            .split(',')
            .map(|p| p.trim().to_lowercase())
            .all(|p| !p.is_empty() && vocab.contains(&p))
    }

    /// Render the tuple format clause, e.g. `[<category>; <event>; <driver>; <impact>]`.
    pub fn tuple_format(&self) -> String {
        let inner: Vec<String> = self.roles.iter().map(|r| format!("<{r}>")).collect();
        format!("[{}]", inner.join("; "))
    }
}

impl Default for FrameSchema {
    /// Four risk roles with the closed risk-category vocabulary.
    fn default() -> Self {
        Self {
            roles: DEFAULT_ROLES.iter().map(|s| s.to_string()).collect(),
            category_vocabulary: Some(RISK_CATEGORIES.iter().map(|s| s.to_string()).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FrameElement {
    pub role: String,
    pub text: String,
}

impl FrameElement {
    pub fn new(role: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            role: role.into(),
            text: text.into(),
        }
    }

    pub fn is_not_applicable(&self) -> bool {
        self.text.trim() == NOT_APPLICABLE
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub frame_id: FrameId,
    pub document_id: DocumentId,
    pub time_index: Option<i64>,
    pub elements: Vec<FrameElement>,
}

impl Frame {
    /// Build a frame from element texts in schema role order.
    pub fn from_texts<S: AsRef<str>>(
        frame_id: impl Into<FrameId>,
        document_id: impl Into<DocumentId>,
        schema: &FrameSchema,
        texts: &[S],
    ) -> Self {
        let elements = schema
            .roles()
            .iter()
            .zip(texts)
            .map(|(r, t)| FrameElement::new(r.clone(), t.as_ref()))
            .collect();
        Self {
            frame_id: frame_id.into(),
            document_id: document_id.into(),
            time_index: None,
            elements,
        }
    }

    pub fn with_time(mut self, t: i64) -> Self {
        self.time_index = Some(t);
        self
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.elements.iter().map(|e| e.text.as_str())
    }

    /// Element texts joined by single spaces.
    pub fn joined_text(&self) -> String {
        self.texts().collect::<Vec<_>>().join(" ")
    }
}

/// One failed frame invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Check a frame against a schema. An empty list means the frame is valid.
pub fn validate_frame(frame: &Frame, schema: &FrameSchema) -> Vec<Violation> {
    let mut out = Vec::new();
    let push = |out: &mut Vec<Violation>, field: String, message: String| {
        out.push(Violation { field, message })
    };
    if frame.frame_id.as_str().is_empty() {
        push(&mut out, "frame_id".into(), "empty frame id".into());
    }
    if frame.document_id.as_str().is_empty() {
        push(&mut out, "document_id".into(), "empty document id".into());
    }
    if frame.elements.len() != schema.k() {
        push(
            &mut out,
            "elements".into(),
            format!("arity {} ≠ {}", frame.elements.len(), schema.k()),
        );
    }
    for (k, el) in frame.elements.iter().enumerate() {
        let field = format!("elements[{k}]");
        match schema.role_index(&el.role) {
            None => push(
                &mut out,
                field.clone(),
                format!("unknown role {:?}", el.role),
            ),
            Some(idx) if idx != k => push(
                &mut out,
                field.clone(),
                format!(
                    "role {:?} out of schema order (expected position {idx})",
                    el.role
                ),
            ),
            Some(_) => {}
        }
        if el.text.trim().is_empty() {
            push(&mut out, field.clone(), "empty element text".into());
        }
        if k == 0 && !el.text.trim().is_empty() && !schema.category_allowed(&el.text) {
            push(
                &mut out,
                field,
                format!("category {:?} outside the closed vocabulary", el.text),
            );
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub document_id: DocumentId,
    pub raw_text: String,
    pub hierarchy_label: Option<String>,
    pub time_index: Option<i64>,
    /// Groups yearly documents of the same issuer. Defaults to the document id.
    pub lineage: Option<String>,
    pub frames: Vec<FrameId>,
}

impl Document {
    pub fn new(id: impl Into<DocumentId>, raw_text: impl Into<String>) -> Self {
        Self {
            document_id: id.into(),
            raw_text: raw_text.into(),
            hierarchy_label: None,
            time_index: None,
            lineage: None,
            frames: Vec::new(),
        }
    }

    pub fn lineage(&self) -> &str {
        self.lineage.as_deref().unwrap_or(self.document_id.as_str())
    }
}
