use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::frame::{DocumentId, Frame, FrameElement, FrameId, FrameSchema, NOT_APPLICABLE};

static TUPLE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\[([^\[\]\n]*)\]").expect("valid regex"));

/// Make a phrase safe for the tuple wire format.
pub fn sanitize_element(text: &str) -> String {
    let cleaned: String = text
        .chars()
        .map(|c| match c {
            ';' => ',',
            '[' => '(',
            ']' => ')',
            '\n' | '\r' | '\t' => ' ',
            c => c,
        })
        .collect();
    let cleaned = cleaned.trim();
    if cleaned.is_empty() {
        NOT_APPLICABLE.to_string()
    } else {
        cleaned.to_string()
    }
}

/// `[a; b; c; d]`
pub fn render_tuple(frame: &Frame) -> String {
    let parts: Vec<String> = frame.texts().map(sanitize_element).collect();
    format!("[{}]", parts.join("; "))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseDiagnostic {
    /// 1-based line of the model output.
    pub line: usize,
    pub tuple: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParseOutcome {
    pub frames: Vec<Frame>,
    pub diagnostics: Vec<ParseDiagnostic>,
}

/// Extract every bracketed `;`-separated tuple from model output.
/// Frames get ids `{document_id}:f{n}` numbered from 1 in output order.
pub fn parse_llm_tuples(
    output: &str,
    schema: &FrameSchema,
    document_id: &DocumentId,
) -> ParseOutcome {
    let mut out = ParseOutcome::default();
    for (ln, line) in output.lines().enumerate() {
        for cap in TUPLE.captures_iter(line) {
            let whole = cap[0].to_string();
            let parts: Vec<&str> = cap[1].split(';').map(str::trim).collect();
            let diag = |reason: String| ParseDiagnostic {
                line: ln + 1,
                tuple: whole.clone(),
                reason,
            };
            if parts.len() != schema.k() {
                out.diagnostics.push(diag(format!(
                    "expected {} elements, found {}",
                    schema.k(),
                    parts.len()
                )));
                continue;
            }
            if let Some(i) = parts.iter().position(|p| p.is_empty()) {
                out.diagnostics
                    .push(diag(format!("empty {} element", schema.roles()[i])));
                continue;
            }
            if !schema.category_allowed(parts[0]) {
                out.diagnostics.push(diag(format!(
                    "category {:?} outside the vocabulary",
                    parts[0]
                )));
                continue;
            }
            let n = out.frames.len() + 1;
            out.frames.push(Frame {
                frame_id: FrameId(format!("{document_id}:f{n}")),
                document_id: document_id.clone(),
                time_index: None,
                elements: schema
                    .roles()
                    .iter()
                    .zip(&parts)
                    .map(|(r, t)| FrameElement::new(r.clone(), *t))
                    .collect(),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc() -> DocumentId {
        DocumentId::from("d1")
    }

    #[test]
    fn appendix_answers_parse() {
        let s = FrameSchema::default();
        let r = parse_llm_tuples(
            "[operational; customer bankruptcy; instability in markets; reduced capacity]",
            &s,
            &doc(),
        );
        assert!(r.diagnostics.is_empty());
        let f = &r.frames[0];
        assert_eq!(
            f.texts().collect::<Vec<_>>(),
            [
                "operational",
                "customer bankruptcy",
                "instability in markets",
                "reduced capacity"
            ]
        );
        assert_eq!(f.frame_id.as_str(), "d1:f1");

        let r = parse_llm_tuples(
            "[credit; no operations and minimal assets; n/a; inability to return value to stockholders]",
            &s,
            &doc(),
        );
        assert_eq!(r.frames[0].elements[2].text, "n/a");
        assert!(r.frames[0].elements[2].is_not_applicable());

        let r = parse_llm_tuples(
            "[environment, regulatory; climate change; regulatory developments; increase operating cost]",
            &s,
            &doc(),
        );
        assert_eq!(r.frames[0].elements[0].text, "environment, regulatory");
    }

    #[test]
    fn prose_without_brackets() {
        let r = parse_llm_tuples("no risks found.", &FrameSchema::default(), &doc());
        assert!(r.frames.is_empty() && r.diagnostics.is_empty());
    }

    #[test]
    fn bad_tuples_become_diagnostics() {
        let text = "Answer:\n[credit; a; b]\n[weather; a; b; c]\n[market;  ; b; c]\n  [market; a; b; c]  trailing";
        let r = parse_llm_tuples(text, &FrameSchema::default(), &doc());
        assert_eq!(r.frames.len(), 1);
        assert_eq!(r.frames[0].elements[1].text, "a");
        let lines: Vec<usize> = r.diagnostics.iter().map(|d| d.line).collect();
        assert_eq!(lines, [2, 3, 4]);
        assert!(r.diagnostics[1].reason.contains("vocabulary"));
        let open = parse_llm_tuples("[weather; a; b; c]", &FrameSchema::open(), &doc());
        assert_eq!(open.frames.len(), 1);
    }

    #[test]
    fn sanitizing() {
        assert_eq!(sanitize_element(" a; b [c]\nd "), "a, b (c) d");
        assert_eq!(sanitize_element("  "), "n/a");
        let s = FrameSchema::open();
        let f = Frame::from_texts("x", "d", &s, &["a;b", "[c]", "", "d"]);
        let back = parse_llm_tuples(&render_tuple(&f), &s, &doc());
        assert_eq!(
            back.frames[0].texts().collect::<Vec<_>>(),
            ["a,b", "(c)", "n/a", "d"]
        );
    }
}
