use std::collections::BTreeMap;
use std::path::Path;

use super::tuples::render_tuple;
use super::{ControlAttribute, LlmError};
use crate::frame::{Frame, FrameSchema, RISK_CATEGORIES};

/// Prompt pack shipped with the library.
pub const DEFAULT_PACK: &str = include_str!("../../prompts/default.pack");

const REQUIRED: [&str; 6] = [
    "parse_instruction",
    "generate_instruction",
    "generate_example_tuples",
    "generate_example_answer",
    "parse_example_text",
    "parse_example_answer",
];

/// Versioned set of named prompt templates.
///
/// Format: a `version: N` line, then sections introduced by `[[name]]` on a
/// line of their own. Section bodies are trimmed of surrounding blank lines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptPack {
    version: String,
    sections: BTreeMap<String, String>,
}

impl PromptPack {
    pub fn parse(text: &str) -> Result<Self, LlmError> {
        let mut version = None;
        let mut sections = BTreeMap::new();
        let mut current: Option<(String, Vec<&str>)> = None;
        for line in text.lines() {
            if let Some(name) = line
                .strip_prefix("[[")
                .and_then(|l| l.trim_end().strip_suffix("]]"))
            {
                if let Some((n, body)) = current.take() {
                    insert_section(&mut sections, n, &body)?;
                }
                current = Some((name.trim().to_string(), Vec::new()));
            } else if let Some((_, body)) = current.as_mut() {
                body.push(line);
            } else if let Some(v) = line.strip_prefix("version:") {
                version = Some(v.trim().to_string());
            } else if !line.trim().is_empty() && !line.starts_with('#') {
                return Err(LlmError::Pack(format!(
                    "unexpected line before first section: {line:?}"
                )));
            }
        }
        if let Some((n, body)) = current.take() {
            insert_section(&mut sections, n, &body)?;
        }
        let version = version.ok_or_else(|| LlmError::Pack("missing version line".into()))?;
        let pack = Self { version, sections };
        for name in REQUIRED {
            pack.section(name)?;
        }
        Ok(pack)
    }

    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LlmError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn section(&self, name: &str) -> Result<&str, LlmError> {
        self.sections
            .get(name)
            .map(String::as_str)
            .ok_or_else(|| LlmError::Pack(format!("missing section [[{name}]]")))
    }

    /// The pack's built-in parse exemplar.
    pub fn default_exemplar(&self) -> ParseExemplar {
        ParseExemplar {
            text: self.sections["parse_example_text"].clone(),
            answer: self.sections["parse_example_answer"].clone(),
        }
    }
}

impl Default for PromptPack {
    fn default() -> Self {
        Self::parse(DEFAULT_PACK).expect("bundled prompt pack is valid")
    }
}

fn insert_section(
    sections: &mut BTreeMap<String, String>,
    name: String,
    body: &[&str],
) -> Result<(), LlmError> {
    if name.is_empty() {
        return Err(LlmError::Pack("empty section name".into()));
    }
    let text = body.join("\n").trim_matches('\n').to_string();
    if sections.insert(name.clone(), text).is_some() {
        return Err(LlmError::Pack(format!("duplicate section [[{name}]]")));
    }
    Ok(())
}

/// Few-shot example: a passage and its tuple lines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseExemplar {
    pub text: String,
    pub answer: String,
}

/// `" (can be one of a, b, ...)"`, or empty for an open vocabulary.
/// Known risk categories keep their conventional order.
pub fn category_clause(schema: &FrameSchema) -> String {
    let Some(vocab) = schema.category_vocabulary() else {
        return String::new();
    };
    let mut cats: Vec<&String> = vocab.iter().collect();
    cats.sort_by_key(|c| {
        (
            RISK_CATEGORIES
                .iter()
                .position(|r| r == c)
                .unwrap_or(usize::MAX),
            c.as_str(),
        )
    });
    let list: Vec<&str> = cats.iter().map(|c| c.as_str()).collect();
    format!(" (can be one of {})", list.join(", "))
}

fn fill(template: &str, schema: &FrameSchema) -> String {
    template
        .replace("{category_clause}", &category_clause(schema))
        .replace("{tuple_format}", &schema.tuple_format())
}

pub fn build_parse_prompt(
    text: &str,
    schema: &FrameSchema,
    exemplars: &[ParseExemplar],
    pack: &PromptPack,
) -> Result<String, LlmError> {
    if text.trim().is_empty() {
        return Err(LlmError::EmptyText);
    }
    if exemplars.is_empty() {
        return Err(LlmError::NoExemplars);
    }
    let mut out = fill(pack.section("parse_instruction")?, schema);
    out.push_str("\n\n");
    for (i, ex) in exemplars.iter().enumerate() {
        let n = i + 1;
        out.push_str(&format!(
            "Example #{n}\n{}\n\nAnswer #{n}\n{}\n\n",
            ex.text.trim(),
            ex.answer.trim()
        ));
    }
    out.push_str("Test\n");
    out.push_str(text.trim());
    out.push('\n');
    Ok(out)
}

pub fn build_generation_prompt(
    frames: &[Frame],
    control: &ControlAttribute,
    temporal_annotations: &[String],
    schema: &FrameSchema,
    pack: &PromptPack,
) -> Result<String, LlmError> {
    if frames.is_empty() {
        return Err(LlmError::NoFrames);
    }
    let mut out = fill(pack.section("generate_instruction")?, schema);
    out.push('\n');
    out.push_str(pack.section(&format!("control_{}", control.kind.name()))?);
    if let Some(d) = control
        .directive
        .as_deref()
        .map(str::trim)
        .filter(|d| !d.is_empty())
    {
        out.push('\n');
        out.push_str(d);
    }
    out.push_str("\n\n");
    out.push_str(&format!(
        "Example #1\n{}\n\nAnswer #1\n{}\n\n",
        pack.section("generate_example_tuples")?,
        pack.section("generate_example_answer")?
    ));
    out.push_str("Test\n");
    for f in frames {
        out.push_str(&render_tuple(f));
        out.push('\n');
    }
    if !temporal_annotations.is_empty() {
        out.push_str(
            pack.section("temporal_header")
                .unwrap_or("Temporal context:"),
        );
        out.push('\n');
        for a in temporal_annotations {
            out.push_str(a.trim());
            out.push('\n');
        }
    }
    Ok(out)
}

/// Text after the last `Test` line of a prompt.
pub fn test_block(prompt: &str) -> &str {
    let start = if prompt.starts_with("Test\n") {
        Some(5)
    } else {
        prompt.rfind("\nTest\n").map(|i| i + 6)
    };
    start.map_or("", |s| &prompt[s..])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::ControlKind;

    fn frames(n: usize) -> Vec<Frame> {
        let s = FrameSchema::default();
        (0..n)
            .map(|i| {
                Frame::from_texts(
                    format!("f{i}"),
                    "d",
                    &s,
                    &["credit", &format!("event {i}"), "n/a", "loss"],
                )
            })
            .collect()
    }

    #[test]
    fn parse_prompt_matches_template() {
        let pack = PromptPack::default();
        let s = FrameSchema::default();
        let p = build_parse_prompt("Some text.", &s, &[pack.default_exemplar()], &pack).unwrap();
        assert!(p.contains("in the form of a tuple [<category>; <event>; <driver>; <impact>]"));
        assert!(p.contains("(can be one of credit, market, liquidity, operational, compliance, regulatory, legal, capital, conduct, strategic, technology, reputation, supplychain, environment)"));
        assert_eq!(p.matches("Example #1").count(), 1);
        assert!(!p.contains("Example #2"));
        assert!(p.contains("Answer #1\n[operational; customer bankruptcy; instability in markets; reduced capacity]"));
        assert!(p.ends_with("Test\nSome text.\n"));
    }

    #[test]
    fn exemplars_keep_order() {
        let pack = PromptPack::default();
        let s = FrameSchema::default();
        let ex = vec![
            ParseExemplar {
                text: "first".into(),
                answer: "[a; b; c; d]".into(),
            },
            ParseExemplar {
                text: "second".into(),
                answer: "[e; f; g; h]".into(),
            },
        ];
        let p = build_parse_prompt("x", &s, &ex, &pack).unwrap();
        let one = p.find("Example #1\nfirst").unwrap();
        let two = p.find("Example #2\nsecond").unwrap();
        assert!(one < two);
        assert_eq!(
            build_parse_prompt("x", &s, &[], &pack),
            Err(LlmError::NoExemplars)
        );
    }

    #[test]
    fn open_schema_has_no_category_clause() {
        let pack = PromptPack::default();
        let p = build_parse_prompt("x", &FrameSchema::open(), &[pack.default_exemplar()], &pack)
            .unwrap();
        assert!(p.starts_with("For a given text passage, list the risk category, the risk event"));
    }

    #[test]
    fn generation_prompt_layout() {
        let pack = PromptPack::default();
        let s = FrameSchema::default();
        let p = build_generation_prompt(&frames(2), &ControlAttribute::default(), &[], &s, &pack)
            .unwrap();
        assert!(p.contains("A tuple is in the format [<category>; <event>; <driver>; <impact>]"));
        assert!(
            p.contains("If a tuple item is n/a, then the corresponding value is not available.")
        );
        let test = test_block(&p);
        assert_eq!(test.lines().filter(|l| l.starts_with('[')).count(), 2);
        assert!(test.contains("[credit; event 1; n/a; loss]"));
        assert_eq!(
            build_generation_prompt(&[], &ControlAttribute::default(), &[], &s, &pack),
            Err(LlmError::NoFrames)
        );
    }

    #[test]
    fn controls_and_annotations() {
        let pack = PromptPack::default();
        let s = FrameSchema::default();
        let faq = ControlAttribute::new(ControlKind::Faq);
        let p = build_generation_prompt(&frames(1), &faq, &[], &s, &pack).unwrap();
        assert!(p.contains("question-answer format"));
        let opt = ControlAttribute::new(ControlKind::Optimistic).with_directive("Keep it short.");
        let ann = vec!["recurring since 2017".to_string()];
        let p = build_generation_prompt(&frames(1), &opt, &ann, &s, &pack).unwrap();
        assert!(p.contains("adds context to minimize the risk impact"));
        assert!(p.contains("\nKeep it short.\n"));
        assert!(test_block(&p).lines().any(|l| l == "recurring since 2017"));
        for c in ControlKind::ALL {
            assert!(pack.section(&format!("control_{c}")).is_ok());
        }
    }

    #[test]
    fn builders_are_pure() {
        let pack = PromptPack::default();
        let s = FrameSchema::default();
        let a = build_generation_prompt(&frames(3), &ControlAttribute::default(), &[], &s, &pack)
            .unwrap();
        let b = build_generation_prompt(&frames(3), &ControlAttribute::default(), &[], &s, &pack)
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pack_errors() {
        assert!(PromptPack::parse("[[parse_instruction]]\nx").is_err());
        let dup = format!("{DEFAULT_PACK}\n[[control_faq]]\nagain\n");
        assert!(PromptPack::parse(&dup)
            .unwrap_err()
            .to_string()
            .contains("duplicate"));
        assert_eq!(PromptPack::default().version(), "1");
    }
}
