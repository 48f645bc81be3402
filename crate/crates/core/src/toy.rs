//! Bundled synthetic corpus: two issuers in two sectors reporting over
//! three years, with canned parse responses for the mock provider.

use crate::corpus::{Corpus, CorpusError, HierarchyWeights};
use crate::frame::{Document, Frame, FrameSchema};
use crate::llm::{render_tuple, CannedProvider};

struct ToyDoc {
    id: &'static str,
    lineage: &'static str,
    sector: &'static str,
    year: i64,
    frames: &'static [[&'static str; 4]],
}

const DOCS: [ToyDoc; 6] = [
    ToyDoc {
        id: "acme-2019",
        lineage: "acme",
        sector: "energy",
        year: 2019,
        frames: &[
            [
                "environment",
                "carbon emission rules",
                "climate policy",
                "higher operating costs",
            ],
            [
                "market",
                "oil price volatility",
                "global demand shifts",
                "lower revenue",
            ],
            [
                "operational",
                "pipeline outage",
                "aging infrastructure",
                "production loss",
            ],
            [
                "technology",
                "cyber attack",
                "weak security controls",
                "service disruption",
            ],
            [
                "regulatory",
                "new reporting rules",
                "policy change",
                "increased compliance costs",
            ],
        ],
    },
    ToyDoc {
        id: "acme-2020",
        lineage: "acme",
        sector: "energy",
        year: 2020,
        frames: &[
            [
                "environment",
                "carbon emission limits",
                "climate policy",
                "higher operating cost",
            ],
            [
                "market",
                "oil price volatility",
                "global demand collapse",
                "lower revenues",
            ],
            [
                "operational",
                "pipeline outages",
                "aging infrastructure",
                "production losses",
            ],
            [
                "technology",
                "cyber attacks",
                "weak security controls",
                "service disruptions",
            ],
            [
                "operational",
                "pandemic lockdown",
                "covid outbreak",
                "workforce shortage",
            ],
        ],
    },
    ToyDoc {
        id: "acme-2021",
        lineage: "acme",
        sector: "energy",
        year: 2021,
        frames: &[
            [
                "environment",
                "carbon emission limits",
                "climate regulation",
                "higher operating cost",
            ],
            [
                "market",
                "oil price swings",
                "global demand shifts",
                "lower revenues",
            ],
            [
                "operational",
                "pipeline outages",
                "aging infrastructure",
                "production losses",
            ],
            [
                "regulatory",
                "new reporting rule",
                "policy changes",
                "increased compliance cost",
            ],
            [
                "operational",
                "pandemic lockdowns",
                "covid outbreak",
                "workforce shortages",
            ],
        ],
    },
    ToyDoc {
        id: "birch-2019",
        lineage: "birch",
        sector: "banking",
        year: 2019,
        frames: &[
            [
                "credit",
                "loan defaults",
                "economic downturn",
                "higher credit losses",
            ],
            [
                "liquidity",
                "deposit outflows",
                "rising interest rates",
                "funding shortfall",
            ],
            [
                "compliance",
                "money laundering breach",
                "weak monitoring",
                "regulatory fines",
            ],
            [
                "technology",
                "cyber attack",
                "weak security controls",
                "service disruption",
            ],
            [
                "regulatory",
                "new reporting rules",
                "policy change",
                "increased compliance costs",
            ],
        ],
    },
    ToyDoc {
        id: "birch-2020",
        lineage: "birch",
        sector: "banking",
        year: 2020,
        frames: &[
            [
                "credit",
                "loan defaults",
                "economic recession",
                "higher credit loss",
            ],
            [
                "liquidity",
                "deposit outflow",
                "rising interest rates",
                "funding shortfalls",
            ],
            [
                "compliance",
                "money laundering breaches",
                "weak monitoring",
                "regulatory fines",
            ],
            [
                "technology",
                "cyber attacks",
                "weak security controls",
                "service disruptions",
            ],
            [
                "operational",
                "pandemic lockdown",
                "covid outbreak",
                "workforce shortage",
            ],
        ],
    },
    ToyDoc {
        id: "birch-2021",
        lineage: "birch",
        sector: "banking",
        year: 2021,
        frames: &[
            [
                "credit",
                "loan default",
                "economic recession",
                "higher credit losses",
            ],
            [
                "liquidity",
                "deposit outflows",
                "rising rates",
                "funding shortfall",
            ],
            [
                "compliance",
                "money laundering breaches",
                "weak transaction monitoring",
                "regulatory fine",
            ],
            [
                "regulatory",
                "new reporting rule",
                "policy changes",
                "increased compliance cost",
            ],
            [
                "credit",
                "commercial real estate losses",
                "remote work trend",
                "loan write downs",
            ],
        ],
    },
];

fn sentence(f: &[&str; 4]) -> String {
    let mut event = f[1].to_string();
    if let Some(c) = event.get_mut(0..1) {
        c.make_ascii_uppercase();
    }
    format!("{event} driven by {} could lead to {}.", f[2], f[3])
}

fn document(d: &ToyDoc) -> Document {
    let text: Vec<String> = d.frames.iter().map(sentence).collect();
    let mut doc = Document::new(d.id, text.join(" "));
    doc.hierarchy_label = Some(d.sector.to_string());
    doc.time_index = Some(d.year);
    doc.lineage = Some(d.lineage.to_string());
    doc
}

fn frames(d: &ToyDoc, schema: &FrameSchema) -> Vec<Frame> {
    d.frames
        .iter()
        .enumerate()
        .map(|(i, f)| {
            Frame::from_texts(format!("{}:f{}", d.id, i + 1), d.id, schema, f).with_time(d.year)
        })
        .collect()
}

/// Documents with raw text only, as input to the parse stage.
pub fn raw_corpus() -> Corpus {
    let mut c = Corpus::new(FrameSchema::default());
    c.documents = DOCS.iter().map(document).collect();
    c
}

/// Documents with their frames.
pub fn corpus() -> Corpus {
    let mut c = raw_corpus();
    let schema = c.schema.clone();
    c.frames = DOCS.iter().flat_map(|d| frames(d, &schema)).collect();
    c.link().expect("toy corpus is consistent");
    c
}

/// Responses that turn each raw document into its frames.
pub fn canned_responses() -> CannedProvider {
    let schema = FrameSchema::default();
    CannedProvider::new(DOCS.iter().map(|d| {
        let lines: Vec<String> = frames(d, &schema).iter().map(render_tuple).collect();
        (document(d).raw_text, lines.join("\n"))
    }))
}

/// Sector block weights for the toy documents.
pub fn block_weights(within: f64, across: f64) -> Result<HierarchyWeights, CorpusError> {
    HierarchyWeights::block(&raw_corpus().documents, within, across)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::DocumentId;
    use crate::llm::{parse_llm_tuples, CompletionClient, CompletionRequest};

    #[test]
    fn shape() {
        let c = corpus();
        assert_eq!(c.documents.len(), 6);
        assert_eq!(c.frames.len(), 30);
        let sectors: std::collections::BTreeSet<_> = c
            .documents
            .iter()
            .filter_map(|d| d.hierarchy_label.clone())
            .collect();
        assert_eq!(sectors.len(), 2);
        for f in &c.frames {
            assert!(crate::validate_frame(f, &c.schema).is_empty(), "{f:?}");
        }
    }

    #[test]
    fn canned_parse_recovers_frames() {
        let canned = canned_responses();
        let c = corpus();
        for d in &raw_corpus().documents {
            let req =
                CompletionRequest::new(format!("Instructions\n\nTest\n{}\n", d.raw_text)).unwrap();
            let out = canned.complete(&req).unwrap().text;
            let parsed =
                parse_llm_tuples(&out, &c.schema, &DocumentId::from(d.document_id.as_str()));
            let expected: Vec<&Frame> = c.frames_of(&d.document_id).collect();
            assert_eq!(parsed.frames.len(), expected.len());
            for (p, e) in parsed.frames.iter().zip(expected) {
                assert_eq!(p.elements, e.elements);
                assert_eq!(p.frame_id, e.frame_id);
            }
        }
    }
}
