//! Corpus persistence: the JSONL corpus dialect and hierarchy-weight CSVs.
//!
//! One JSON object per line, discriminated by `kind`:
//! `schema`, `document`, `frame` and `mined_frame`. Lines of kind `header`
//! (artifact metadata) are skipped on load.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::{
    validate_frame, Document, DocumentId, Frame, FrameElement, FrameId, FrameSchema,
};
use crate::mixup::{MinedFrame, MixMask};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("frame {frame_id} references unknown document {document_id}")]
    DanglingDocument {
        frame_id: String,
        document_id: String,
    },
    #[error("duplicate {what} id {id}")]
    DuplicateId { what: &'static str, id: String },
    #[error("hierarchy weights: {0}")]
    Weights(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Prior document-pair weights. Symmetric; unlisted pairs weigh 1.0.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HierarchyWeights {
    pairs: BTreeMap<(DocumentId, DocumentId), f64>,
}

fn ordered(a: &DocumentId, b: &DocumentId) -> (DocumentId, DocumentId) {
    if a <= b {
        (a.clone(), b.clone())
    } else {
        (b.clone(), a.clone())
    }
}

impl HierarchyWeights {
    pub fn uniform() -> Self {
        Self::default()
    }

    /// Set a pair weight. Setting (j,i) after (i,j) to a different value is an error.
    pub fn insert(&mut self, a: &DocumentId, b: &DocumentId, w: f64) -> Result<(), CorpusError> {
        if !w.is_finite() || w < 0.0 {
            return Err(CorpusError::Weights(format!(
                "weight for ({a},{b}) must be finite and ≥ 0, got {w}"
            )));
        }
        let key = ordered(a, b);
        if let Some(prev) = self.pairs.get(&key) {
            if *prev != w {
                return Err(CorpusError::Weights(format!(
                    "asymmetric weights for ({a},{b}): {prev} vs {w}"
                )));
            }
        }
        self.pairs.insert(key, w);
        Ok(())
    }

    pub fn weight(&self, a: &DocumentId, b: &DocumentId) -> f64 {
        self.pairs.get(&ordered(a, b)).copied().unwrap_or(1.0)
    }

    /// True when no pair deviates from the default weight.
    pub fn is_uniform(&self) -> bool {
        self.pairs.values().all(|&w| w == 1.0)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Block weights from document hierarchy labels: `within` for documents
    /// sharing a label, `across` otherwise. Unlabelled documents keep 1.0.
    pub fn block(documents: &[Document], within: f64, across: f64) -> Result<Self, CorpusError> {
        let mut w = Self::default();
        for (i, a) in documents.iter().enumerate() {
            for b in &documents[i..] {
                let (Some(la), Some(lb)) = (&a.hierarchy_label, &b.hierarchy_label) else {
                    continue;
                };
                w.insert(
                    &a.document_id,
                    &b.document_id,
                    if la == lb { within } else { across },
                )?;
            }
        }
        Ok(w)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&DocumentId, &DocumentId, f64)> {
        self.pairs.iter().map(|((a, b), w)| (a, b, *w))
    }

    /// Read `doc_i,doc_j,weight` rows. A leading header row is tolerated.
    pub fn from_csv_reader<R: io::Read>(r: R) -> Result<Self, CorpusError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(r);
        let mut out = Self::default();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| CorpusError::Weights(e.to_string()))?;
            if rec.len() != 3 {
                return Err(CorpusError::Weights(format!(
                    "row {}: expected 3 fields",
                    row + 1
                )));
            }
            let w: f64 = match rec[2].parse() {
                Ok(w) => w,
                Err(_) if row == 0 => continue,
                Err(_) => {
                    return Err(CorpusError::Weights(format!(
                        "row {}: bad weight {:?}",
                        row + 1,
                        &rec[2]
                    )))
                }
            };
            out.insert(&DocumentId::from(&rec[0]), &DocumentId::from(&rec[1]), w)?;
        }
        Ok(out)
    }

    pub fn load_csv(path: &Path) -> Result<Self, CorpusError> {
        Self::from_csv_reader(fs::File::open(path)?)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("doc_i,doc_j,weight\n");
        for (a, b, w) in self.iter() {
            s.push_str(&format!("{a},{b},{w}\n"));
        }
        s
    }
}

/// A validated, cross-referenced set of documents and frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub schema: FrameSchema,
    pub documents: Vec<Document>,
    pub frames: Vec<Frame>,
    pub mined: Vec<MinedFrame>,
    pub weights: HierarchyWeights,
}

impl Corpus {
    pub fn new(schema: FrameSchema) -> Self {
        Self {
            schema,
            documents: Vec::new(),
            frames: Vec::new(),
            mined: Vec::new(),
            weights: HierarchyWeights::default(),
        }
    }

    pub fn document(&self, id: &DocumentId) -> Option<&Document> {
        self.documents.iter().find(|d| &d.document_id == id)
    }

    pub fn frame(&self, id: &FrameId) -> Option<&Frame> {
        self.frames.iter().find(|f| &f.frame_id == id)
    }

    pub fn frames_of<'a>(&'a self, doc: &'a DocumentId) -> impl Iterator<Item = &'a Frame> + 'a {
        self.frames.iter().filter(move |f| &f.document_id == doc)
    }

    pub fn mined_for<'a>(
        &'a self,
        doc: &'a DocumentId,
    ) -> impl Iterator<Item = &'a MinedFrame> + 'a {
        self.mined
            .iter()
            .filter(move |m| &m.frame.document_id == doc)
    }

    pub fn lineage_of(&self, doc: &DocumentId) -> Option<&str> {
        self.document(doc).map(Document::lineage)
    }

    /// Recompute every document's frame list from the frames' owners and
    /// check cross references.
    pub fn link(&mut self) -> Result<(), CorpusError> {
        let mut doc_index = BTreeMap::new();
        for (i, d) in self.documents.iter().enumerate() {
            if doc_index.insert(d.document_id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateId {
                    what: "document",
                    id: d.document_id.0.clone(),
                });
            }
        }
        for d in &mut self.documents {
            d.frames.clear();
        }
        let mut seen = BTreeSet::new();
        let all = self
            .frames
            .iter_mut()
            .chain(self.mined.iter_mut().map(|m| &mut m.frame));
        for f in all {
            if !seen.insert(f.frame_id.clone()) {
                return Err(CorpusError::DuplicateId {
                    what: "frame",
                    id: f.frame_id.0.clone(),
                });
            }
            let Some(&di) = doc_index.get(&f.document_id) else {
                return Err(CorpusError::DanglingDocument {
                    frame_id: f.frame_id.0.clone(),
                    document_id: f.document_id.0.clone(),
                });
            };
            if f.time_index.is_none() {
                f.time_index = self.documents[di].time_index;
            }
        }
        for f in &self.frames {
            let di = doc_index[&f.document_id];
            self.documents[di].frames.push(f.frame_id.clone());
        }
        for m in &self.mined {
            for (p, pd) in [
                (&m.parents.0, &m.parent_documents.0),
                (&m.parents.1, &m.parent_documents.1),
            ] {
                if !doc_index.contains_key(pd) {
                    return Err(CorpusError::DanglingDocument {
                        frame_id: p.0.clone(),
                        document_id: pd.0.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Parse the JSONL corpus dialect.
    pub fn from_jsonl_reader<R: BufRead>(r: R) -> Result<Self, CorpusError> {
        let mut schema = None;
        let mut documents = Vec::new();
        let mut pending = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let lineno = i + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
                line: lineno,
                message: e.to_string(),
            })?;
            match rec {
                Record::Header(_) => {}
                Record::Schema {
                    roles,
                    category_vocabulary,
                } => {
                    if schema.is_some() || !documents.is_empty() || !pending.is_empty() {
                        return Err(CorpusError::Malformed {
                            line: lineno,
                            message: "schema must be the first record and appear once".into(),
                        });
                    }
                    schema = Some(FrameSchema::new(roles, category_vocabulary).map_err(|e| {
                        CorpusError::Malformed {
                            line: lineno,
                            message: e.to_string(),
                        }
                    })?);
                }
                Record::Document(d) => documents.push(Document {
                    document_id: d.id,
                    raw_text: d.text,
                    hierarchy_label: d.hierarchy_label,
                    time_index: d.time_index,
                    lineage: d.lineage,
                    frames: Vec::new(),
                }),
                Record::Frame(f) => pending.push((lineno, f, None)),
                Record::MinedFrame(m) => {
                    let prov = (m.parents, m.parent_documents, m.mask, m.seed);
                    pending.push((lineno, m.frame, Some(prov)));
                }
            }
        }
        let schema = schema.unwrap_or_default();
        let mut corpus = Corpus::new(schema);
        corpus.documents = documents;
        for (lineno, rec, prov) in pending {
            let frame = rec.into_frame(&corpus.schema, lineno)?;
            let violations = validate_frame(&frame, &corpus.schema);
            if !violations.is_empty() {
                let msg: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
                return Err(CorpusError::Malformed {
                    line: lineno,
                    message: msg.join("; "),
                });
            }
            match prov {
                None => corpus.frames.push(frame),
                Some((parents, parent_documents, bits, seed)) => {
                    let mask = MixMask::from_bits(bits.iter().map(|&b| b != 0).collect(), seed)
                        .map_err(|e| CorpusError::Malformed {
                            line: lineno,
                            message: e.to_string(),
                        })?;
                    corpus.mined.push(MinedFrame {
                        frame,
                        parents: (parents[0].clone(), parents[1].clone()),
                        parent_documents: (
                            parent_documents[0].clone(),
                            parent_documents[1].clone(),
                        ),
                        mask,
                    });
                }
            }
        }
        corpus.link()?;
        Ok(corpus)
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        Self::from_jsonl_reader(BufReader::new(fs::File::open(path)?))
    }

    /// Load a corpus and, if given, a hierarchy-weights CSV.
    pub fn load_with_weights(path: &Path, weights: Option<&Path>) -> Result<Self, CorpusError> {
        let mut c = Self::load(path)?;
        if let Some(w) = weights {
            c.weights = HierarchyWeights::load_csv(w)?;
        }
        Ok(c)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut push = |r: &Record| {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        };
        push(&Record::Schema {
            roles: self.schema.roles().to_vec(),
            category_vocabulary: self.schema.category_vocabulary().cloned(),
        });
        for d in &self.documents {
            push(&Record::Document(DocumentRecord {
                id: d.document_id.clone(),
                text: d.raw_text.clone(),
                hierarchy_label: d.hierarchy_label.clone(),
                time_index: d.time_index,
                lineage: d.lineage.clone(),
            }));
        }
        for f in &self.frames {
            push(&Record::Frame(FrameRecord::from_frame(f)));
        }
        for m in &self.mined {
            push(&Record::MinedFrame(MinedRecord::from_mined(m)));
        }
        out
    }

    /// Only the `mined_frame` records, for a file that accompanies a corpus.
    pub fn mined_jsonl(mined: &[MinedFrame]) -> String {
        let mut out = String::new();
        for m in mined {
            out.push_str(
                &serde_json::to_string(&Record::MinedFrame(MinedRecord::from_mined(m)))
                    .expect("record serializes"),
            );
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        let mut f = fs::File::create(path)?;
        f.write_all(self.to_jsonl().as_bytes())?;
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Record {
    Header(serde_json::Value),
    Schema {
        roles: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        category_vocabulary: Option<BTreeSet<String>>,
    },
    Document(DocumentRecord),
    Frame(FrameRecord),
    MinedFrame(MinedRecord),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocumentRecord {
    id: DocumentId,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hierarchy_label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    time_index: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lineage: Option<String>,
}

/// Wire form of a frame; elements keyed by role name.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrameRecord {
    pub id: FrameId,
    pub document_id: DocumentId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_index: Option<i64>,
    pub elements: BTreeMap<String, String>,
}

impl FrameRecord {
    pub fn from_frame(f: &Frame) -> Self {
        Self {
            id: f.frame_id.clone(),
            document_id: f.document_id.clone(),
            time_index: f.time_index,
            elements: f
                .elements
                .iter()
                .map(|e| (e.role.clone(), e.text.clone()))
                .collect(),
        }
    }

    pub fn into_frame(self, schema: &FrameSchema, line: usize) -> Result<Frame, CorpusError> {
        let mut elements = Vec::with_capacity(schema.k());
        for role in schema.roles() {
            let text = self
                .elements
                .get(role)
                .ok_or_else(|| CorpusError::Malformed {
                    line,
                    message: format!("frame {} is missing role {role:?}", self.id),
                })?;
            elements.push(FrameElement::new(role.clone(), text.clone()));
        }
        if let Some(extra) = self
            .elements
            .keys()
            .find(|r| schema.role_index(r).is_none())
        {
            return Err(CorpusError::Malformed {
                line,
                message: format!("frame {} has unknown role {extra:?}", self.id),
            });
        }
        Ok(Frame {
            frame_id: self.id,
            document_id: self.document_id,
            time_index: self.time_index,
            elements,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct MinedRecord {
    #[serde(flatten)]
    frame: FrameRecord,
    parents: [FrameId; 2],
    parent_documents: [DocumentId; 2],
    mask: Vec<u8>,
    seed: u64,
}

impl MinedRecord {
    fn from_mined(m: &MinedFrame) -> Self {
        Self {
            frame: FrameRecord::from_frame(&m.frame),
            parents: [m.parents.0.clone(), m.parents.1.clone()],
            parent_documents: [m.parent_documents.0.clone(), m.parent_documents.1.clone()],
            mask: m.mask.bits().iter().map(|&b| u8::from(b)).collect(),
            seed: m.mask.seed(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{"kind":"document","id":"d1","text":"Fuel prices rose.","hierarchy_label":"aviation","time_index":2020}
{"kind":"document","id":"d2","text":"Trials failed.","hierarchy_label":"biotech"}
{"kind":"frame","id":"f1","document_id":"d1","elements":{"category":"market","event":"fuel prices","driver":"oil volatility","impact":"lower margins"}}
{"kind":"frame","id":"f2","document_id":"d1","elements":{"category":"operational","event":"groundings","driver":"n/a","impact":"lost revenue"}}
{"kind":"frame","id":"f3","document_id":"d2","time_index":2021,"elements":{"category":"regulatory","event":"trial failure","driver":"safety","impact":"delay"}}
{"kind":"frame","id":"f4","document_id":"d2","elements":{"category":"legal","event":"litigation","driver":"patents","impact":"costs"}}
"#;

    #[test]
    fn loads_and_links() {
        let c = Corpus::from_jsonl_reader(SAMPLE.as_bytes()).unwrap();
        assert_eq!(c.documents.len(), 2);
        assert_eq!(c.frames.len(), 4);
        assert_eq!(
            c.documents[0].frames,
            vec![FrameId::from("f1"), FrameId::from("f2")]
        );
        // frames inherit the document's time index unless they carry their own
        assert_eq!(c.frames[0].time_index, Some(2020));
        assert_eq!(c.frames[2].time_index, Some(2021));
        assert_eq!(c.frames[3].time_index, None);
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let c = Corpus::from_jsonl_reader(SAMPLE.as_bytes()).unwrap();
        let once = c.to_jsonl();
        let again = Corpus::from_jsonl_reader(once.as_bytes()).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.to_jsonl(), once);
    }

    #[test]
    fn missing_document_id_cites_line() {
        let text = r#"{"kind":"document","id":"d1","text":"x"}
{"kind":"frame","id":"f1","document_id":"d1","elements":{"category":"market","event":"a","driver":"b","impact":"c"}}
{"kind":"frame","id":"f2","elements":{"category":"market","event":"a","driver":"b","impact":"c"}}
"#;
        let err = Corpus::from_jsonl_reader(text.as_bytes()).unwrap_err();
        match err {
            CorpusError::Malformed { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("document_id"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dangling_reference_names_the_id() {
        let text = r#"{"kind":"frame","id":"f1","document_id":"ghost","elements":{"category":"market","event":"a","driver":"b","impact":"c"}}"#;
        let err = Corpus::from_jsonl_reader(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("ghost"));
    }

    #[test]
    fn empty_file_is_an_empty_corpus() {
        let c = Corpus::from_jsonl_reader("".as_bytes()).unwrap();
        assert!(c.documents.is_empty() && c.frames.is_empty());
        assert_eq!(c.schema, FrameSchema::default());
    }

    #[test]
    fn invalid_frames_are_rejected_on_load() {
        let text = r#"{"kind":"document","id":"d1","text":"x"}
{"kind":"frame","id":"f1","document_id":"d1","elements":{"category":"weather","event":"a","driver":"b","impact":"c"}}"#;
        let err = Corpus::from_jsonl_reader(text.as_bytes()).unwrap_err();
        assert!(
            matches!(err, CorpusError::Malformed { line: 2, .. }),
            "{err}"
        );
    }

    #[test]
    fn weights_symmetric_regardless_of_triangle() {
        let w =
            HierarchyWeights::from_csv_reader("doc_i,doc_j,weight\nb,a,2.5\n".as_bytes()).unwrap();
        let (a, b) = (DocumentId::from("a"), DocumentId::from("b"));
        assert_eq!(w.weight(&a, &b), 2.5);
        assert_eq!(w.weight(&b, &a), 2.5);
        assert_eq!(w.weight(&a, &DocumentId::from("c")), 1.0);
        assert!(HierarchyWeights::from_csv_reader("a,b,1\nb,a,2\n".as_bytes()).is_err());
        assert!(HierarchyWeights::from_csv_reader("a,b,-1\n".as_bytes()).is_err());
    }

    #[test]
    fn block_weights_follow_labels() {
        let c = Corpus::from_jsonl_reader(SAMPLE.as_bytes()).unwrap();
        let w = HierarchyWeights::block(&c.documents, 2.0, 0.5).unwrap();
        let (d1, d2) = (DocumentId::from("d1"), DocumentId::from("d2"));
        assert_eq!(w.weight(&d1, &d1), 2.0);
        assert_eq!(w.weight(&d1, &d2), 0.5);
    }
}
