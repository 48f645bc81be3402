use serde::{Deserialize, Serialize};

use crate::frame::DocumentId;

/// External fluency scorer, e.g. an acceptability classifier behind a service.
pub trait FluencyScorer: Send + Sync {
    fn id(&self) -> &str;
    /// Score in [0, 1].
    fn score(&self, text: &str) -> Result<f64, String>;
}

/// Metric columns in export order.
pub const METRIC_COLUMNS: [&str; 12] = [
    "lexical_similarity",
    "semantic_word_similarity",
    "semantic_sentence_similarity",
    "lexical_diversity",
    "semantic_word_diversity",
    "semantic_sentence_diversity",
    "coherence",
    "document_diversity",
    "topic_diversity",
    "content_diversity",
    "uncovered_frames",
    "fluency",
];

/// Scores for one generated variant of one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub document_id: DocumentId,
    pub control: String,
    pub embedding_provider: String,
    pub lexical_similarity: f64,
    pub semantic_word_similarity: f64,
    pub semantic_sentence_similarity: f64,
    pub lexical_diversity: f64,
    pub semantic_word_diversity: f64,
    pub semantic_sentence_diversity: f64,
    pub coherence: Option<f64>,
    pub document_diversity: f64,
    pub topic_diversity: f64,
    pub content_diversity: f64,
    /// Fraction of input frames no sentence was attributed to.
    pub uncovered_frames: f64,
    pub fluency: Option<f64>,
}

impl MetricReport {
    fn values(&self) -> [Option<f64>; 12] {
        [
            Some(self.lexical_similarity),
            Some(self.semantic_word_similarity),
            Some(self.semantic_sentence_similarity),
            Some(self.lexical_diversity),
            Some(self.semantic_word_diversity),
            Some(self.semantic_sentence_diversity),
            self.coherence,
            Some(self.document_diversity),
            Some(self.topic_diversity),
            Some(self.content_diversity),
            Some(self.uncovered_frames),
            self.fluency,
        ]
    }

    /// Column names: identifiers, then each metric raw and on the 0–100 scale.
    pub fn csv_header() -> Vec<String> {
        let mut h: Vec<String> = ["document_id", "control", "embedding_provider"]
            .map(String::from)
            .to_vec();
        for c in METRIC_COLUMNS {
            h.push(c.to_string());
            h.push(format!("{c}_pct"));
        }
        h
    }

    /// Absent metrics are written as empty cells.
    pub fn csv_row(&self) -> Vec<String> {
        let mut r = vec![
            self.document_id.to_string(),
            self.control.clone(),
            self.embedding_provider.clone(),
        ];
        for v in self.values() {
            match v {
                Some(x) => {
                    r.push(format!("{x:.6}"));
                    r.push(format!("{:.2}", 100.0 * x));
                }
                None => r.extend([String::new(), String::new()]),
            }
        }
        r
    }

    pub fn write_csv<W: std::io::Write>(reports: &[MetricReport], w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(Self::csv_header())?;
        for r in reports {
            out.write_record(r.csv_row())?;
        }
        out.flush()?;
        Ok(())
    }
}
