//! Frame histories over a timeline and year-over-year similarity heatmaps.
//!
//! A frame at time t matches a frame at t' when their mean per-element kernel
//! similarity exceeds ε. The history of a frame is the set of t' with at
//! least one match; the frame always matches itself at t.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::FeatureVector;
use crate::exec::Execution;
use crate::frame::FrameId;
use crate::hypergraph::{kernel_sum, EmbeddingTable, Hypergraph, HypergraphError, Origin};

#[derive(Debug, Error, PartialEq)]
pub enum TemporalError {
    #[error("no frames at time index {0}")]
    UnknownTime(i64),
    #[error("frame {frame} is not on the timeline at {t}")]
    UnknownFrame { frame: String, t: i64 },
    #[error(transparent)]
    Hypergraph(#[from] HypergraphError),
}

/// Which frames a history is matched against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistoryScope {
    /// Only frames of the same document lineage (same issuer across years).
    #[default]
    Lineage,
    Corpus,
}

#[derive(Debug, Clone)]
struct TimedFrame {
    id: FrameId,
    lineage: String,
    vectors: Vec<FeatureVector>,
}

/// Frames grouped by time index, with their element vectors.
#[derive(Debug, Clone)]
pub struct Timeline {
    gamma: f64,
    k: usize,
    by_time: BTreeMap<i64, Vec<TimedFrame>>,
}

impl Timeline {
    /// Original hyperedges that carry a time index.
    pub fn from_hypergraph(g: &Hypergraph, gamma: f64) -> Self {
        let table = g.embedding_table();
        let entries = g
            .hyperedges()
            .iter()
            .filter(|h| h.origin == Origin::Original)
            .filter_map(|h| h.frame.time_index.map(|t| (h, t)))
            .map(|(h, t)| {
                let vectors = table
                    .frame_vectors(&h.frame)
                    .expect("hypergraph vertices are embedded")
                    .into_iter()
                    .cloned()
                    .collect();
                (
                    t,
                    TimedFrame {
                        id: h.id().clone(),
                        lineage: h.lineage.clone(),
                        vectors,
                    },
                )
            });
        let mut by_time: BTreeMap<i64, Vec<TimedFrame>> = BTreeMap::new();
        for (t, f) in entries {
            by_time.entry(t).or_default().push(f);
        }
        Self {
            gamma,
            k: g.k(),
            by_time,
        }
    }

    /// Build from explicit `(frame, lineage)` pairs; frames without a time index are skipped.
    pub fn from_frames<'a, I>(
        frames: I,
        table: &EmbeddingTable,
        k: usize,
        gamma: f64,
    ) -> Result<Self, TemporalError>
    where
        I: IntoIterator<Item = (&'a crate::frame::Frame, &'a str)>,
    {
        let mut by_time: BTreeMap<i64, Vec<TimedFrame>> = BTreeMap::new();
        for (f, lineage) in frames {
            let Some(t) = f.time_index else { continue };
            let vectors = table.frame_vectors(f)?.into_iter().cloned().collect();
            by_time.entry(t).or_default().push(TimedFrame {
                id: f.frame_id.clone(),
                lineage: lineage.to_string(),
                vectors,
            });
        }
        for v in by_time.values_mut() {
            v.sort_by(|a, b| a.id.cmp(&b.id));
        }
        Ok(Self { gamma, k, by_time })
    }

    pub fn times(&self) -> BTreeSet<i64> {
        self.by_time.keys().copied().collect()
    }

    pub fn lineages(&self) -> BTreeSet<String> {
        self.by_time
            .values()
            .flatten()
            .map(|f| f.lineage.clone())
            .collect()
    }

    /// Every (frame, t) on the timeline in time then id order.
    pub fn frames(&self) -> Vec<(FrameId, i64)> {
        self.by_time
            .iter()
            .flat_map(|(t, fs)| fs.iter().map(move |f| (f.id.clone(), *t)))
            .collect()
    }

    /// Times at which a lineage has at least one frame.
    pub fn times_of(&self, lineage: &str) -> BTreeSet<i64> {
        self.by_time
            .iter()
            .filter(|(_, fs)| fs.iter().any(|f| f.lineage == lineage))
            .map(|(t, _)| *t)
            .collect()
    }

    fn find(&self, id: &FrameId, t: i64) -> Result<&TimedFrame, TemporalError> {
        let slice = self.by_time.get(&t).ok_or(TemporalError::UnknownTime(t))?;
        slice
            .iter()
            .find(|f| &f.id == id)
            .ok_or_else(|| TemporalError::UnknownFrame {
                frame: id.0.clone(),
                t,
            })
    }

    fn similarity(&self, a: &TimedFrame, b: &TimedFrame) -> Result<f64, TemporalError> {
        let x: Vec<&FeatureVector> = a.vectors.iter().collect();
        let y: Vec<&FeatureVector> = b.vectors.iter().collect();
        Ok(kernel_sum(&x, &y, self.gamma)? / self.k as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryMatch {
    pub frame_id: FrameId,
    /// Mean per-element kernel similarity to the target.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameHistory {
    pub frame_id: FrameId,
    pub t: i64,
    /// Best-scoring match at each matched time index.
    pub matches: BTreeMap<i64, HistoryMatch>,
}

impl FrameHistory {
    pub fn times(&self) -> BTreeSet<i64> {
        self.matches.keys().copied().collect()
    }
}

/// Times at which some in-scope frame is more similar than `epsilon` to
/// the target frame at `t`.
pub fn frame_history(
    timeline: &Timeline,
    target: &FrameId,
    t: i64,
    epsilon: f64,
    scope: HistoryScope,
) -> Result<FrameHistory, TemporalError> {
    let tf = timeline.find(target, t)?;
    let mut matches = BTreeMap::new();
    matches.insert(
        t,
        HistoryMatch {
            frame_id: target.clone(),
            score: 1.0,
        },
    );
    for (&t2, frames) in &timeline.by_time {
        let mut best: Option<HistoryMatch> = None;
        for f in frames {
            if t2 == t && f.id == *target {
                continue;
            }
            if scope == HistoryScope::Lineage && f.lineage != tf.lineage {
                continue;
            }
            let score = timeline.similarity(tf, f)?;
            if score > epsilon && best.as_ref().is_none_or(|b| score > b.score) {
                best = Some(HistoryMatch {
                    frame_id: f.id.clone(),
                    score,
                });
            }
        }
        if let Some(b) = best {
            if t2 != t {
                matches.insert(t2, b);
            }
        }
    }
    Ok(FrameHistory {
        frame_id: target.clone(),
        t,
        matches,
    })
}

/// Histories for every frame on the timeline, in time then id order.
pub fn all_histories(
    timeline: &Timeline,
    epsilon: f64,
    scope: HistoryScope,
    exec: Execution,
) -> Result<Vec<FrameHistory>, TemporalError> {
    let frames = timeline.frames();
    exec.try_map_indexed(frames.len(), |i| {
        let (id, t) = &frames[i];
        frame_history(timeline, id, *t, epsilon, scope)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameClass {
    /// Matched only at its own time.
    Emerging,
    /// Matched at its own time and some, but not all, other times.
    Recurring,
    /// Matched at every available time.
    Static,
}

impl fmt::Display for FrameClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FrameClass::Emerging => "emerging",
            FrameClass::Recurring => "recurring",
            FrameClass::Static => "static",
        })
    }
}

/// Classify a history against the available time indices. Full coverage of
/// more than one time is static; a lone self-match is emerging.
pub fn classify_frame(history: &FrameHistory, t: i64, available: &BTreeSet<i64>) -> FrameClass {
    let times = history.times();
    if available.len() > 1 && available.is_subset(&times) {
        FrameClass::Static
    } else if times.len() == 1 && times.contains(&t) {
        FrameClass::Emerging
    } else {
        FrameClass::Recurring
    }
}

/// Annotation line for the generation prompt.
pub fn annotation(class: FrameClass, history: &FrameHistory) -> String {
    let first = history.matches.keys().next().copied().unwrap_or(history.t);
    let last = history
        .matches
        .keys()
        .next_back()
        .copied()
        .unwrap_or(history.t);
    match class {
        FrameClass::Emerging => format!("emerged at {}", history.t),
        FrameClass::Recurring => format!("recurring since {first}"),
        FrameClass::Static => format!("present in every report from {first} to {last}"),
    }
}

/// T×T matrix of the fraction of frames at row time with a match at column time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub years: Vec<i64>,
    /// `None` marks a year with no frames.
    pub cells: Vec<Vec<Option<f64>>>,
}

impl Heatmap {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("year");
        for y in &self.years {
            s.push_str(&format!(",{y}"));
        }
        s.push('\n');
        for (y, row) in self.years.iter().zip(&self.cells) {
            s.push_str(&y.to_string());
            for c in row {
                s.push(',');
                if let Some(v) = c {
                    s.push_str(&v.to_string());
                }
            }
            s.push('\n');
        }
        s
    }
}

/// Year-over-year frame similarity for one lineage (or the whole timeline).
pub fn temporal_heatmap(
    timeline: &Timeline,
    years: &[i64],
    epsilon: f64,
    lineage: Option<&str>,
) -> Result<Heatmap, TemporalError> {
    let in_scope = |f: &&TimedFrame| lineage.is_none_or(|l| f.lineage == l);
    let slice = |y: i64| -> Vec<&TimedFrame> {
        timeline
            .by_time
            .get(&y)
            .map(|v| v.iter().filter(in_scope).collect())
            .unwrap_or_default()
    };
    let mut cells = Vec::with_capacity(years.len());
    for &y in years {
        let rows = slice(y);
        let mut row = Vec::with_capacity(years.len());
        for &y2 in years {
            let cols = slice(y2);
            if rows.is_empty() || cols.is_empty() {
                row.push(None);
                continue;
            }
            if y == y2 {
                row.push(Some(1.0));
                continue;
            }
            let mut hit = 0usize;
            for a in &rows {
                let mut matched = false;
                for b in &cols {
                    if timeline.similarity(a, b)? > epsilon {
                        matched = true;
                        break;
                    }
                }
                hit += usize::from(matched);
            }
            row.push(Some(hit as f64 / rows.len() as f64));
        }
        cells.push(row);
    }
    Ok(Heatmap {
        years: years.to_vec(),
        cells,
    })
}
