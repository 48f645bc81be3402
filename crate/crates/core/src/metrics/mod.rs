//! Evaluation of generated text against its source document: n-gram and
//! embedding similarity, novelty, coherence of mixed-in sentences, the
//! provenance-based mix diversity triple, and sentence-to-frame attribution.

mod report;
mod text;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::embedding::{cosine, EmbedError, EmbeddingProvider, FeatureVector};
use crate::frame::{DocumentId, Frame, FrameId};
use crate::llm::TraceLink;
use crate::mixup::MinedFrame;

pub use report::{FluencyScorer, MetricReport, METRIC_COLUMNS};
pub use text::{ngram_counts, ngram_set, split_sentences, tokenize, ABBREVIATIONS};

/// Default attribution threshold.
pub const DEFAULT_THETA: f64 = 0.5;
/// Longest n-gram used by BLEU and distinct-n.
pub const MAX_NGRAM: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Word,
    Sentence,
}

/// BLEU of `generated` against `original`: geometric mean of clipped n-gram
/// precisions for n up to `min(max_n, |generated|)`, times the brevity penalty.
pub fn lexical_similarity(original: &str, generated: &str, max_n: usize) -> f64 {
    let reference = tokenize(original);
    let candidate = tokenize(generated);
    if reference.is_empty() || candidate.is_empty() || max_n == 0 {
        return 0.0;
    }
    let n_max = max_n.min(candidate.len());
    let mut log_sum = 0.0;
    for n in 1..=n_max {
        let cand = ngram_counts(&candidate, n);
        let refc = ngram_counts(&reference, n);
        let total: usize = cand.values().sum();
        let clipped: usize = cand
            .iter()
            .map(|(g, &c)| c.min(refc.get(g).copied().unwrap_or(0)))
            .sum();
        if clipped == 0 {
            return 0.0;
        }
        log_sum += (clipped as f64 / total as f64).ln();
    }
    let (c, r) = (candidate.len() as f64, reference.len() as f64);
    let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    bp * (log_sum / n_max as f64).exp()
}

fn embed_distinct(
    provider: &dyn EmbeddingProvider,
    texts: &[String],
) -> Result<BTreeMap<String, FeatureVector>, EmbedError> {
    let distinct: Vec<String> = texts
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let vecs = provider.embed_batch(&distinct)?;
    Ok(distinct.into_iter().zip(vecs).collect())
}

fn mean_vector(tokens: &[String], table: &BTreeMap<String, FeatureVector>) -> Vec<f64> {
    let dim = table.values().next().map_or(0, FeatureVector::dimension);
    let mut acc = vec![0.0; dim];
    for t in tokens {
        for (a, v) in acc.iter_mut().zip(table[t].values()) {
            *a += v;
        }
    }
    let n = tokens.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

/// Cosine similarity in [−1, 1]. Word granularity compares mean token
/// vectors; sentence granularity averages, over generated sentences, the
/// best cosine against any original sentence.
pub fn semantic_similarity(
    original: &str,
    generated: &str,
    granularity: Granularity,
    provider: &dyn EmbeddingProvider,
) -> Result<f64, EmbedError> {
    match granularity {
        Granularity::Word => {
            let (o, g) = (tokenize(original), tokenize(generated));
            if o.is_empty() || g.is_empty() {
                return Err(EmbedError::EmptyText);
            }
            let all: Vec<String> = o.iter().chain(&g).cloned().collect();
            let table = embed_distinct(provider, &all)?;
            Ok(cosine(&mean_vector(&o, &table), &mean_vector(&g, &table)))
        }
        Granularity::Sentence => {
            let (o, g) = (split_sentences(original), split_sentences(generated));
            if o.is_empty() || g.is_empty() {
                return Err(EmbedError::EmptyText);
            }
            let all: Vec<String> = o.iter().chain(&g).cloned().collect();
            let table = embed_distinct(provider, &all)?;
            let total: f64 = g
                .iter()
                .map(|gs| {
                    o.iter()
                        .map(|os| cosine(table[gs].values(), table[os].values()))
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .sum();
            Ok(total / g.len() as f64)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diversity {
    pub lexical: f64,
    pub semantic_word: f64,
    pub semantic_sentence: f64,
}

/// Share of distinct generated n-grams (n = 1..=4) absent from the original.
pub fn lexical_diversity(original: &str, generated: &str) -> f64 {
    let (o, g) = (tokenize(original), tokenize(generated));
    let gs = ngram_set(&g, MAX_NGRAM);
    if gs.is_empty() {
        return 0.0;
    }
    let os = ngram_set(&o, MAX_NGRAM);
    gs.difference(&os).count() as f64 / gs.len() as f64
}

/// Novelty of `generated`: distinct-n for the lexical part and `(1 − sim)/2`
/// for the embedding parts.
pub fn diversity(
    original: &str,
    generated: &str,
    provider: &dyn EmbeddingProvider,
) -> Result<Diversity, EmbedError> {
    Ok(Diversity {
        lexical: lexical_diversity(original, generated),
        semantic_word: (1.0
            - semantic_similarity(original, generated, Granularity::Word, provider)?)
            / 2.0,
        semantic_sentence: (1.0
            - semantic_similarity(original, generated, Granularity::Sentence, provider)?)
            / 2.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceLink {
    pub index: usize,
    pub text: String,
    /// Best-matching frame; `None` only when there are no frames.
    pub frame_id: Option<FrameId>,
    pub score: f64,
    pub attributed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameCoverage {
    pub frame_id: FrameId,
    pub covered: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub theta: f64,
    pub sentences: Vec<SentenceLink>,
    pub frames: Vec<FrameCoverage>,
}

impl Attribution {
    pub fn uncovered(&self) -> impl Iterator<Item = &FrameId> {
        self.frames
            .iter()
            .filter(|f| !f.covered)
            .map(|f| &f.frame_id)
    }

    pub fn unattributed(&self) -> impl Iterator<Item = &SentenceLink> {
        self.sentences.iter().filter(|s| !s.attributed)
    }

    pub fn trace_links(&self) -> Vec<TraceLink> {
        self.sentences
            .iter()
            .filter(|s| s.attributed)
            .filter_map(|s| {
                s.frame_id.as_ref().map(|f| TraceLink {
                    sentence: s.index,
                    frame_id: f.clone(),
                    score: s.score,
                })
            })
            .collect()
    }
}

/// Link every generated sentence to its most similar frame text. Ties go to
/// the earlier frame. A frame is covered when some sentence links to it with
/// score ≥ θ.
pub fn attribute_frames(
    generated: &str,
    frames: &[(FrameId, String)],
    theta: f64,
    provider: &dyn EmbeddingProvider,
) -> Result<Attribution, EmbedError> {
    let sentences = split_sentences(generated);
    let mut all: Vec<String> = sentences.clone();
    all.extend(frames.iter().map(|(_, t)| t.clone()));
    let table = if all.is_empty() {
        BTreeMap::new()
    } else {
        embed_distinct(provider, &all)?
    };
    let mut best_per_frame: Vec<Option<f64>> = vec![None; frames.len()];
    let mut covered = vec![false; frames.len()];
    let mut links = Vec::with_capacity(sentences.len());
    for (index, s) in sentences.into_iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for (fi, (_, ft)) in frames.iter().enumerate() {
            let c = cosine(table[&s].values(), table[ft].values());
            if best.is_none_or(|(_, b)| c > b) {
                best = Some((fi, c));
            }
        }
        let (frame_id, score) = match best {
            Some((fi, c)) => {
                let slot = &mut best_per_frame[fi];
                *slot = Some(slot.map_or(c, |b: f64| b.max(c)));
                if c >= theta {
                    covered[fi] = true;
                }
                (Some(frames[fi].0.clone()), c)
            }
            None => (None, 0.0),
        };
        links.push(SentenceLink {
            index,
            text: s,
            frame_id,
            score,
            attributed: best.is_some() && score >= theta,
        });
    }
    Ok(Attribution {
        theta,
        sentences: links,
        frames: frames
            .iter()
            .enumerate()
            .map(|(i, (id, _))| FrameCoverage {
                frame_id: id.clone(),
                covered: covered[i],
                best_score: best_per_frame[i],
            })
            .collect(),
    })
}

/// Mean pairwise cosine between sentences attributed to mined frames and an
/// equal number of the best-attributed original sentences, mapped to [0, 1].
/// `None` when either group is empty.
pub fn coherence(
    attribution: &Attribution,
    mined: &BTreeSet<FrameId>,
    provider: &dyn EmbeddingProvider,
) -> Result<Option<f64>, EmbedError> {
    let is_mined = |s: &&SentenceLink| s.frame_id.as_ref().is_some_and(|f| mined.contains(f));
    let new: Vec<&SentenceLink> = attribution
        .sentences
        .iter()
        .filter(|s| s.attributed)
        .filter(is_mined)
        .collect();
    let mut old: Vec<&SentenceLink> = attribution
        .sentences
        .iter()
        .filter(|s| s.attributed && !is_mined(s))
        .collect();
    old.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.index.cmp(&b.index)));
    old.truncate(new.len());
    let new: Vec<String> = new.iter().map(|s| s.text.clone()).collect();
    let old: Vec<String> = old.iter().map(|s| s.text.clone()).collect();
    coherence_between(&new, &old, provider)
}

/// `(1 + mean pairwise cosine)/2` between two sentence groups.
pub fn coherence_between(
    new: &[String],
    old: &[String],
    provider: &dyn EmbeddingProvider,
) -> Result<Option<f64>, EmbedError> {
    if new.is_empty() || old.is_empty() {
        return Ok(None);
    }
    let texts: Vec<String> = new.iter().chain(old).cloned().collect();
    let table = embed_distinct(provider, &texts)?;
    let mut sum = 0.0;
    for a in new {
        for b in old {
            sum += cosine(table[a].values(), table[b].values());
        }
    }
    let mean = sum / (new.len() * old.len()) as f64;
    Ok(Some((1.0 + mean) / 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MixDiversity {
    pub document: f64,
    pub topic: f64,
    pub content: f64,
}

/// Provenance tally for one document's frame set after mixing.
///
/// The first schema role is the topic; the remaining roles are content.
pub fn mix_diversity(
    document: &DocumentId,
    original: &[Frame],
    mined: &[MinedFrame],
    corpus_documents: usize,
) -> MixDiversity {
    let foreign: BTreeSet<&DocumentId> = mined
        .iter()
        .flat_map(|m| [&m.parent_documents.0, &m.parent_documents.1])
        .filter(|d| *d != document)
        .collect();
    let doc_div = if corpus_documents > 1 {
        foreign.len() as f64 / (corpus_documents - 1) as f64
    } else {
        0.0
    };

    let finals = || original.iter().chain(mined.iter().map(|m| &m.frame));
    let topic_of = |f: &Frame| f.elements.first().map(|e| e.text.clone());
    let orig_topics: BTreeSet<String> = original.iter().filter_map(topic_of).collect();
    let final_topics: BTreeSet<String> = finals().filter_map(topic_of).collect();
    let topic = if final_topics.is_empty() {
        0.0
    } else {
        final_topics.difference(&orig_topics).count() as f64 / final_topics.len() as f64
    };

    let content_of = |f: &Frame| -> Vec<(usize, String)> {
        f.elements
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, e)| (i, e.text.clone()))
            .collect()
    };
    let orig_content: BTreeSet<(usize, String)> = original.iter().flat_map(content_of).collect();
    let final_content: BTreeSet<(usize, String)> = finals().flat_map(content_of).collect();
    let content = if final_content.is_empty() {
        0.0
    } else {
        final_content.difference(&orig_content).count() as f64 / final_content.len() as f64
    };

    MixDiversity {
        document: doc_div,
        topic,
        content,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{LookupEmbedder, TrigramEmbedder};
    use crate::frame::FrameSchema;
    use crate::mixup::{mix_frames, MixMask};

    #[test]
    fn bleu_cases() {
        assert_eq!(lexical_similarity("a b c d", "a b c d", 4), 1.0);
        assert_eq!(lexical_similarity("a b c d", "e f g h", 4), 0.0);
        let v = lexical_similarity("a b c d e f g h", "a b c d", 4);
        assert!((v - (-1f64).exp()).abs() < 1e-12);
        assert!((v - 0.3679).abs() < 1e-4);
        assert_eq!(
            lexical_similarity("The Market fell", "the market FELL", 4),
            lexical_similarity("the market fell", "the market fell", 4)
        );
    }

    #[test]
    fn bleu_short_candidate_uses_available_orders() {
        // 2-token candidate: unigram 1, bigram 1, no brevity penalty against itself.
        assert_eq!(lexical_similarity("x y", "x y", 4), 1.0);
    }

    #[test]
    fn bleu_clipping() {
        // "the the the" vs "the cat": unigram 1/3, bigram 0 → 0
        assert_eq!(lexical_similarity("the cat", "the the the", 4), 0.0);
        let v = lexical_similarity("the cat", "the the the", 1);
        assert!((v - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn identity_similarity_and_zero_diversity() {
        let e = TrigramEmbedder::default();
        let t = "Credit risk grew. Liquidity may tighten in 2021.";
        assert_eq!(
            semantic_similarity(t, t, Granularity::Word, &e).unwrap(),
            1.0
        );
        assert_eq!(
            semantic_similarity(t, t, Granularity::Sentence, &e).unwrap(),
            1.0
        );
        let d = diversity(t, t, &e).unwrap();
        assert_eq!(
            (d.lexical, d.semantic_word, d.semantic_sentence),
            (0.0, 0.0, 0.0)
        );
        let sub = semantic_similarity(
            t,
            "Liquidity may tighten in 2021.",
            Granularity::Sentence,
            &e,
        )
        .unwrap();
        assert!((sub - 1.0).abs() < 1e-6);
    }

    #[test]
    fn orthogonal_novelty() {
        let e = LookupEmbedder::new([
            ("alpha", vec![1.0, 0.0]),
            ("beta", vec![0.0, 1.0]),
            ("Alpha.", vec![1.0, 0.0]),
            ("Beta.", vec![0.0, 1.0]),
        ])
        .unwrap();
        let d = diversity("Alpha.", "Beta.", &e).unwrap();
        assert_eq!(d.lexical, 1.0);
        assert_eq!(d.semantic_word, 0.5);
        assert_eq!(d.semantic_sentence, 0.5);
    }

    fn frames() -> Vec<(FrameId, String)> {
        vec![
            (FrameId::from("f1"), "credit loss".into()),
            (FrameId::from("f2"), "market crash".into()),
            (FrameId::from("f3"), "supply delay".into()),
        ]
    }

    fn embedder() -> LookupEmbedder {
        LookupEmbedder::new([
            ("credit loss", vec![1.0, 0.0, 0.0]),
            ("market crash", vec![0.0, 1.0, 0.0]),
            ("supply delay", vec![0.0, 0.0, 1.0]),
            ("Loans may default.", vec![0.9, 0.1, 0.0]),
            ("Markets may crash.", vec![0.1, 0.9, 0.0]),
            ("Weather was fine.", vec![0.3, 0.3, 0.3]),
        ])
        .unwrap()
    }

    #[test]
    fn attribution_flags_missing_frames() {
        let a = attribute_frames(
            "Loans may default. Markets may crash. Weather was fine.",
            &frames(),
            0.9,
            &embedder(),
        )
        .unwrap();
        let uncovered: Vec<&str> = a.uncovered().map(FrameId::as_str).collect();
        assert_eq!(uncovered, ["f3"]);
        let linked: Vec<Option<&str>> = a
            .sentences
            .iter()
            .map(|s| s.frame_id.as_ref().map(FrameId::as_str))
            .collect();
        assert_eq!(linked, [Some("f1"), Some("f2"), Some("f1")]);
        assert_eq!(a.unattributed().count(), 1);
        assert_eq!(a.trace_links().len(), 2);
    }

    #[test]
    fn verbatim_generation_covers_everything() {
        let e = TrigramEmbedder::default();
        let text = frames()
            .iter()
            .map(|(_, t)| t.clone())
            .collect::<Vec<_>>()
            .join("\n");
        let a = attribute_frames(&text, &frames(), DEFAULT_THETA, &e).unwrap();
        assert_eq!(a.uncovered().count(), 0);
        assert_eq!(a.unattributed().count(), 0);
    }

    #[test]
    fn empty_generation_covers_nothing() {
        let a = attribute_frames("", &frames(), DEFAULT_THETA, &embedder()).unwrap();
        assert!(a.sentences.is_empty());
        assert_eq!(a.uncovered().count(), 3);
    }

    #[test]
    fn coherence_orthogonal_and_identical() {
        let e = LookupEmbedder::new([
            ("old", vec![1.0, 0.0]),
            ("new", vec![0.0, 1.0]),
            ("Old news.", vec![1.0, 0.0]),
            ("New news.", vec![0.0, 1.0]),
        ])
        .unwrap();
        let frames = vec![
            (FrameId::from("o"), "old".to_string()),
            (FrameId::from("n"), "new".to_string()),
        ];
        let a = attribute_frames("Old news. New news.", &frames, 0.5, &e).unwrap();
        let mined: BTreeSet<FrameId> = [FrameId::from("n")].into();
        assert_eq!(coherence(&a, &mined, &e).unwrap(), Some(0.5));
        assert_eq!(coherence(&a, &BTreeSet::new(), &e).unwrap(), None);
    }

    #[test]
    fn coherence_of_identical_groups() {
        let e = LookupEmbedder::new([("A.", vec![1.0, 1.0]), ("B.", vec![1.0, 1.0])]).unwrap();
        let v = coherence_between(&["A.".to_string()], &["B.".to_string()], &e).unwrap();
        assert_eq!(v, Some(1.0));
    }

    #[test]
    fn mix_diversity_counts() {
        let s = FrameSchema::open();
        let d = DocumentId::from("d");
        let own = Frame::from_texts("a", "d", &s, &["credit", "e1", "r1", "i1"]);
        let other = Frame::from_texts("b", "x", &s, &["market", "e2", "r2", "i2"]);
        assert_eq!(
            mix_diversity(&d, std::slice::from_ref(&own), &[], 2),
            MixDiversity::default()
        );
        let mask = MixMask::from_bits(vec![false, false, false, true], 0).unwrap();
        let (m, _) = mix_frames(&own, &other, &mask).unwrap();
        let md = mix_diversity(&d, std::slice::from_ref(&own), &[m], 2);
        assert_eq!(md.document, 1.0);
        assert_eq!(md.topic, 0.5);
        // the mined frame takes category, event and driver from the foreign parent
        assert!((md.content - 2.0 / 5.0).abs() < 1e-15);
    }
}
