//! Frame mixup: sample binary masks from element distances and exchange
//! masked elements between two intimate frames.
//!
//! For parents (i, j) and mask b the two mined frames are
//! `i⊙b ⊕ j⊙(1−b)` and `i⊙(1−b) ⊕ j⊙b`, where `⊙` selects elements and `⊕`
//! joins the disjoint selections back into a K-tuple.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::cosine_distance;
use crate::exec::Execution;
use crate::frame::{DocumentId, Frame, FrameId};
use crate::hashing::derive_seed;
use crate::hypergraph::{EmbeddingTable, Hypergraph, HypergraphError};

/// Resamples attempted before forcing a flip of a degenerate mask.
pub const MAX_RESAMPLES: usize = 16;

#[derive(Debug, Error, PartialEq)]
pub enum MixupError {
    #[error("mask {0:?} is all zeros or all ones")]
    DegenerateMask(Vec<bool>),
    #[error("mask length {mask} does not match frame arity {k}")]
    MaskLength { mask: usize, k: usize },
    #[error("frames {0} and {1} do not share a schema")]
    SchemaMismatch(String, String),
    #[error("mix ratio must be in [0,1], got {0}")]
    BadRatio(f64),
    #[error(transparent)]
    Hypergraph(#[from] HypergraphError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixMask {
    bits: Vec<bool>,
    seed: u64,
}

impl MixMask {
    pub fn from_bits(bits: Vec<bool>, seed: u64) -> Result<Self, MixupError> {
        if bits.iter().all(|&b| b) || bits.iter().all(|&b| !b) {
            return Err(MixupError::DegenerateMask(bits));
        }
        Ok(Self { bits, seed })
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn complement(&self) -> Self {
        Self {
            bits: self.bits.iter().map(|b| !b).collect(),
            seed: self.seed,
        }
    }
}

/// A mined frame. Element k comes from `parents.0` where the mask bit is
/// set and from `parents.1` otherwise; `parents.0` owns the new frame.
#[derive(Debug, Clone, PartialEq)]
pub struct MinedFrame {
    pub frame: Frame,
    pub parents: (FrameId, FrameId),
    pub parent_documents: (DocumentId, DocumentId),
    pub mask: MixMask,
}

/// Keep-probabilities p_k = exp(−γ·δ_k).
pub fn keep_probabilities(distances: &[f64], gamma: f64) -> Vec<f64> {
    distances.iter().map(|d| (-gamma * d).exp()).collect()
}

/// One independent Bernoulli draw per element.
pub fn draw_bits<R: Rng>(probs: &[f64], rng: &mut R) -> Vec<bool> {
    probs.iter().map(|&p| rng.random::<f64>() < p).collect()
}

pub fn element_distances(
    e1: &Frame,
    e2: &Frame,
    table: &EmbeddingTable,
) -> Result<Vec<f64>, MixupError> {
    let x = table.frame_vectors(e1)?;
    let y = table.frame_vectors(e2)?;
    if x.len() != y.len() {
        return Err(MixupError::SchemaMismatch(
            e1.frame_id.0.clone(),
            e2.frame_id.0.clone(),
        ));
    }
    x.iter()
        .zip(&y)
        .map(|(a, b)| cosine_distance(a, b).map_err(|e| MixupError::Hypergraph(e.into())))
        .collect()
}

/// Sample a non-degenerate mask from per-element distances.
///
/// Bit k is Bernoulli(exp(−γ·δ_k)). All-equal draws are resampled up to
/// [`MAX_RESAMPLES`] times; after that the bit with the largest distance
/// (lowest index on ties) is flipped.
pub fn sample_mask_from_distances(
    distances: &[f64],
    gamma: f64,
    seed: u64,
) -> Result<MixMask, MixupError> {
    let probs = keep_probabilities(distances, gamma);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let degenerate = |b: &[bool]| b.iter().all(|&x| x) || b.iter().all(|&x| !x);
    let mut bits = draw_bits(&probs, &mut rng);
    let mut resamples = 0;
    while degenerate(&bits) && resamples < MAX_RESAMPLES {
        bits = draw_bits(&probs, &mut rng);
        resamples += 1;
    }
    if degenerate(&bits) && bits.len() >= 2 {
        let mut far = 0;
        for (k, d) in distances.iter().enumerate() {
            if *d > distances[far] {
                far = k;
            }
        }
        bits[far] = !bits[far];
    }
    MixMask::from_bits(bits, seed)
}

pub fn sample_mask(
    e1: &Frame,
    e2: &Frame,
    table: &EmbeddingTable,
    gamma: f64,
    seed: u64,
) -> Result<MixMask, MixupError> {
    sample_mask_from_distances(&element_distances(e1, e2, table)?, gamma, seed)
}

/// Seed for one unordered frame pair under a global seed.
pub fn pair_seed(global: u64, a: &FrameId, b: &FrameId) -> u64 {
    let (x, y) = if a <= b { (a, b) } else { (b, a) };
    derive_seed(global, &["mask", x.as_str(), y.as_str()])
}

pub fn mined_id(owner: &FrameId, other: &FrameId) -> FrameId {
    FrameId(format!("mix:{owner}+{other}"))
}

fn select(owner: &Frame, other: &Frame, bits: &[bool], id: FrameId, mask: MixMask) -> MinedFrame {
    let elements = owner
        .elements
        .iter()
        .zip(&other.elements)
        .zip(bits)
        .map(|((a, b), &keep)| if keep { a.clone() } else { b.clone() })
        .collect();
    MinedFrame {
        frame: Frame {
            frame_id: id,
            document_id: owner.document_id.clone(),
            time_index: owner.time_index,
            elements,
        },
        parents: (owner.frame_id.clone(), other.frame_id.clone()),
        parent_documents: (owner.document_id.clone(), other.document_id.clone()),
        mask,
    }
}

/// Mix two frames. The first output belongs to `e1`'s document, the second
/// to `e2`'s; both record their owner as `parents.0`.
pub fn mix_frames(
    e1: &Frame,
    e2: &Frame,
    mask: &MixMask,
) -> Result<(MinedFrame, MinedFrame), MixupError> {
    let same_roles = e1.elements.len() == e2.elements.len()
        && e1
            .elements
            .iter()
            .zip(&e2.elements)
            .all(|(a, b)| a.role == b.role);
    if !same_roles {
        return Err(MixupError::SchemaMismatch(
            e1.frame_id.0.clone(),
            e2.frame_id.0.clone(),
        ));
    }
    if mask.bits.len() != e1.elements.len() {
        return Err(MixupError::MaskLength {
            mask: mask.bits.len(),
            k: e1.elements.len(),
        });
    }
    let first = select(
        e1,
        e2,
        &mask.bits,
        mined_id(&e1.frame_id, &e2.frame_id),
        mask.clone(),
    );
    let comp = mask.complement();
    // second output = e1⊙(1−b) ⊕ e2⊙b, i.e. e2 selected by b
    let second = select(
        e2,
        e1,
        &mask.bits,
        mined_id(&e2.frame_id, &e1.frame_id),
        mask.clone(),
    );
    debug_assert!(second
        .frame
        .elements
        .iter()
        .zip(&e1.elements)
        .zip(comp.bits())
        .all(|((s, a), &c)| !c || s == a));
    Ok((first, second))
}

/// One planned mixup: `first` and `second` are mixed with `mask`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixPair {
    pub first: FrameId,
    pub second: FrameId,
    pub mask: MixMask,
}

/// Mix every pair against frames of `g`.
pub fn mine_pairs(g: &Hypergraph, pairs: &[MixPair]) -> Result<Vec<MinedFrame>, MixupError> {
    let mut out = Vec::with_capacity(pairs.len() * 2);
    for p in pairs {
        let a = g
            .hyperedge(&p.first)
            .ok_or_else(|| HypergraphError::UnknownHyperedge(p.first.0.clone()))?;
        let b = g
            .hyperedge(&p.second)
            .ok_or_else(|| HypergraphError::UnknownHyperedge(p.second.0.clone()))?;
        let (x, y) = mix_frames(&a.frame, &b.frame, &p.mask)?;
        out.push(x);
        out.push(y);
    }
    Ok(out)
}

/// Add both mined frames of every pair as hyperedges. The vertex set never grows.
pub fn augment(g: &Hypergraph, pairs: &[MixPair]) -> Result<Hypergraph, MixupError> {
    let mined = mine_pairs(g, pairs)?;
    let mut out = g.clone();
    let with_lineage: Vec<(MinedFrame, String)> = mined
        .into_iter()
        .map(|m| {
            let lineage = g
                .hyperedge(&m.parents.0)
                .map(|h| h.lineage.clone())
                .unwrap_or_else(|| m.frame.document_id.0.clone());
            (m, lineage)
        })
        .collect();
    out.insert_mined(with_lineage)?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixPlanConfig {
    /// Fraction of each document's frames used as mixup sources.
    pub mix_ratio: f64,
    /// Candidates mixed per selected source.
    pub per_source: usize,
    pub gamma: f64,
    pub seed: u64,
}

/// Number of a document's `m` frames selected at ratio `r`; monotone in r.
pub fn selected_count(m: usize, r: f64) -> usize {
    ((m as f64) * r).round() as usize
}

/// Choose mixup pairs.
///
/// Each document's original frames are shuffled with a seed derived from
/// the document id; the first `round(r·M_i)` become sources, each paired
/// with its top `per_source` ranked partners. Pairs are oriented by frame id
/// and deduplicated, so the plan at a larger ratio contains the plan at a
/// smaller one.
pub fn plan_mixups(
    g: &Hypergraph,
    ranked: &BTreeMap<FrameId, Vec<FrameId>>,
    cfg: &MixPlanConfig,
    exec: Execution,
) -> Result<Vec<MixPair>, MixupError> {
    if !(0.0..=1.0).contains(&cfg.mix_ratio) {
        return Err(MixupError::BadRatio(cfg.mix_ratio));
    }
    let mut by_doc: BTreeMap<&DocumentId, Vec<&FrameId>> = BTreeMap::new();
    for h in g.hyperedges() {
        if h.origin == crate::hypergraph::Origin::Original {
            by_doc.entry(h.document()).or_default().push(h.id());
        }
    }
    let mut seen = BTreeSet::new();
    let mut pairs = Vec::new();
    for (doc, mut frames) in by_doc {
        frames.sort();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &["select", doc.as_str()]));
        // Fisher–Yates
        for i in (1..frames.len()).rev() {
            let j = rng.random_range(0..=i);
            frames.swap(i, j);
        }
        let take = selected_count(frames.len(), cfg.mix_ratio);
        for src in frames.into_iter().take(take) {
            let Some(list) = ranked.get(src) else {
                continue;
            };
            for cand in list.iter().take(cfg.per_source) {
                let (a, b) = if src <= cand {
                    (src, cand)
                } else {
                    (cand, src)
                };
                if seen.insert((a.clone(), b.clone())) {
                    pairs.push((a.clone(), b.clone()));
                }
            }
        }
    }
    pairs.sort();
    let table = g.embedding_table();
    exec.try_map_indexed(pairs.len(), |i| {
        let (a, b) = &pairs[i];
        let fa = &g
            .hyperedge(a)
            .ok_or_else(|| HypergraphError::UnknownHyperedge(a.0.clone()))?
            .frame;
        let fb = &g
            .hyperedge(b)
            .ok_or_else(|| HypergraphError::UnknownHyperedge(b.0.clone()))?
            .frame;
        let mask = sample_mask(fa, fb, &table, cfg.gamma, pair_seed(cfg.seed, a, b))?;
        Ok(MixPair {
            first: a.clone(),
            second: b.clone(),
            mask,
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::FrameSchema;

    fn f(id: &str, doc: &str, t: [&str; 4]) -> Frame {
        Frame::from_texts(id, doc, &FrameSchema::open(), &t)
    }

    #[test]
    fn direct_substitution() {
        let e1 = f("e1", "d1", ["a", "b", "c", "d"]);
        let e2 = f("e2", "d2", ["w", "x", "y", "z"]);
        let m = MixMask::from_bits(vec![true, true, false, false], 0).unwrap();
        let (x, y) = mix_frames(&e1, &e2, &m).unwrap();
        assert_eq!(x.frame.texts().collect::<Vec<_>>(), ["a", "b", "y", "z"]);
        assert_eq!(y.frame.texts().collect::<Vec<_>>(), ["w", "x", "c", "d"]);
        assert_eq!(x.frame.document_id.as_str(), "d1");
        assert_eq!(y.frame.document_id.as_str(), "d2");
        assert_eq!(y.parents, (FrameId::from("e2"), FrameId::from("e1")));
    }

    #[test]
    fn identical_parents_reproduce_the_parent() {
        let e1 = f("e1", "d1", ["a", "b", "c", "d"]);
        let m = MixMask::from_bits(vec![true, false, true, false], 0).unwrap();
        let (x, y) = mix_frames(&e1, &e1, &m).unwrap();
        assert_eq!(x.frame.elements, e1.elements);
        assert_eq!(y.frame.elements, e1.elements);
    }

    #[test]
    fn degenerate_masks_rejected() {
        assert!(MixMask::from_bits(vec![true; 4], 0).is_err());
        assert!(MixMask::from_bits(vec![false; 4], 0).is_err());
    }

    #[test]
    fn zero_distance_forces_one_flip() {
        let m = sample_mask_from_distances(&[0.0; 4], 1.0, 42).unwrap();
        assert_eq!(m.bits().iter().filter(|b| !**b).count(), 1);
        assert_eq!(m.bits(), &[false, true, true, true]);
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let d = [0.1, 0.9, 1.5, 0.4];
        assert_eq!(
            sample_mask_from_distances(&d, 1.0, 9).unwrap(),
            sample_mask_from_distances(&d, 1.0, 9).unwrap()
        );
    }

    #[test]
    fn raw_draws_follow_the_bernoulli_law() {
        let probs = keep_probabilities(&[0.0, 0.0, 2.0, 2.0], 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 10_000;
        let hits = (0..n).filter(|_| draw_bits(&probs, &mut rng)[2]).count();
        let p = hits as f64 / n as f64;
        assert!((p - (-2.0f64).exp()).abs() <= 0.02, "{p}");
    }

    #[test]
    fn sampled_masks_follow_the_conditioned_law() {
        // Rejecting the all-ones draw conditions bit 3 on "not both of bits
        // 3 and 4 set": P = q(1−q)/(1−q²) = q/(1+q) with q = e^−2.
        let n = 10_000u64;
        let hits = (0..n)
            .filter(|s| {
                sample_mask_from_distances(&[0.0, 0.0, 2.0, 2.0], 1.0, *s)
                    .unwrap()
                    .bits()[2]
            })
            .count();
        let p = hits as f64 / n as f64;
        let q = (-2.0f64).exp();
        assert!((p - q / (1.0 + q)).abs() <= 0.02, "{p}");
    }

    #[test]
    fn schema_and_length_mismatches() {
        let e1 = f("e1", "d1", ["a", "b", "c", "d"]);
        let mut e2 = f("e2", "d2", ["w", "x", "y", "z"]);
        let m = MixMask::from_bits(vec![true, false, false, false], 0).unwrap();
        let short = MixMask::from_bits(vec![true, false], 0).unwrap();
        assert!(matches!(
            mix_frames(&e1, &e2, &short),
            Err(MixupError::MaskLength { .. })
        ));
        e2.elements[1].role = "cause".into();
        assert!(matches!(
            mix_frames(&e1, &e2, &m),
            Err(MixupError::SchemaMismatch(..))
        ));
    }

    #[test]
    fn selection_count_is_monotone() {
        for m in 0..20 {
            let mut prev = 0;
            for r in [0.0, 0.1, 0.25, 0.5, 0.75, 1.0] {
                let c = selected_count(m, r);
                assert!(c >= prev && c <= m);
                prev = c;
            }
        }
    }
}
