//! Cross-outlet article matching by title-embedding cosine similarity.
//!
//! Matching operates daily: each article's similarity score is its maximum
//! cosine against the opposing outlet's same-day articles, applied
//! symmetrically to both outlets. Scores partition the corpus into three
//! disjoint tiers plus a separate stratum for articles whose opposing outlet
//! published nothing that day.

mod embed;

pub use embed::{
    embed_titles, EmbedError, Embedder, EmbeddingCache, HashEmbedder, HttpEmbedder,
};

use std::collections::BTreeMap;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Article, OutletId};

/// A title embedding from one model; all vectors in a run share a dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TitleEmbedding {
    pub article_id: String,
    pub vector: Vec<f64>,
    pub model_id: String,
}

/// Similarity tier boundaries. Low is `sim <= low_max`, High is
/// `sim >= high_min`, Mid is the open interval between them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TierBounds {
    pub low_max: f64,
    pub high_min: f64,
}

impl Default for TierBounds {
    fn default() -> Self {
        TierBounds { low_max: 0.3, high_min: 0.6 }
    }
}

impl TierBounds {
    pub fn validate(&self) -> Result<(), MatchError> {
        if !(0.0 <= self.low_max && self.low_max < self.high_min && self.high_min <= 1.0) {
            return Err(MatchError::BadTierBounds { low_max: self.low_max, high_min: self.high_min });
        }
        Ok(())
    }

    pub fn tier_for(&self, sim: f64) -> SimilarityTier {
        if sim >= self.high_min {
            SimilarityTier::High
        } else if sim > self.low_max {
            SimilarityTier::Mid
        } else {
            SimilarityTier::Low
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityTier {
    Low,
    Mid,
    High,
    Unmatched,
}

impl SimilarityTier {
    pub fn label(self) -> &'static str {
        match self {
            SimilarityTier::Low => "low",
            SimilarityTier::Mid => "mid",
            SimilarityTier::High => "high",
            SimilarityTier::Unmatched => "unmatched",
        }
    }

    pub fn from_label(s: &str) -> Option<SimilarityTier> {
        Some(match s {
            "low" => SimilarityTier::Low,
            "mid" => SimilarityTier::Mid,
            "high" => SimilarityTier::High,
            "unmatched" => SimilarityTier::Unmatched,
            _ => return None,
        })
    }
}

/// An article's best same-day cross-outlet match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub article_id: String,
    pub outlet: OutletId,
    pub day: NaiveDate,
    pub best_counterpart_id: Option<String>,
    pub sim: Option<f64>,
    pub tier: SimilarityTier,
}

#[derive(Debug, Error)]
pub enum MatchError {
    #[error("embedding vectors have mismatched dimensions ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("zero-norm embedding vector (degenerate input)")]
    ZeroNorm,
    #[error("missing embedding for article `{0}`")]
    MissingEmbedding(String),
    #[error("invalid tier bounds: low_max={low_max}, high_min={high_min}")]
    BadTierBounds { low_max: f64, high_min: f64 },
    #[error("bin width must be positive, got {0}")]
    BadBinWidth(f64),
}

/// Cosine similarity `u.v / (|u||v|)`. Errors on dimension mismatch or a
/// zero-norm input.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, MatchError> {
    if u.len() != v.len() {
        return Err(MatchError::DimensionMismatch(u.len(), v.len()));
    }
    let mut dot = 0.0;
    let mut nu = 0.0;
    let mut nv = 0.0;
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(MatchError::ZeroNorm);
    }
    // Rounding can push identical vectors a hair past 1; keep the contract.
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

/// Match every article of both outlets against the opposing outlet's
/// same-day set. Ties in the maximum break toward the smallest counterpart
/// id; an empty opposing set yields an Unmatched record. Records come back
/// ordered by (outlet, article id).
pub fn match_day(
    day: NaiveDate,
    side_a: &[Article],
    side_b: &[Article],
    embeddings: &BTreeMap<String, Vec<f64>>,
    bounds: &TierBounds,
) -> Result<Vec<MatchRecord>, MatchError> {
    bounds.validate()?;
    let mut records = Vec::with_capacity(side_a.len() + side_b.len());
    for (own, opposing) in [(side_a, side_b), (side_b, side_a)] {
        for article in own {
            records.push(best_match(day, article, opposing, embeddings, bounds)?);
        }
    }
    records.sort_by(|a, b| (&a.outlet, &a.article_id).cmp(&(&b.outlet, &b.article_id)));
    Ok(records)
}

fn best_match(
    day: NaiveDate,
    article: &Article,
    opposing: &[Article],
    embeddings: &BTreeMap<String, Vec<f64>>,
    bounds: &TierBounds,
) -> Result<MatchRecord, MatchError> {
    let own_vec = embeddings
        .get(&article.id)
        .ok_or_else(|| MatchError::MissingEmbedding(article.id.clone()))?;
    let mut best: Option<(f64, &str)> = None;
    for counterpart in opposing {
        let other_vec = embeddings
            .get(&counterpart.id)
            .ok_or_else(|| MatchError::MissingEmbedding(counterpart.id.clone()))?;
        let sim = cosine(own_vec, other_vec)?;
        let better = match best {
            None => true,
            Some((best_sim, best_id)) => {
                sim > best_sim || (sim == best_sim && counterpart.id.as_str() < best_id)
            }
        };
        if better {
            best = Some((sim, &counterpart.id));
        }
    }
    Ok(match best {
        Some((sim, id)) => MatchRecord {
            article_id: article.id.clone(),
            outlet: article.outlet.clone(),
            day,
            best_counterpart_id: Some(id.to_string()),
            sim: Some(sim),
            tier: bounds.tier_for(sim),
        },
        None => MatchRecord {
            article_id: article.id.clone(),
            outlet: article.outlet.clone(),
            day,
            best_counterpart_id: None,
            sim: None,
            tier: SimilarityTier::Unmatched,
        },
    })
}

/// Tier assignment counts over a set of records.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TierCounts {
    pub low: u64,
    pub mid: u64,
    pub high: u64,
    pub unmatched: u64,
}

impl TierCounts {
    pub fn total(&self) -> u64 {
        self.low + self.mid + self.high + self.unmatched
    }
}

pub fn partition(records: &[MatchRecord]) -> TierCounts {
    let mut counts = TierCounts::default();
    for r in records {
        match r.tier {
            SimilarityTier::Low => counts.low += 1,
            SimilarityTier::Mid => counts.mid += 1,
            SimilarityTier::High => counts.high += 1,
            SimilarityTier::Unmatched => counts.unmatched += 1,
        }
    }
    counts
}

/// Histogram of matched similarity scores over fixed-width bins covering
/// [-1, 1]. Returns (bin_start, count) pairs; counts sum to the number of
/// matched records. A score of exactly 1.0 lands in the final bin.
pub fn histogram(records: &[MatchRecord], bin_width: f64) -> Result<Vec<(f64, u64)>, MatchError> {
    if !(bin_width > 0.0) {
        return Err(MatchError::BadBinWidth(bin_width));
    }
    let n_bins = (2.0 / bin_width).ceil() as usize;
    let mut bins = vec![0u64; n_bins];
    for r in records {
        if let Some(sim) = r.sim {
            // The tiny relative nudge keeps exact boundary values (0.9 with
            // width 0.1) in their decimal bin despite division rounding.
            let idx = ((((sim + 1.0) / bin_width) * (1.0 + 1e-12)).floor() as isize)
                .clamp(0, n_bins as isize - 1) as usize;
            bins[idx] += 1;
        }
    }
    Ok(bins
        .into_iter()
        .enumerate()
        .map(|(i, count)| {
            let start = i as f64 * bin_width - 1.0;
            ((start * 1e9).round() / 1e9, count)
        })
        .collect())
}

/// Seeded uniform sample (without replacement) of matched pairs from a tier,
/// for manual audit export. Returns (record title, counterpart title, sim)
/// triples; `truncated` is set when `n` exceeded the tier size.
pub struct PairSample {
    pub pairs: Vec<(String, String, f64)>,
    pub truncated: bool,
}

pub fn sample_pairs(
    records: &[MatchRecord],
    titles: &BTreeMap<String, String>,
    tier: SimilarityTier,
    n: usize,
    seed: u64,
) -> PairSample {
    let mut in_tier: Vec<&MatchRecord> = records
        .iter()
        .filter(|r| r.tier == tier && r.sim.is_some())
        .collect();
    in_tier.sort_by(|a, b| (&a.outlet, &a.article_id).cmp(&(&b.outlet, &b.article_id)));
    let truncated = n > in_tier.len();
    if truncated {
        log::warn!(
            "sample_pairs: requested {n} pairs from tier {} of size {}; returning all",
            tier.label(),
            in_tier.len()
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    in_tier.shuffle(&mut rng);
    let missing = String::new();
    let pairs = in_tier
        .into_iter()
        .take(n)
        .map(|r| {
            let own = titles.get(&r.article_id).unwrap_or(&missing).clone();
            let other = r
                .best_counterpart_id
                .as_ref()
                .and_then(|id| titles.get(id))
                .unwrap_or(&missing)
                .clone();
            (own, other, r.sim.unwrap_or_default())
        })
        .collect();
    PairSample { pairs, truncated }
}
