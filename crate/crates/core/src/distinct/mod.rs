//! Frequency and distinctiveness rankings of cited source spans.
//!
//! Span texts are normalized to canonical keys (casefold, collapse
//! whitespace, trim edge punctuation; no stemming, no entity linking) and
//! counted per outlet. Distinctiveness is weighted log-odds with an
//! informative Dirichlet prior: each key's prior mass is proportional to
//! its pooled frequency, which shrinks rare-key noise, and the difference
//! is variance-normalized into a z-score.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::OutletId;
use crate::metrics::SentenceFeatures;
use crate::parser::{AnnotatedSentence, SourceType, TagKind};

/// Normalized span-key counts for one outlet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanCounts {
    pub outlet: OutletId,
    pub counts: BTreeMap<String, u64>,
    pub total: u64,
}

impl SpanCounts {
    pub fn new(outlet: OutletId) -> SpanCounts {
        SpanCounts { outlet, counts: BTreeMap::new(), total: 0 }
    }

    pub fn add(&mut self, key: String, n: u64) {
        *self.counts.entry(key).or_insert(0) += n;
        self.total += n;
    }

    pub fn get(&self, key: &str) -> u64 {
        self.counts.get(key).copied().unwrap_or(0)
    }
}

/// Canonical aggregation key for a span text: casefold, collapse internal
/// whitespace, trim punctuation at both ends. Returns `None` (dropped, with
/// a warning) when nothing is left.
pub fn normalize_key(span_text: &str) -> Option<String> {
    let folded = span_text.to_lowercase();
    let collapsed = folded.split_whitespace().collect::<Vec<_>>().join(" ");
    let trimmed = collapsed
        .trim_matches(|c: char| c.is_ascii_punctuation() || is_edge_punct(c))
        .to_string();
    if trimmed.is_empty() {
        log::warn!("span text {span_text:?} normalized to nothing; dropped");
        return None;
    }
    Some(trimmed)
}

fn is_edge_punct(c: char) -> bool {
    matches!(
        c,
        '\u{2018}' | '\u{2019}' | '\u{201c}' | '\u{201d}' | '\u{2013}' | '\u{2014}' | '\u{2026}'
            | '\u{00ab}' | '\u{00bb}'
    )
}

/// Which source spans count toward the tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceFilter {
    ExpertOnly,
    AllTypes,
}

/// Count source spans of the filtered types over parsed sentences.
pub fn count_source_spans<'a>(
    sentences: impl IntoIterator<Item = &'a AnnotatedSentence>,
    outlet: OutletId,
    filter: SourceFilter,
) -> SpanCounts {
    let mut counts = SpanCounts::new(outlet);
    for sentence in sentences {
        for span in &sentence.spans {
            if span.kind != TagKind::Source {
                continue;
            }
            let keep = match filter {
                SourceFilter::ExpertOnly => span.source_type == Some(SourceType::Expert),
                SourceFilter::AllTypes => true,
            };
            if keep {
                if let Some(key) = normalize_key(&sentence.span_text(span)) {
                    counts.add(key, 1);
                }
            }
        }
    }
    counts
}

/// Expert span counts (the default analysis).
pub fn count_expert_spans<'a>(
    sentences: impl IntoIterator<Item = &'a AnnotatedSentence>,
    outlet: OutletId,
) -> SpanCounts {
    count_source_spans(sentences, outlet, SourceFilter::ExpertOnly)
}

/// Count from already-extracted per-sentence features (avoids reparsing).
pub fn count_expert_spans_from_features<'a>(
    features: impl IntoIterator<Item = &'a SentenceFeatures>,
    outlet: OutletId,
) -> SpanCounts {
    let mut counts = SpanCounts::new(outlet);
    for f in features {
        for text in &f.expert_span_texts {
            if let Some(key) = normalize_key(text) {
                counts.add(key, 1);
            }
        }
    }
    counts
}

/// Weighted log-odds of one key, outlet i minus outlet j.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogOddsResult {
    pub key: String,
    pub count_i: u64,
    pub count_j: u64,
    pub delta: f64,
    pub variance: f64,
    pub z: f64,
}

/// Weighted log-odds with an informative Dirichlet prior over the union
/// vocabulary.
///
/// For key w with counts y^i_w, y^j_w and totals n^i, n^j, the prior is
/// `alpha_w = alpha0 * (y^i_w + y^j_w) / (n^i + n^j)` with `A = sum_w
/// alpha_w`; then
///
/// ```text
/// delta_w = ln[(y^i_w + a_w) / (n^i + A - y^i_w - a_w)]
///         - ln[(y^j_w + a_w) / (n^j + A - y^j_w - a_w)]
/// var_w   = 1/(y^i_w + a_w) + 1/(y^j_w + a_w)
/// z_w     = delta_w / sqrt(var_w)
/// ```
///
/// Results are sorted by z descending (key ascending on ties).
pub fn weighted_log_odds(
    counts_i: &SpanCounts,
    counts_j: &SpanCounts,
    alpha0: f64,
) -> Vec<LogOddsResult> {
    assert!(alpha0 > 0.0, "alpha0 must be positive");
    let mut vocabulary: Vec<&String> =
        counts_i.counts.keys().chain(counts_j.counts.keys()).collect();
    vocabulary.sort();
    vocabulary.dedup();
    if vocabulary.is_empty() {
        return Vec::new();
    }

    let n_i = counts_i.total as f64;
    let n_j = counts_j.total as f64;
    let pooled_total = n_i + n_j;
    if pooled_total == 0.0 {
        return Vec::new();
    }
    let alpha = |y_i: f64, y_j: f64| alpha0 * (y_i + y_j) / pooled_total;
    let cap_a: f64 = vocabulary
        .iter()
        .map(|w| alpha(counts_i.get(w) as f64, counts_j.get(w) as f64))
        .sum();

    let mut results: Vec<LogOddsResult> = vocabulary
        .into_iter()
        .map(|w| {
            let y_i = counts_i.get(w) as f64;
            let y_j = counts_j.get(w) as f64;
            let a_w = alpha(y_i, y_j);
            let delta = ((y_i + a_w) / (n_i + cap_a - y_i - a_w)).ln()
                - ((y_j + a_w) / (n_j + cap_a - y_j - a_w)).ln();
            let variance = 1.0 / (y_i + a_w) + 1.0 / (y_j + a_w);
            LogOddsResult {
                key: w.clone(),
                count_i: counts_i.get(w),
                count_j: counts_j.get(w),
                delta,
                variance,
                z: delta / variance.sqrt(),
            }
        })
        .collect();
    results.sort_by(|a, b| {
        b.z.partial_cmp(&a.z).expect("finite z").then_with(|| a.key.cmp(&b.key))
    });
    results
}

/// Top-k tables: most frequent per outlet and most distinctive per outlet
/// (positive z tail for i, negative tail for j). Deterministic tie-breaks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopTables {
    pub frequent_i: Vec<(String, u64)>,
    pub frequent_j: Vec<(String, u64)>,
    pub distinctive_i: Vec<LogOddsResult>,
    pub distinctive_j: Vec<LogOddsResult>,
}

pub fn top_tables(counts_i: &SpanCounts, counts_j: &SpanCounts, k: usize, alpha0: f64) -> TopTables {
    let frequent = |counts: &SpanCounts| -> Vec<(String, u64)> {
        let mut entries: Vec<(String, u64)> =
            counts.counts.iter().map(|(key, n)| (key.clone(), *n)).collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        entries.truncate(k);
        entries
    };
    let ranked = weighted_log_odds(counts_i, counts_j, alpha0);
    let distinctive_i: Vec<LogOddsResult> =
        ranked.iter().filter(|r| r.z > 0.0).take(k).cloned().collect();
    let mut ascending = ranked;
    ascending.sort_by(|a, b| {
        a.z.partial_cmp(&b.z).expect("finite z").then_with(|| a.key.cmp(&b.key))
    });
    let distinctive_j: Vec<LogOddsResult> =
        ascending.into_iter().filter(|r| r.z < 0.0).take(k).collect();
    TopTables {
        frequent_i: frequent(counts_i),
        frequent_j: frequent(counts_j),
        distinctive_i,
        distinctive_j,
    }
}
