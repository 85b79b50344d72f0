//! Aggregation of per-sentence features into mergeable, stratified counts
//! and the conditional-probability comparisons built on them.
//!
//! `FeatureCounts` is a monoid: `merge` is associative and commutative with
//! an all-zero identity, so accumulation can shard by article across
//! workers and combine at join points. Probabilities are ratios of summed
//! counts, which makes merge-then-measure equal measure-then-combine by
//! construction; outlet differences get an unpooled two-proportion z and a
//! by-article cluster bootstrap interval (sentences within an article are
//! not independent samples).

mod bootstrap;

pub use bootstrap::bootstrap_ci;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::OutletId;
use crate::matcher::SimilarityTier;
use crate::parser::{Naming, QuoteMode, SourceType};

/// Appeal-context attributes tracked per sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttrKind {
    SourceAttribute,
    Recipient,
    Time,
    Location,
}

impl AttrKind {
    pub const ALL: [AttrKind; 4] =
        [AttrKind::SourceAttribute, AttrKind::Recipient, AttrKind::Time, AttrKind::Location];

    pub fn label(self) -> &'static str {
        match self {
            AttrKind::SourceAttribute => "source_attribute",
            AttrKind::Recipient => "recipient",
            AttrKind::Time => "time",
            AttrKind::Location => "location",
        }
    }
}

/// Feature tallies for a single sentence.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SentenceFeatures {
    pub is_factual: bool,
    pub n_fact_appeal: u32,
    pub n_fact_no_appeal: u32,
    pub sources: BTreeMap<(Option<Naming>, Option<SourceType>), u32>,
    pub quotes: BTreeMap<QuoteMode, u32>,
    pub has_source_attribute: bool,
    pub has_recipient: bool,
    pub has_time: bool,
    pub has_location: bool,
    pub expert_span_texts: Vec<String>,
}

impl SentenceFeatures {
    pub fn has_attr(&self, attr: AttrKind) -> bool {
        match attr {
            AttrKind::SourceAttribute => self.has_source_attribute,
            AttrKind::Recipient => self.has_recipient,
            AttrKind::Time => self.has_time,
            AttrKind::Location => self.has_location,
        }
    }
}

/// Which tiered slice of the corpus a count belongs to. `All` pools the
/// three matched tiers; Unmatched articles stay out of tiered comparisons
/// unless explicitly requested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TierScope {
    All,
    One(SimilarityTier),
}

impl TierScope {
    pub fn label(self) -> &'static str {
        match self {
            TierScope::All => "all",
            TierScope::One(t) => t.label(),
        }
    }
}

/// Stratification key for aggregated counts.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Stratum {
    pub outlet: OutletId,
    pub tier: TierScope,
    pub topic: Option<u32>,
    pub period: String,
}

/// Mergeable feature tallies for one stratum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureCounts {
    pub stratum: Stratum,
    pub sentences: u64,
    pub factual_sentences: u64,
    /// Sentences containing at least one appeal span.
    pub appeal_sentences: u64,
    pub fact_appeal_spans: u64,
    pub fact_no_appeal_spans: u64,
    pub source_spans: BTreeMap<(Option<Naming>, Option<SourceType>), u64>,
    pub quote_spans: BTreeMap<QuoteMode, u64>,
    /// Sentences where the attribute is present.
    pub attr_sentences: BTreeMap<AttrKind, u64>,
    /// Sentences where the attribute is present alongside >= 1 appeal span.
    pub attr_appeal_sentences: BTreeMap<AttrKind, u64>,
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("cannot merge counts from different strata ({0:?} vs {1:?})")]
    StratumMismatch(Stratum, Stratum),
    #[error("metric {metric} undefined: denominator is zero")]
    Undefined { metric: String },
}

impl FeatureCounts {
    pub fn zero(stratum: Stratum) -> FeatureCounts {
        FeatureCounts {
            stratum,
            sentences: 0,
            factual_sentences: 0,
            appeal_sentences: 0,
            fact_appeal_spans: 0,
            fact_no_appeal_spans: 0,
            source_spans: BTreeMap::new(),
            quote_spans: BTreeMap::new(),
            attr_sentences: BTreeMap::new(),
            attr_appeal_sentences: BTreeMap::new(),
        }
    }

    /// Fold one sentence into the tallies: sentence counters advance by one,
    /// span counters by the sentence's span counts.
    pub fn accumulate(&mut self, features: &SentenceFeatures) {
        self.sentences += 1;
        if features.is_factual {
            self.factual_sentences += 1;
        }
        if features.n_fact_appeal > 0 {
            self.appeal_sentences += 1;
        }
        self.fact_appeal_spans += features.n_fact_appeal as u64;
        self.fact_no_appeal_spans += features.n_fact_no_appeal as u64;
        for (key, count) in &features.sources {
            *self.source_spans.entry(*key).or_insert(0) += *count as u64;
        }
        for (mode, count) in &features.quotes {
            *self.quote_spans.entry(*mode).or_insert(0) += *count as u64;
        }
        for attr in AttrKind::ALL {
            if features.has_attr(attr) {
                *self.attr_sentences.entry(attr).or_insert(0) += 1;
                if features.n_fact_appeal > 0 {
                    *self.attr_appeal_sentences.entry(attr).or_insert(0) += 1;
                }
            }
        }
    }

    /// Fieldwise sum of two tallies from the same stratum.
    pub fn merge(&self, other: &FeatureCounts) -> Result<FeatureCounts, MetricsError> {
        if self.stratum != other.stratum {
            return Err(MetricsError::StratumMismatch(
                self.stratum.clone(),
                other.stratum.clone(),
            ));
        }
        let mut out = self.clone();
        out.add_fields(other);
        Ok(out)
    }

    /// Roll up tallies from (possibly different) strata into a relabeled
    /// aggregate, e.g. pooling tiers into a `TierScope::All` stratum.
    pub fn combine<'a>(
        counts: impl IntoIterator<Item = &'a FeatureCounts>,
        stratum: Stratum,
    ) -> FeatureCounts {
        let mut out = FeatureCounts::zero(stratum);
        for c in counts {
            out.add_fields(c);
        }
        out
    }

    fn add_fields(&mut self, other: &FeatureCounts) {
        self.sentences += other.sentences;
        self.factual_sentences += other.factual_sentences;
        self.appeal_sentences += other.appeal_sentences;
        self.fact_appeal_spans += other.fact_appeal_spans;
        self.fact_no_appeal_spans += other.fact_no_appeal_spans;
        for (key, count) in &other.source_spans {
            *self.source_spans.entry(*key).or_insert(0) += count;
        }
        for (mode, count) in &other.quote_spans {
            *self.quote_spans.entry(*mode).or_insert(0) += count;
        }
        for (attr, count) in &other.attr_sentences {
            *self.attr_sentences.entry(*attr).or_insert(0) += count;
        }
        for (attr, count) in &other.attr_appeal_sentences {
            *self.attr_appeal_sentences.entry(*attr).or_insert(0) += count;
        }
    }

    pub fn total_source_spans(&self) -> u64 {
        self.source_spans.values().sum()
    }

    pub fn total_quote_spans(&self) -> u64 {
        self.quote_spans.values().sum()
    }
}

/// How P(Appeal|Fact) is computed: over fact spans (claims are span-level
/// objects in the scheme) or over factual sentences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AppealBasis {
    SpanLevel,
    SentenceLevel,
}

impl Default for AppealBasis {
    fn default() -> Self {
        AppealBasis::SpanLevel
    }
}

/// The closed set of reported metrics, in analytical-funnel order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MetricKey {
    FactGivenSentence,
    AppealGivenFact,
    NamedGivenSource,
    TypeGivenSource(SourceType),
    QuoteModeShare(QuoteMode),
    AttrGivenAppeal(AttrKind),
}

impl MetricKey {
    /// All metrics in funnel order: sentence -> fact -> appeal -> appeal
    /// characteristics.
    pub fn funnel() -> Vec<MetricKey> {
        let mut keys = vec![
            MetricKey::FactGivenSentence,
            MetricKey::AppealGivenFact,
            MetricKey::NamedGivenSource,
        ];
        keys.extend(SourceType::ALL.iter().map(|t| MetricKey::TypeGivenSource(*t)));
        keys.push(MetricKey::QuoteModeShare(QuoteMode::Direct));
        keys.push(MetricKey::QuoteModeShare(QuoteMode::Indirect));
        keys.extend(AttrKind::ALL.iter().map(|a| MetricKey::AttrGivenAppeal(*a)));
        keys
    }

    pub fn label(&self) -> String {
        match self {
            MetricKey::FactGivenSentence => "fact_given_sentence".to_string(),
            MetricKey::AppealGivenFact => "appeal_given_fact".to_string(),
            MetricKey::NamedGivenSource => "named_given_source".to_string(),
            MetricKey::TypeGivenSource(t) => format!("type_given_source:{}", t.label()),
            MetricKey::QuoteModeShare(m) => format!("quote_share:{}", m.label()),
            MetricKey::AttrGivenAppeal(a) => format!("attr_given_appeal:{}", a.label()),
        }
    }

    pub fn from_label(label: &str) -> Option<MetricKey> {
        MetricKey::funnel().into_iter().find(|k| k.label() == label)
    }
}

/// Numerator and denominator of a metric over one stratum's counts.
pub fn metric_fraction(metric: MetricKey, c: &FeatureCounts, basis: AppealBasis) -> (u64, u64) {
    match metric {
        MetricKey::FactGivenSentence => (c.factual_sentences, c.sentences),
        MetricKey::AppealGivenFact => match basis {
            AppealBasis::SpanLevel => {
                (c.fact_appeal_spans, c.fact_appeal_spans + c.fact_no_appeal_spans)
            }
            AppealBasis::SentenceLevel => (c.appeal_sentences, c.factual_sentences),
        },
        MetricKey::NamedGivenSource => {
            let named = c
                .source_spans
                .iter()
                .filter(|((naming, _), _)| *naming == Some(Naming::Named))
                .map(|(_, n)| n)
                .sum();
            (named, c.total_source_spans())
        }
        MetricKey::TypeGivenSource(t) => {
            let of_type = c
                .source_spans
                .iter()
                .filter(|((_, st), _)| *st == Some(t))
                .map(|(_, n)| n)
                .sum();
            (of_type, c.total_source_spans())
        }
        MetricKey::QuoteModeShare(m) => {
            (c.quote_spans.get(&m).copied().unwrap_or(0), c.total_quote_spans())
        }
        MetricKey::AttrGivenAppeal(a) => (
            c.attr_appeal_sentences.get(&a).copied().unwrap_or(0),
            c.appeal_sentences,
        ),
    }
}

/// A metric's probability and denominator. A zero denominator is an error,
/// never a silent zero.
pub fn probability(
    metric: MetricKey,
    c: &FeatureCounts,
    basis: AppealBasis,
) -> Result<(f64, u64), MetricsError> {
    let (num, den) = metric_fraction(metric, c, basis);
    if den == 0 {
        return Err(MetricsError::Undefined { metric: metric.label() });
    }
    Ok((num as f64 / den as f64, den))
}

/// Unpooled two-proportion z statistic.
pub fn two_proportion_z(p_a: f64, n_a: u64, p_b: f64, n_b: u64) -> f64 {
    let diff = p_a - p_b;
    let var = p_a * (1.0 - p_a) / n_a as f64 + p_b * (1.0 - p_b) / n_b as f64;
    if var == 0.0 {
        return 0.0;
    }
    diff / var.sqrt()
}

/// One metric's outlet comparison for a stratum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub metric: String,
    pub tier: String,
    pub topic: Option<u32>,
    pub period: String,
    pub p_a: Option<f64>,
    pub p_b: Option<f64>,
    pub diff: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub z: Option<f64>,
    pub n_a: u64,
    pub n_b: u64,
    /// Set when either denominator falls below the configured floor.
    pub low_n: bool,
}

impl ComparisonRow {
    pub fn computable(&self) -> bool {
        self.diff.is_some()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CompareOptions {
    pub bootstrap_reps: u32,
    pub seed: u64,
    pub basis: AppealBasis,
    pub low_n_threshold: u64,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions {
            bootstrap_reps: 1000,
            seed: 7,
            basis: AppealBasis::SpanLevel,
            low_n_threshold: 30,
        }
    }
}

/// Compare one metric between outlet A and outlet B over a stratum.
///
/// `per_article_a`/`per_article_b` are per-article tallies (the bootstrap
/// clusters); pass them sorted by article id for reproducible intervals.
/// Rows with an undefined probability on either side are NotComputable:
/// every numeric field is absent rather than zero.
pub fn compare(
    metric: MetricKey,
    tier: TierScope,
    topic: Option<u32>,
    period: &str,
    per_article_a: &[FeatureCounts],
    per_article_b: &[FeatureCounts],
    opts: &CompareOptions,
) -> ComparisonRow {
    let frac = |articles: &[FeatureCounts]| -> (u64, u64) {
        articles
            .iter()
            .map(|c| metric_fraction(metric, c, opts.basis))
            .fold((0, 0), |(n, d), (n2, d2)| (n + n2, d + d2))
    };
    let (num_a, den_a) = frac(per_article_a);
    let (num_b, den_b) = frac(per_article_b);

    let mut row = ComparisonRow {
        metric: metric.label(),
        tier: tier.label().to_string(),
        topic,
        period: period.to_string(),
        p_a: None,
        p_b: None,
        diff: None,
        ci_low: None,
        ci_high: None,
        z: None,
        n_a: den_a,
        n_b: den_b,
        low_n: den_a.min(den_b) < opts.low_n_threshold,
    };
    if den_a == 0 || den_b == 0 {
        log::warn!(
            "comparison {} [{} topic={:?} {}] not computable: zero denominator",
            row.metric,
            row.tier,
            row.topic,
            row.period
        );
        return row;
    }
    let p_a = num_a as f64 / den_a as f64;
    let p_b = num_b as f64 / den_b as f64;
    row.p_a = Some(p_a);
    row.p_b = Some(p_b);
    let diff = p_a - p_b;
    row.diff = Some(diff);
    row.z = Some(two_proportion_z(p_a, den_a, p_b, den_b));
    if let Some((lo, hi)) = bootstrap::bootstrap_ci(
        metric,
        per_article_a,
        per_article_b,
        opts.bootstrap_reps,
        opts.seed,
        opts.basis,
    ) {
        // Percentile interval, widened if needed so it brackets the point
        // estimate on degenerate resamples.
        row.ci_low = Some(lo.min(diff));
        row.ci_high = Some(hi.max(diff));
    }
    row
}

/// One row of the per-stratum funnel table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunnelRow {
    pub metric: String,
    pub p: Option<f64>,
    pub n: u64,
}

/// All metrics for one stratum in funnel order. Undefined metrics are
/// reported with `p = None` and their (zero) denominator.
pub fn funnel_report(counts: &FeatureCounts, basis: AppealBasis) -> Vec<FunnelRow> {
    MetricKey::funnel()
        .into_iter()
        .map(|metric| {
            let (num, den) = metric_fraction(metric, counts, basis);
            FunnelRow {
                metric: metric.label(),
                p: (den > 0).then(|| num as f64 / den as f64),
                n: den,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests;
