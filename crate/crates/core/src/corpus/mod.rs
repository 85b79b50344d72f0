//! Article ingestion, validation, persistence, and sentence segmentation.
//!
//! Articles arrive as UTF-8 line-delimited JSON records and are persisted
//! under the data directory grouped by outlet and publication day. The store
//! layout is internal but survives process restarts; all returned values are
//! immutable snapshots.

mod segment;
mod store;

pub use segment::{RuleSegmenter, SentenceSegmenter};
pub use store::{segment_article, CorpusStore, IngestOptions, IngestReport, RejectReason};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lowercase-canonicalized outlet identifier. An analysis run compares
/// exactly two distinct outlets.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OutletId(String);

impl OutletId {
    pub fn new(name: &str) -> Result<OutletId, CorpusError> {
        let canonical = name.trim().to_lowercase();
        if canonical.is_empty() {
            return Err(CorpusError::EmptyOutlet);
        }
        Ok(OutletId(canonical))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for OutletId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// One news item; the unit of matching.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Article {
    pub id: String,
    pub outlet: OutletId,
    pub day: NaiveDate,
    pub title: String,
    pub body: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub url: Option<String>,
}

/// One sentence of an article body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub article_id: String,
    pub index: usize,
    pub text: String,
}

/// Inclusive calendar date range, rendered as `start..end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateRange {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<DateRange, CorpusError> {
        if end < start {
            return Err(CorpusError::InvalidPeriod(format!("{start}..{end}")));
        }
        Ok(DateRange { start, end })
    }

    pub fn contains(&self, day: NaiveDate) -> bool {
        self.start <= day && day <= self.end
    }

    pub fn days(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.start.iter_days().take_while(move |d| *d <= self.end)
    }

    /// Parse `YYYY-MM-DD..YYYY-MM-DD`.
    pub fn parse(s: &str) -> Result<DateRange, CorpusError> {
        let (a, b) = s
            .split_once("..")
            .ok_or_else(|| CorpusError::InvalidPeriod(s.to_string()))?;
        let start = a
            .parse()
            .map_err(|_| CorpusError::InvalidPeriod(s.to_string()))?;
        let end = b
            .parse()
            .map_err(|_| CorpusError::InvalidPeriod(s.to_string()))?;
        DateRange::new(start, end)
    }
}

impl std::fmt::Display for DateRange {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

/// Per-(period, outlet) article and sentence tallies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub rows: Vec<StatsRow>,
    /// True when the requested period had no stored articles at all.
    pub empty_period: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsRow {
    pub period: String,
    pub outlet: OutletId,
    pub articles: u64,
    pub sentences: u64,
}

impl CorpusStats {
    pub fn total_articles(&self) -> u64 {
        self.rows.iter().map(|r| r.articles).sum()
    }

    pub fn total_sentences(&self) -> u64 {
        self.rows.iter().map(|r| r.sentences).sum()
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("outlet name must be non-empty")]
    EmptyOutlet,
    #[error("invalid period `{0}`, expected YYYY-MM-DD..YYYY-MM-DD")]
    InvalidPeriod(String),
    #[error("store I/O failure at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt store record in {path}: {reason}")]
    Corrupt { path: String, reason: String },
}

impl CorpusError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> CorpusError {
        CorpusError::Io { path: path.display().to_string(), source }
    }
}

/// Stable article id derived from identifying content, used when the input
/// record carries none.
pub fn content_id(outlet: &OutletId, day: NaiveDate, title: &str) -> String {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    hasher.update(outlet.as_str().as_bytes());
    hasher.update(b"\x1f");
    hasher.update(day.to_string().as_bytes());
    hasher.update(b"\x1f");
    hasher.update(title.as_bytes());
    let digest = hasher.finalize();
    let mut out = String::with_capacity(16);
    for byte in &digest[..8] {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}
