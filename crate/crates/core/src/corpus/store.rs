//! On-disk article store.
//!
//! Layout under `<data_dir>/store/` (internal, stable across restarts):
//!
//! ```text
//! ids.txt                        accepted article ids, one per line
//! articles/<outlet>/<day>.jsonl  Article records sorted by id
//! sentences/<outlet>/<day>.jsonl Sentence records sorted by (article_id, index)
//! ```

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::Deserialize;

use super::{
    content_id, Article, CorpusError, CorpusStats, DateRange, OutletId, Sentence,
    SentenceSegmenter, StatsRow,
};

/// Segment one article body into ordered, contiguous sentences.
pub fn segment_article(article: &Article, segmenter: &dyn SentenceSegmenter) -> Vec<Sentence> {
    segmenter
        .split(&article.body)
        .into_iter()
        .enumerate()
        .map(|(index, text)| Sentence { article_id: article.id.clone(), index, text })
        .collect()
}

#[derive(Debug, Clone)]
pub struct IngestOptions {
    /// Bodies shorter than this (after whitespace collapse) are treated as
    /// video-only shells and rejected.
    pub min_body_chars: usize,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions { min_body_chars: 280 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RejectReason {
    MalformedLine,
    EmptyTitle,
    BadDate,
    OutOfPeriod,
    BodyTooShort,
    DuplicateId,
}

impl RejectReason {
    pub fn label(self) -> &'static str {
        match self {
            RejectReason::MalformedLine => "malformed_line",
            RejectReason::EmptyTitle => "empty_title",
            RejectReason::BadDate => "bad_date",
            RejectReason::OutOfPeriod => "out_of_period",
            RejectReason::BodyTooShort => "body_too_short",
            RejectReason::DuplicateId => "duplicate_id",
        }
    }
}

/// Outcome of ingesting one file. `accepted + rejected` always equals
/// `total_lines`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub accepted: u64,
    pub rejected: u64,
    pub total_lines: u64,
    pub rejects_by_reason: BTreeMap<RejectReason, u64>,
}

#[derive(Deserialize)]
struct InputRecord {
    #[serde(default)]
    id: Option<String>,
    title: String,
    body: String,
    date: String,
    #[serde(default)]
    url: Option<String>,
}

pub struct CorpusStore {
    root: PathBuf,
    known_ids: HashSet<String>,
}

impl CorpusStore {
    /// Open (or create) the store under `data_dir`.
    pub fn open(data_dir: &Path) -> Result<CorpusStore, CorpusError> {
        let root = data_dir.join("store");
        fs::create_dir_all(root.join("articles")).map_err(|e| CorpusError::io(&root, e))?;
        fs::create_dir_all(root.join("sentences")).map_err(|e| CorpusError::io(&root, e))?;
        let ids_path = root.join("ids.txt");
        let mut known_ids = HashSet::new();
        if ids_path.exists() {
            let file = fs::File::open(&ids_path).map_err(|e| CorpusError::io(&ids_path, e))?;
            for line in BufReader::new(file).lines() {
                let line = line.map_err(|e| CorpusError::io(&ids_path, e))?;
                if !line.is_empty() {
                    known_ids.insert(line);
                }
            }
        }
        Ok(CorpusStore { root, known_ids })
    }

    fn article_dir(&self, outlet: &OutletId) -> PathBuf {
        self.root.join("articles").join(outlet.as_str())
    }

    fn article_path(&self, outlet: &OutletId, day: NaiveDate) -> PathBuf {
        self.article_dir(outlet).join(format!("{day}.jsonl"))
    }

    fn sentence_path(&self, outlet: &OutletId, day: NaiveDate) -> PathBuf {
        self.root.join("sentences").join(outlet.as_str()).join(format!("{day}.jsonl"))
    }

    /// Ingest a line-delimited file of records
    /// `{"id"?: str, "title": str, "body": str, "date": "YYYY-MM-DD", "url"?: str}`.
    ///
    /// Records failing validation or the video-only length filter are
    /// counted and logged, never stored. A record without an id receives a
    /// content hash of (outlet, date, title); a later record with an id
    /// already seen is rejected as a duplicate. A record is in range when
    /// any of `periods` contains its date.
    pub fn ingest_file(
        &mut self,
        path: &Path,
        outlet: &OutletId,
        periods: &[DateRange],
        opts: &IngestOptions,
    ) -> Result<IngestReport, CorpusError> {
        let file = fs::File::open(path).map_err(|e| CorpusError::io(path, e))?;
        let mut report = IngestReport::default();
        let mut accepted: BTreeMap<NaiveDate, Vec<Article>> = BTreeMap::new();
        let mut reject = |report: &mut IngestReport, line_no: usize, reason: RejectReason| {
            log::warn!(
                "ingest {}:{}: rejected ({})",
                path.display(),
                line_no,
                reason.label()
            );
            report.rejected += 1;
            *report.rejects_by_reason.entry(reason).or_insert(0) += 1;
        };

        for (line_no, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| CorpusError::io(path, e))?;
            report.total_lines += 1;
            let line_no = line_no + 1;
            let record: InputRecord = match serde_json::from_str(&line) {
                Ok(r) => r,
                Err(_) => {
                    reject(&mut report, line_no, RejectReason::MalformedLine);
                    continue;
                }
            };
            let title = record.title.trim();
            if title.is_empty() {
                reject(&mut report, line_no, RejectReason::EmptyTitle);
                continue;
            }
            let Ok(day) = record.date.parse::<NaiveDate>() else {
                reject(&mut report, line_no, RejectReason::BadDate);
                continue;
            };
            if !periods.iter().any(|p| p.contains(day)) {
                reject(&mut report, line_no, RejectReason::OutOfPeriod);
                continue;
            }
            if crate::parser::collapse_ws(&record.body).chars().count() < opts.min_body_chars {
                reject(&mut report, line_no, RejectReason::BodyTooShort);
                continue;
            }
            let id = record
                .id
                .filter(|id| !id.trim().is_empty())
                .unwrap_or_else(|| content_id(outlet, day, title));
            if self.known_ids.contains(&id)
                || accepted.get(&day).is_some_and(|v| v.iter().any(|a| a.id == id))
            {
                reject(&mut report, line_no, RejectReason::DuplicateId);
                continue;
            }
            self.known_ids.insert(id.clone());
            report.accepted += 1;
            accepted.entry(day).or_default().push(Article {
                id,
                outlet: outlet.clone(),
                day,
                title: title.to_string(),
                body: record.body,
                url: record.url,
            });
        }

        for (day, mut articles) in accepted {
            let mut existing = self.by_day(outlet, day)?;
            existing.append(&mut articles);
            existing.sort_by(|a, b| a.id.cmp(&b.id));
            let path = self.article_path(outlet, day);
            write_jsonl(&path, &existing)?;
        }
        self.flush_ids()?;
        Ok(report)
    }

    fn flush_ids(&self) -> Result<(), CorpusError> {
        let path = self.root.join("ids.txt");
        let mut ids: Vec<&String> = self.known_ids.iter().collect();
        ids.sort();
        let file = fs::File::create(&path).map_err(|e| CorpusError::io(&path, e))?;
        let mut w = BufWriter::new(file);
        for id in ids {
            writeln!(w, "{id}").map_err(|e| CorpusError::io(&path, e))?;
        }
        w.flush().map_err(|e| CorpusError::io(&path, e))
    }

    /// All and only the articles for (outlet, day), sorted by id.
    pub fn by_day(&self, outlet: &OutletId, day: NaiveDate) -> Result<Vec<Article>, CorpusError> {
        let path = self.article_path(outlet, day);
        if !path.exists() {
            return Ok(Vec::new());
        }
        let mut articles: Vec<Article> = read_jsonl(&path)?;
        articles.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(articles)
    }

    /// Outlets that have stored articles, sorted.
    pub fn outlets(&self) -> Result<Vec<OutletId>, CorpusError> {
        let dir = self.root.join("articles");
        let mut outlets = Vec::new();
        for entry in fs::read_dir(&dir).map_err(|e| CorpusError::io(&dir, e))? {
            let entry = entry.map_err(|e| CorpusError::io(&dir, e))?;
            if entry.path().is_dir() {
                if let Some(name) = entry.file_name().to_str() {
                    outlets.push(OutletId::new(name)?);
                }
            }
        }
        outlets.sort();
        Ok(outlets)
    }

    /// Days within `period` on which `outlet` published, sorted.
    pub fn days(&self, outlet: &OutletId, period: DateRange) -> Result<Vec<NaiveDate>, CorpusError> {
        let dir = self.article_dir(outlet);
        if !dir.exists() {
            return Ok(Vec::new());
        }
        let mut days = BTreeSet::new();
        for entry in fs::read_dir(&dir).map_err(|e| CorpusError::io(&dir, e))? {
            let entry = entry.map_err(|e| CorpusError::io(&dir, e))?;
            let name = entry.file_name();
            let Some(stem) = name.to_str().and_then(|n| n.strip_suffix(".jsonl")) else {
                continue;
            };
            if let Ok(day) = stem.parse::<NaiveDate>() {
                if period.contains(day) {
                    days.insert(day);
                }
            }
        }
        Ok(days.into_iter().collect())
    }

    /// Union of publication days across all outlets within `period`.
    pub fn days_union(&self, period: DateRange) -> Result<Vec<NaiveDate>, CorpusError> {
        let mut days = BTreeSet::new();
        for outlet in self.outlets()? {
            days.extend(self.days(&outlet, period)?);
        }
        Ok(days.into_iter().collect())
    }

    /// All articles of one outlet within `period`, sorted by (day, id).
    pub fn articles_in(
        &self,
        outlet: &OutletId,
        period: DateRange,
    ) -> Result<Vec<Article>, CorpusError> {
        let mut out = Vec::new();
        for day in self.days(outlet, period)? {
            out.extend(self.by_day(outlet, day)?);
        }
        Ok(out)
    }

    /// Persist segmented sentences for (outlet, day), replacing existing ones.
    pub fn persist_sentences(
        &self,
        outlet: &OutletId,
        day: NaiveDate,
        sentences: &[Sentence],
    ) -> Result<(), CorpusError> {
        let path = self.sentence_path(outlet, day);
        let mut ordered: Vec<&Sentence> = sentences.iter().collect();
        ordered.sort_by(|a, b| (&a.article_id, a.index).cmp(&(&b.article_id, b.index)));
        write_jsonl(&path, &ordered)
    }

    /// Stored sentences for (outlet, day), sorted by (article_id, index).
    pub fn sentences_by_day(
        &self,
        outlet: &OutletId,
        day: NaiveDate,
    ) -> Result<Vec<Sentence>, CorpusError> {
        let path = self.sentence_path(outlet, day);
        if !path.exists() {
            return Ok(Vec::new());
        }
        let mut sentences: Vec<Sentence> = read_jsonl(&path)?;
        sentences.sort_by(|a, b| (&a.article_id, a.index).cmp(&(&b.article_id, b.index)));
        Ok(sentences)
    }

    /// Per-outlet article and sentence tallies for `period`.
    pub fn stats(&self, period: DateRange) -> Result<CorpusStats, CorpusError> {
        let mut rows = Vec::new();
        for outlet in self.outlets()? {
            let mut articles = 0u64;
            let mut sentences = 0u64;
            for day in self.days(&outlet, period)? {
                articles += self.by_day(&outlet, day)?.len() as u64;
                sentences += self.sentences_by_day(&outlet, day)?.len() as u64;
            }
            rows.push(StatsRow {
                period: period.to_string(),
                outlet,
                articles,
                sentences,
            });
        }
        let empty_period = rows.iter().all(|r| r.articles == 0);
        if empty_period {
            log::warn!("stats: no stored articles in period {period}");
        }
        Ok(CorpusStats { rows, empty_period })
    }
}

fn write_jsonl<T: serde::Serialize>(path: &Path, records: &[T]) -> Result<(), CorpusError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CorpusError::io(parent, e))?;
    }
    let file = fs::File::create(path).map_err(|e| CorpusError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for record in records {
        let line = serde_json::to_string(record)
            .map_err(|e| CorpusError::Corrupt { path: path.display().to_string(), reason: e.to_string() })?;
        writeln!(w, "{line}").map_err(|e| CorpusError::io(path, e))?;
    }
    w.flush().map_err(|e| CorpusError::io(path, e))
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, CorpusError> {
    let file = fs::File::open(path).map_err(|e| CorpusError::io(path, e))?;
    let mut out = Vec::new();
    for (line_no, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CorpusError::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| CorpusError::Corrupt {
            path: path.display().to_string(),
            reason: format!("line {}: {}", line_no + 1, e),
        })?;
        out.push(record);
    }
    Ok(out)
}
