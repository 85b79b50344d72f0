//! Stage fingerprints and implementations.
//!
//! Every output file is written with explicit headers and deterministic row
//! order, so for fixed inputs, seeds, and the stub annotator the bytes are
//! identical across reruns and platforms.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::annotate::{
    annotate, AnnotationCache, AnnotationRequest, AnnotationStatus, Annotator, GatewayConfig,
    HttpAnnotator, StubAnnotator,
};
use crate::corpus::{segment_article, CorpusStore, IngestOptions, RuleSegmenter};
use crate::distinct::{count_source_spans, weighted_log_odds, SourceFilter, SpanCounts};
use crate::matcher::{
    embed_titles, histogram, match_day, EmbeddingCache, Embedder, HashEmbedder, HttpEmbedder,
    MatchRecord, SimilarityTier,
};
use crate::metrics::{
    compare, CompareOptions, ComparisonRow, FeatureCounts, MetricKey, Stratum,
    TierScope,
};
use crate::parser::{parse_recover, AnnotatedSentence, SentenceId};
use crate::topics::fit_corpus;

use super::manifest::Fingerprint;
use super::{PipelineError, RunConfig, RunManifest, Stage};

const SEGMENTER_VERSION: &str = "rule-segmenter-v1";
const REPORT_VERSION: &str = "report-v1";

pub fn out_path(config: &RunConfig, name: &str) -> PathBuf {
    config.data_dir.join("out").join(name)
}

fn ensure_parent(path: &Path) -> Result<(), PipelineError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .map_err(|e| PipelineError::Io { path: parent.display().to_string(), source: e })?;
    }
    Ok(())
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> PipelineError + '_ {
    move |e| PipelineError::Io { path: path.display().to_string(), source: e }
}

/// Open a CSV writer and emit the header row.
fn csv_writer(path: &Path, headers: &[&str]) -> Result<csv::Writer<fs::File>, PipelineError> {
    ensure_parent(path)?;
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    writer.write_record(headers)?;
    Ok(writer)
}

fn serialized<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("config sections serialize")
}

/// Fingerprint a stage over its config slice, the stub switch where it
/// matters, and the recorded outputs of its upstream stages.
pub fn fingerprint(
    stage: Stage,
    config: &RunConfig,
    stub: bool,
    manifest: &RunManifest,
) -> Result<String, PipelineError> {
    let mut fp = Fingerprint::new(stage.label());
    fp.update(&serialized(&config.periods));
    fp.update(&serialized(&config.outlets));
    for dep in stage.deps(config) {
        fp.update(dep.label());
        if let Some(record) = manifest.stages.get(dep.label()) {
            fp.update(&serialized(&record.outputs));
        }
    }
    match stage {
        Stage::Ingest => {
            fp.update(&serialized(&config.ingest));
            for input in &config.inputs {
                fp.update(input.outlet.as_str());
                for file in &input.files {
                    fp.update_file(file)?;
                }
            }
        }
        Stage::Segment => {
            fp.update(SEGMENTER_VERSION);
        }
        Stage::Match => {
            fp.update(&serialized(&config.matching));
            fp.update(&serialized(&config.embedding));
            fp.update(if stub { "stub" } else { "http" });
        }
        Stage::Annotate => {
            fp.update(&serialized(&config.annotation));
            fp.update(if stub { "stub" } else { "http" });
        }
        Stage::Parse => {
            fp.update("recover");
        }
        Stage::Topics => {
            fp.update(&serialized(&config.topics));
        }
        Stage::Stats => {
            fp.update(&serialized(&config.stats));
            fp.update(&serialized(&config.topics.junk_topics));
        }
        Stage::Distinct => {
            fp.update(&serialized(&config.distinct));
        }
        Stage::Report => {
            fp.update(REPORT_VERSION);
            fp.update(&serialized(&config.distinct));
        }
    }
    Ok(fp.finish())
}

pub fn execute(
    stage: Stage,
    config: &RunConfig,
    stub: bool,
    manifest: &mut RunManifest,
) -> Result<Vec<PathBuf>, PipelineError> {
    match stage {
        Stage::Ingest => run_ingest(config),
        Stage::Segment => run_segment(config),
        Stage::Match => run_match(config, stub),
        Stage::Annotate => run_annotate(config, stub, manifest),
        Stage::Parse => run_parse(config, manifest),
        Stage::Topics => run_topics(config),
        Stage::Stats => run_stats(config, manifest),
        Stage::Distinct => run_distinct(config),
        Stage::Report => super::report::run_report(config, manifest),
    }
}

fn outlet_pair(config: &RunConfig) -> [&crate::corpus::OutletId; 2] {
    [&config.outlets.0, &config.outlets.1]
}

// ---------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------

fn run_ingest(config: &RunConfig) -> Result<Vec<PathBuf>, PipelineError> {
    let mut store = CorpusStore::open(&config.data_dir)?;
    let opts = IngestOptions { min_body_chars: config.ingest.min_body_chars };
    for input in &config.inputs {
        for file in &input.files {
            let report = store.ingest_file(file, &input.outlet, &config.periods, &opts)?;
            log::info!(
                "ingest {}: {} accepted, {} rejected of {} lines",
                file.display(),
                report.accepted,
                report.rejected,
                report.total_lines
            );
        }
    }
    store_article_files(config)
}

fn store_article_files(config: &RunConfig) -> Result<Vec<PathBuf>, PipelineError> {
    let store = CorpusStore::open(&config.data_dir)?;
    let mut outputs = vec![config.data_dir.join("store").join("ids.txt")];
    for outlet in store.outlets()? {
        for period in &config.periods {
            for day in store.days(&outlet, *period)? {
                outputs.push(
                    config
                        .data_dir
                        .join("store")
                        .join("articles")
                        .join(outlet.as_str())
                        .join(format!("{day}.jsonl")),
                );
            }
        }
    }
    outputs.sort();
    outputs.dedup();
    Ok(outputs)
}

// ---------------------------------------------------------------------
// segment
// ---------------------------------------------------------------------

fn run_segment(config: &RunConfig) -> Result<Vec<PathBuf>, PipelineError> {
    let store = CorpusStore::open(&config.data_dir)?;
    let segmenter = RuleSegmenter::default();
    let mut outputs = Vec::new();
    for outlet in outlet_pair(config) {
        for period in &config.periods {
            for day in store.days(outlet, *period)? {
                let mut sentences = Vec::new();
                for article in store.by_day(outlet, day)? {
                    sentences.extend(segment_article(&article, &segmenter));
                }
                store.persist_sentences(outlet, day, &sentences)?;
                outputs.push(
                    config
                        .data_dir
                        .join("store")
                        .join("sentences")
                        .join(outlet.as_str())
                        .join(format!("{day}.jsonl")),
                );
            }
        }
    }
    outputs.sort();
    Ok(outputs)
}

// ---------------------------------------------------------------------
// match
// ---------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
pub struct MatchCsvRow {
    pub article_id: String,
    pub outlet: String,
    pub day: String,
    pub counterpart_id: Option<String>,
    pub sim: Option<f64>,
    pub tier: String,
}

fn make_embedder(config: &RunConfig, stub: bool) -> Box<dyn Embedder> {
    if stub {
        Box::new(HashEmbedder::default())
    } else {
        Box::new(HttpEmbedder::new(
            &config.embedding.endpoint,
            &config.embedding.model,
            config.embedding.max_retries,
        ))
    }
}

fn run_match(config: &RunConfig, stub: bool) -> Result<Vec<PathBuf>, PipelineError> {
    let store = CorpusStore::open(&config.data_dir)?;
    let embedder = make_embedder(config, stub);
    let mut cache = EmbeddingCache::open(&config.data_dir, embedder.model_id())?;
    let bounds = config.matching.bounds();
    let [outlet_a, outlet_b] = outlet_pair(config);

    let mut all_records: Vec<(String, MatchRecord)> = Vec::new();
    let mut histogram_rows: Vec<(String, f64, u64)> = Vec::new();
    for period in &config.periods {
        let articles_a = store.articles_in(outlet_a, *period)?;
        let articles_b = store.articles_in(outlet_b, *period)?;
        let mut embeddings = BTreeMap::new();
        for batch in [&articles_a, &articles_b] {
            for emb in
                embed_titles(batch, embedder.as_ref(), &mut cache, config.embedding.batch_size)?
            {
                embeddings.insert(emb.article_id, emb.vector);
            }
        }
        let mut period_records = Vec::new();
        for day in store.days_union(*period)? {
            let day_a = store.by_day(outlet_a, day)?;
            let day_b = store.by_day(outlet_b, day)?;
            if day_a.is_empty() && day_b.is_empty() {
                continue;
            }
            period_records.extend(match_day(day, &day_a, &day_b, &embeddings, &bounds)?);
        }
        for (start, count) in histogram(&period_records, config.matching.bin_width)? {
            histogram_rows.push((period.to_string(), start, count));
        }
        all_records.extend(period_records.into_iter().map(|r| (period.to_string(), r)));
    }

    all_records.sort_by(|(_, a), (_, b)| {
        (&a.day, &a.outlet, &a.article_id).cmp(&(&b.day, &b.outlet, &b.article_id))
    });
    let matches_path = out_path(config, "matches.csv");
    let mut writer = csv_writer(
        &matches_path,
        &["article_id", "outlet", "day", "counterpart_id", "sim", "tier"],
    )?;
    for (_, r) in &all_records {
        writer.serialize(MatchCsvRow {
            article_id: r.article_id.clone(),
            outlet: r.outlet.as_str().to_string(),
            day: r.day.to_string(),
            counterpart_id: r.best_counterpart_id.clone(),
            sim: r.sim,
            tier: r.tier.label().to_string(),
        })?;
    }
    writer.flush().map_err(io_err(&matches_path))?;

    let histogram_path = out_path(config, "similarity_histogram.csv");
    let mut writer = csv_writer(&histogram_path, &["period", "bin_start", "count"])?;
    for (period, start, count) in histogram_rows {
        writer.serialize((period, start, count))?;
    }
    writer.flush().map_err(io_err(&histogram_path))?;

    Ok(vec![matches_path, histogram_path])
}

// ---------------------------------------------------------------------
// annotate
// ---------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
pub struct AnnotationRow {
    pub article_id: String,
    pub index: usize,
    pub text: String,
    pub tagged_text: String,
    pub status: AnnotationStatus,
}

fn run_annotate(
    config: &RunConfig,
    stub: bool,
    manifest: &mut RunManifest,
) -> Result<Vec<PathBuf>, PipelineError> {
    let store = CorpusStore::open(&config.data_dir)?;
    let annotator: Box<dyn Annotator> = if stub {
        Box::new(StubAnnotator)
    } else {
        if config.annotation.endpoint.is_empty() {
            return Err(PipelineError::BadConfig {
                reason: "annotation.endpoint is empty; configure it or run with --stub".to_string(),
            });
        }
        Box::new(HttpAnnotator::new(&config.annotation.endpoint, config.annotation.max_retries))
    };
    let mut cache = AnnotationCache::open(&config.data_dir)?;

    let mut requests = Vec::new();
    for outlet in outlet_pair(config) {
        for period in &config.periods {
            for day in store.days(outlet, *period)? {
                for sentence in store.sentences_by_day(outlet, day)? {
                    requests.push(AnnotationRequest {
                        sentence_id: SentenceId::new(sentence.article_id.clone(), sentence.index),
                        text: sentence.text,
                    });
                }
            }
        }
    }

    let gateway_config = GatewayConfig { batch_size: config.annotation.batch_size };
    let responses = annotate(&requests, annotator.as_ref(), &mut cache, &gateway_config)?;
    let ok = responses.iter().filter(|r| r.status == AnnotationStatus::Ok).count();
    let coverage = if responses.is_empty() { 0.0 } else { ok as f64 / responses.len() as f64 };
    manifest.annotation_coverage = Some(coverage);
    if coverage < config.annotation.coverage_floor {
        manifest.warn(format!(
            "annotation coverage {coverage:.4} below floor {}",
            config.annotation.coverage_floor
        ));
    }

    let path = out_path(config, "annotations.jsonl");
    ensure_parent(&path)?;
    let file = fs::File::create(&path).map_err(io_err(&path))?;
    let mut writer = BufWriter::new(file);
    for (request, response) in requests.iter().zip(&responses) {
        let row = AnnotationRow {
            article_id: response.sentence_id.article_id.clone(),
            index: response.sentence_id.index,
            text: request.text.clone(),
            tagged_text: response.tagged_text.clone(),
            status: response.status,
        };
        let line = serde_json::to_string(&row).expect("row serializes");
        writeln!(writer, "{line}").map_err(io_err(&path))?;
    }
    writer.flush().map_err(io_err(&path))?;
    Ok(vec![path])
}

// ---------------------------------------------------------------------
// parse
// ---------------------------------------------------------------------

fn run_parse(config: &RunConfig, manifest: &mut RunManifest) -> Result<Vec<PathBuf>, PipelineError> {
    use rayon::prelude::*;

    let in_path = out_path(config, "annotations.jsonl");
    let file = fs::File::open(&in_path).map_err(io_err(&in_path))?;
    let mut rows = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(io_err(&in_path))?;
        if line.is_empty() {
            continue;
        }
        let row: AnnotationRow =
            serde_json::from_str(&line).map_err(|e| PipelineError::CorruptManifest {
                path: in_path.display().to_string(),
                reason: e.to_string(),
            })?;
        if row.status == AnnotationStatus::Ok {
            rows.push(row);
        }
    }

    let parsed: Vec<(AnnotatedSentence, usize)> = rows
        .par_iter()
        .map(|row| {
            let (sentence, errors) = parse_recover(
                SentenceId::new(row.article_id.clone(), row.index),
                &row.tagged_text,
            );
            (sentence, errors.len())
        })
        .collect();
    let with_errors = parsed.iter().filter(|(_, errors)| *errors > 0).count();
    let rate = if parsed.is_empty() { 0.0 } else { with_errors as f64 / parsed.len() as f64 };
    manifest.parse_error_rate = Some(rate);
    if with_errors > 0 {
        manifest.warn(format!("{with_errors} of {} sentences had recoverable parse errors", parsed.len()));
    }

    let path = out_path(config, "spans.jsonl");
    ensure_parent(&path)?;
    let file = fs::File::create(&path).map_err(io_err(&path))?;
    let mut writer = BufWriter::new(file);
    for (sentence, _) in &parsed {
        let line = serde_json::to_string(sentence).expect("sentence serializes");
        writeln!(writer, "{line}").map_err(io_err(&path))?;
    }
    writer.flush().map_err(io_err(&path))?;
    Ok(vec![path])
}

fn read_spans(path: &Path) -> Result<Vec<AnnotatedSentence>, PipelineError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut sentences = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(io_err(path))?;
        if line.is_empty() {
            continue;
        }
        let sentence: AnnotatedSentence =
            serde_json::from_str(&line).map_err(|e| PipelineError::CorruptManifest {
                path: path.display().to_string(),
                reason: e.to_string(),
            })?;
        sentences.push(sentence);
    }
    Ok(sentences)
}

// ---------------------------------------------------------------------
// topics
// ---------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
pub struct AssignmentRow {
    pub article_id: String,
    pub topic: u32,
    pub weight: f64,
}

fn run_topics(config: &RunConfig) -> Result<Vec<PathBuf>, PipelineError> {
    let store = CorpusStore::open(&config.data_dir)?;
    let mut docs: Vec<(String, String)> = Vec::new();
    for outlet in outlet_pair(config) {
        for period in &config.periods {
            for article in store.articles_in(outlet, *period)? {
                docs.push((article.id, article.body));
            }
        }
    }

    let topics_path = out_path(config, "topics.csv");
    let assignments_path = out_path(config, "assignments.csv");
    let mut topics_writer = csv_writer(&topics_path, &["topic", "top_terms"])?;
    let mut assignments_writer =
        csv_writer(&assignments_path, &["article_id", "topic", "weight"])?;

    if docs.is_empty() {
        topics_writer.flush().map_err(io_err(&topics_path))?;
        assignments_writer.flush().map_err(io_err(&assignments_path))?;
        log::warn!("topics: empty corpus, emitting headers only");
        return Ok(vec![topics_path, assignments_path]);
    }

    let fit = fit_corpus(&docs, &config.topics.model_config())?;
    for (topic, terms) in fit.fitted.label_export(config.topics.export_top) {
        topics_writer.serialize((topic, terms.join(" ")))?;
    }
    topics_writer.flush().map_err(io_err(&topics_path))?;

    let mut assignments = fit.fitted.assign_fitted();
    assignments.sort_by(|a, b| a.article_id.cmp(&b.article_id));
    for assignment in assignments {
        assignments_writer.serialize(AssignmentRow {
            article_id: assignment.article_id,
            topic: assignment.topic,
            weight: assignment.weight,
        })?;
    }
    assignments_writer.flush().map_err(io_err(&assignments_path))?;

    let model_path = out_path(config, "topics_model.json");
    fit.fitted.save(&model_path)?;
    Ok(vec![topics_path, assignments_path, model_path])
}

// ---------------------------------------------------------------------
// stats
// ---------------------------------------------------------------------

/// Pinned column set of comparisons.csv.
#[derive(Debug, Serialize, Deserialize)]
pub struct ComparisonCsvRow {
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
}

impl From<&ComparisonRow> for ComparisonCsvRow {
    fn from(row: &ComparisonRow) -> Self {
        ComparisonCsvRow {
            metric: row.metric.clone(),
            tier: row.tier.clone(),
            topic: row.topic,
            period: row.period.clone(),
            p_a: row.p_a,
            p_b: row.p_b,
            diff: row.diff,
            ci_low: row.ci_low,
            ci_high: row.ci_high,
            z: row.z,
            n_a: row.n_a,
            n_b: row.n_b,
        }
    }
}

pub fn read_matches(path: &Path) -> Result<Vec<MatchCsvRow>, PipelineError> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for row in reader.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

struct ArticleCounts {
    outlet_is_a: bool,
    period: String,
    tier: SimilarityTier,
    topic: Option<u32>,
    counts: FeatureCounts,
}

fn collect_article_counts(config: &RunConfig) -> Result<Vec<ArticleCounts>, PipelineError> {
    let matches = read_matches(&out_path(config, "matches.csv"))?;
    let match_of: BTreeMap<&str, &MatchCsvRow> =
        matches.iter().map(|row| (row.article_id.as_str(), row)).collect();

    let assignments_path = out_path(config, "assignments.csv");
    let topic_of: BTreeMap<String, u32> = if assignments_path.exists() {
        let mut reader = csv::Reader::from_path(&assignments_path)?;
        let mut map = BTreeMap::new();
        for row in reader.deserialize() {
            let row: AssignmentRow = row?;
            map.insert(row.article_id, row.topic);
        }
        map
    } else {
        BTreeMap::new()
    };

    let mut by_article: BTreeMap<String, Vec<AnnotatedSentence>> = BTreeMap::new();
    for sentence in read_spans(&out_path(config, "spans.jsonl"))? {
        by_article.entry(sentence.sentence_id.article_id.clone()).or_default().push(sentence);
    }

    let mut articles = Vec::new();
    for (article_id, sentences) in by_article {
        let Some(row) = match_of.get(article_id.as_str()) else {
            log::warn!("article {article_id} has spans but no match record; skipped");
            continue;
        };
        let Some(tier) = SimilarityTier::from_label(&row.tier) else {
            continue;
        };
        let tier = match tier {
            SimilarityTier::Unmatched if config.stats.unmatched_as_low => SimilarityTier::Low,
            SimilarityTier::Unmatched => continue,
            t => t,
        };
        let day: chrono::NaiveDate = row
            .day
            .parse()
            .map_err(|_| PipelineError::BadConfig { reason: format!("bad day {}", row.day) })?;
        let Some(period) = config.period_of(day) else {
            continue;
        };
        let outlet_is_a = row.outlet == config.outlets.0.as_str();
        let topic = topic_of.get(&article_id).copied();
        let stratum = Stratum {
            outlet: if outlet_is_a { config.outlets.0.clone() } else { config.outlets.1.clone() },
            tier: TierScope::One(tier),
            topic,
            period: period.to_string(),
        };
        let mut counts = FeatureCounts::zero(stratum);
        for sentence in &sentences {
            counts.accumulate(&sentence.to_counts());
        }
        articles.push(ArticleCounts {
            outlet_is_a,
            period: period.to_string(),
            tier,
            topic,
            counts,
        });
    }
    Ok(articles)
}

fn run_stats(config: &RunConfig, manifest: &mut RunManifest) -> Result<Vec<PathBuf>, PipelineError> {
    let articles = collect_article_counts(config)?;
    let opts = CompareOptions {
        bootstrap_reps: config.stats.bootstrap,
        seed: config.stats.seed,
        basis: config.stats.appeal_basis,
        low_n_threshold: config.stats.low_n_threshold,
    };

    let select = |period: &str,
                  scope: TierScope,
                  topic: Option<u32>,
                  side_a: bool|
     -> Vec<FeatureCounts> {
        articles
            .iter()
            .filter(|a| {
                a.outlet_is_a == side_a
                    && a.period == period
                    && match scope {
                        TierScope::All => true,
                        TierScope::One(t) => a.tier == t,
                    }
                    && (topic.is_none() || a.topic == topic)
            })
            .map(|a| a.counts.clone())
            .collect()
    };

    let junk: BTreeSet<u32> = config.topics.junk_topics.iter().copied().collect();
    let mut rows: Vec<ComparisonRow> = Vec::new();
    for period in &config.periods {
        let period = period.to_string();
        let scopes = [
            TierScope::All,
            TierScope::One(SimilarityTier::Low),
            TierScope::One(SimilarityTier::Mid),
            TierScope::One(SimilarityTier::High),
        ];
        for scope in scopes {
            let a = select(&period, scope, None, true);
            let b = select(&period, scope, None, false);
            if a.is_empty() && b.is_empty() {
                continue;
            }
            for metric in MetricKey::funnel() {
                rows.push(compare(metric, scope, None, &period, &a, &b, &opts));
            }
        }
        if config.stats.by_topic {
            for topic in 0..config.topics.k as u32 {
                if junk.contains(&topic) {
                    continue;
                }
                let a = select(&period, TierScope::All, Some(topic), true);
                let b = select(&period, TierScope::All, Some(topic), false);
                if a.is_empty() && b.is_empty() {
                    continue;
                }
                for metric in MetricKey::funnel() {
                    rows.push(compare(metric, TierScope::All, Some(topic), &period, &a, &b, &opts));
                }
            }
        }
    }

    let low_n = rows.iter().filter(|r| r.low_n && r.computable()).count();
    if low_n > 0 {
        manifest.warn(format!(
            "{low_n} of {} comparison rows have denominators below {}",
            rows.len(),
            config.stats.low_n_threshold
        ));
    }

    let comparisons_path = out_path(config, "comparisons.csv");
    let mut writer = csv_writer(
        &comparisons_path,
        &[
            "metric", "tier", "topic", "period", "p_a", "p_b", "diff", "ci_low", "ci_high", "z",
            "n_a", "n_b",
        ],
    )?;
    for row in &rows {
        writer.serialize(ComparisonCsvRow::from(row))?;
    }
    writer.flush().map_err(io_err(&comparisons_path))?;

    let store = CorpusStore::open(&config.data_dir)?;
    let stats_path = out_path(config, "corpus_stats.csv");
    let mut writer = csv_writer(&stats_path, &["period", "outlet", "articles", "sentences"])?;
    for period in &config.periods {
        let stats = store.stats(*period)?;
        for row in stats.rows {
            writer.serialize((row.period, row.outlet.as_str().to_string(), row.articles, row.sentences))?;
        }
    }
    writer.flush().map_err(io_err(&stats_path))?;

    Ok(vec![comparisons_path, stats_path])
}

// ---------------------------------------------------------------------
// distinct
// ---------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
pub struct ExpertSpanRow {
    pub key: String,
    pub count_a: u64,
    pub count_b: u64,
    pub delta: f64,
    pub variance: f64,
    pub z: f64,
}

fn run_distinct(config: &RunConfig) -> Result<Vec<PathBuf>, PipelineError> {
    let store = CorpusStore::open(&config.data_dir)?;
    let mut outlet_of: BTreeMap<String, bool> = BTreeMap::new();
    let [outlet_a, outlet_b] = outlet_pair(config);
    for period in &config.periods {
        for article in store.articles_in(outlet_a, *period)? {
            outlet_of.insert(article.id, true);
        }
        for article in store.articles_in(outlet_b, *period)? {
            outlet_of.insert(article.id, false);
        }
    }

    let sentences = read_spans(&out_path(config, "spans.jsonl"))?;
    let filter = if config.distinct.all_source_types {
        SourceFilter::AllTypes
    } else {
        SourceFilter::ExpertOnly
    };
    let side = |want_a: bool| -> Vec<&AnnotatedSentence> {
        sentences
            .iter()
            .filter(|s| outlet_of.get(&s.sentence_id.article_id).copied() == Some(want_a))
            .collect()
    };
    let counts_a: SpanCounts =
        count_source_spans(side(true).into_iter(), config.outlets.0.clone(), filter);
    let counts_b: SpanCounts =
        count_source_spans(side(false).into_iter(), config.outlets.1.clone(), filter);
    let ranked = weighted_log_odds(&counts_a, &counts_b, config.distinct.alpha0);

    let path = out_path(config, "expert_spans.csv");
    let mut writer =
        csv_writer(&path, &["key", "count_a", "count_b", "delta", "variance", "z"])?;
    for r in &ranked {
        writer.serialize(ExpertSpanRow {
            key: r.key.clone(),
            count_a: r.count_i,
            count_b: r.count_j,
            delta: r.delta,
            variance: r.variance,
            z: r.z,
        })?;
    }
    writer.flush().map_err(io_err(&path))?;
    Ok(vec![path])
}
