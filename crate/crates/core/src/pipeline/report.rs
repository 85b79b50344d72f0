//! Final report bundle: plot-ready CSVs plus a machine-readable index.
//!
//! Figure rendering is out of scope; these files carry the data behind the
//! figure types (diverging bars per metric and tier, the similarity
//! histogram, the per-topic difference matrix, and the expert-span tables).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::manifest::hash_file;
use super::stages::{out_path, ComparisonCsvRow, ExpertSpanRow};
use super::{PipelineError, RunConfig, RunManifest};

fn report_path(config: &RunConfig, name: &str) -> PathBuf {
    config.data_dir.join("report").join(name)
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> PipelineError + '_ {
    move |e| PipelineError::Io { path: path.display().to_string(), source: e }
}

fn csv_writer(path: &Path, headers: &[&str]) -> Result<csv::Writer<fs::File>, PipelineError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    writer.write_record(headers)?;
    Ok(writer)
}

fn read_comparisons(path: &Path) -> Result<Vec<ComparisonCsvRow>, PipelineError> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for row in reader.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

const COMPARI_HEADERS: [&str; 11] = [
    "metric", "tier", "period", "p_a", "p_b", "diff", "ci_low", "ci_high", "z", "n_a", "n_b",
];

#[derive(Serialize)]
struct MetricBarRow<'a> {
    metric: &'a str,
    tier: &'a str,
    period: &'a str,
    p_a: Option<f64>,
    p_b: Option<f64>,
    diff: Option<f64>,
    ci_low: Option<f64>,
    ci_high: Option<f64>,
    z: Option<f64>,
    n_a: u64,
    n_b: u64,
}

fn write_metric_bars(
    path: &Path,
    rows: &[ComparisonCsvRow],
    keep: impl Fn(&str) -> bool,
) -> Result<(), PipelineError> {
    let mut writer = csv_writer(path, &COMPARI_HEADERS)?;
    for row in rows {
        if row.topic.is_none() && keep(&row.metric) {
            writer.serialize(MetricBarRow {
                metric: &row.metric,
                tier: &row.tier,
                period: &row.period,
                p_a: row.p_a,
                p_b: row.p_b,
                diff: row.diff,
                ci_low: row.ci_low,
                ci_high: row.ci_high,
                z: row.z,
                n_a: row.n_a,
                n_b: row.n_b,
            })?;
        }
    }
    writer.flush().map_err(io_err(path))?;
    Ok(())
}

#[derive(Serialize)]
struct ByTopicRow {
    period: String,
    topic: u32,
    top_terms: String,
    diff_fact_given_sentence: Option<f64>,
    diff_appeal_given_fact: Option<f64>,
    diff_expert_given_source: Option<f64>,
}

#[derive(Debug, Serialize)]
struct FileEntry {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct ReportIndex {
    files: Vec<FileEntry>,
    annotation_coverage: f64,
    parse_error_rate: f64,
    warnings: Vec<String>,
}

pub fn run_report(
    config: &RunConfig,
    manifest: &mut RunManifest,
) -> Result<Vec<PathBuf>, PipelineError> {
    let comparisons = read_comparisons(&out_path(config, "comparisons.csv"))?;
    let mut outputs = Vec::new();

    // Fig style: difference in factuality and appeals, per tier.
    let key_path = report_path(config, "key_probabilities.csv");
    write_metric_bars(&key_path, &comparisons, |metric| {
        matches!(metric, "fact_given_sentence" | "appeal_given_fact" | "named_given_source")
    })?;
    outputs.push(key_path);

    // Fig style: difference in appeal source types.
    let source_path = report_path(config, "source_types.csv");
    write_metric_bars(&source_path, &comparisons, |m| m.starts_with("type_given_source:"))?;
    outputs.push(source_path);

    // Fig style: difference in appeal characteristics.
    let appeal_path = report_path(config, "appeal_characteristics.csv");
    write_metric_bars(&appeal_path, &comparisons, |m| {
        m.starts_with("quote_share:") || m.starts_with("attr_given_appeal:")
    })?;
    outputs.push(appeal_path);

    // Similarity histogram data (copied from the match stage output).
    let hist_src = out_path(config, "similarity_histogram.csv");
    let hist_dst = report_path(config, "similarity_histogram.csv");
    if let Some(parent) = hist_dst.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::copy(&hist_src, &hist_dst).map_err(io_err(&hist_src))?;
    outputs.push(hist_dst);

    // Per-topic difference matrix.
    let terms_of: BTreeMap<u32, String> = {
        let topics_path = out_path(config, "topics.csv");
        if topics_path.exists() {
            let mut reader = csv::Reader::from_path(&topics_path)?;
            let mut map = BTreeMap::new();
            for row in reader.deserialize() {
                let (topic, terms): (u32, String) = row?;
                map.insert(topic, terms);
            }
            map
        } else {
            BTreeMap::new()
        }
    };
    let mut by_topic: BTreeMap<(String, u32), [Option<f64>; 3]> = BTreeMap::new();
    for row in &comparisons {
        let Some(topic) = row.topic else { continue };
        let slot = match row.metric.as_str() {
            "fact_given_sentence" => 0,
            "appeal_given_fact" => 1,
            "type_given_source:expert" => 2,
            _ => continue,
        };
        by_topic.entry((row.period.clone(), topic)).or_default()[slot] = row.diff;
    }
    let topic_path = report_path(config, "by_topic.csv");
    let mut writer = csv_writer(
        &topic_path,
        &[
            "period",
            "topic",
            "top_terms",
            "diff_fact_given_sentence",
            "diff_appeal_given_fact",
            "diff_expert_given_source",
        ],
    )?;
    for ((period, topic), diffs) in by_topic {
        writer.serialize(ByTopicRow {
            period,
            topic,
            top_terms: terms_of.get(&topic).cloned().unwrap_or_default(),
            diff_fact_given_sentence: diffs[0],
            diff_appeal_given_fact: diffs[1],
            diff_expert_given_source: diffs[2],
        })?;
    }
    writer.flush().map_err(io_err(&topic_path))?;
    outputs.push(topic_path);

    // Expert span tables: most frequent and most distinctive per outlet.
    let expert_rows: Vec<ExpertSpanRow> = {
        let mut reader = csv::Reader::from_path(out_path(config, "expert_spans.csv"))?;
        let mut rows = Vec::new();
        for row in reader.deserialize() {
            rows.push(row?);
        }
        rows
    };
    let k = config.distinct.top_k;
    let frequent_path = report_path(config, "expert_spans_frequent.csv");
    let mut writer = csv_writer(&frequent_path, &["outlet", "rank", "key", "count"])?;
    for (outlet, count_of) in [
        (config.outlets.0.as_str(), &(|r: &ExpertSpanRow| r.count_a) as &dyn Fn(&ExpertSpanRow) -> u64),
        (config.outlets.1.as_str(), &(|r: &ExpertSpanRow| r.count_b)),
    ] {
        let mut rows: Vec<(&str, u64)> =
            expert_rows.iter().map(|r| (r.key.as_str(), count_of(r))).filter(|(_, c)| *c > 0).collect();
        rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        for (rank, (key, count)) in rows.into_iter().take(k).enumerate() {
            writer.serialize((outlet, rank + 1, key, count))?;
        }
    }
    writer.flush().map_err(io_err(&frequent_path))?;
    outputs.push(frequent_path);

    let distinctive_path = report_path(config, "expert_spans_distinctive.csv");
    let mut writer =
        csv_writer(&distinctive_path, &["outlet", "rank", "key", "delta", "variance", "z"])?;
    let positive: Vec<&ExpertSpanRow> = expert_rows.iter().filter(|r| r.z > 0.0).collect();
    for (rank, row) in positive.into_iter().take(k).enumerate() {
        writer.serialize((
            config.outlets.0.as_str(),
            rank + 1,
            &row.key,
            row.delta,
            row.variance,
            row.z,
        ))?;
    }
    let mut negative: Vec<&ExpertSpanRow> = expert_rows.iter().filter(|r| r.z < 0.0).collect();
    negative.sort_by(|a, b| a.z.partial_cmp(&b.z).expect("finite z").then_with(|| a.key.cmp(&b.key)));
    for (rank, row) in negative.into_iter().take(k).enumerate() {
        writer.serialize((
            config.outlets.1.as_str(),
            rank + 1,
            &row.key,
            row.delta,
            row.variance,
            row.z,
        ))?;
    }
    writer.flush().map_err(io_err(&distinctive_path))?;
    outputs.push(distinctive_path);

    // Machine-readable index over the bundle.
    let mut files = Vec::new();
    for path in &outputs {
        files.push(FileEntry {
            path: path
                .strip_prefix(&config.data_dir)
                .unwrap_or(path)
                .to_string_lossy()
                .replace('\\', "/"),
            sha256: hash_file(path)?,
        });
    }
    files.sort_by(|a, b| a.path.cmp(&b.path));
    let index = ReportIndex {
        files,
        annotation_coverage: manifest.annotation_coverage.unwrap_or(0.0),
        parse_error_rate: manifest.parse_error_rate.unwrap_or(0.0),
        warnings: manifest.warnings.clone(),
    };
    let index_path = report_path(config, "index.json");
    let json = serde_json::to_string_pretty(&index).expect("index serializes");
    fs::write(&index_path, json).map_err(io_err(&index_path))?;
    outputs.push(index_path);

    Ok(outputs)
}

#[derive(Debug, Deserialize)]
#[allow(dead_code)]
struct TopicsCsvRow {
    topic: u32,
    top_terms: String,
}
