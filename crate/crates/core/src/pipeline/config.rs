//! Run configuration, loaded from a TOML file.
//!
//! Relative paths (data_dir, input files) resolve against the config file's
//! directory. Secrets never live in the file: the embedding and annotation
//! API keys come from `EMBED_API_KEY` / `ANNOTATE_API_KEY`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusError, DateRange, OutletId};
use crate::matcher::TierBounds;
use crate::metrics::AppealBasis;
use crate::topics::TopicModelConfig;

use super::PipelineError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSpec {
    pub outlet: OutletId,
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestConfig {
    pub min_body_chars: usize,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig { min_body_chars: 280 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchConfig {
    pub low_max: f64,
    pub high_min: f64,
    pub bin_width: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig { low_max: 0.3, high_min: 0.6, bin_width: 0.05 }
    }
}

impl MatchConfig {
    pub fn bounds(&self) -> TierBounds {
        TierBounds { low_max: self.low_max, high_min: self.high_min }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingConfig {
    pub model: String,
    pub endpoint: String,
    pub batch_size: usize,
    pub max_retries: u32,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            model: "text-embedding-3-small".to_string(),
            endpoint: "https://api.openai.com/v1/embeddings".to_string(),
            batch_size: 64,
            max_retries: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnotationConfig {
    pub endpoint: String,
    pub batch_size: usize,
    pub max_retries: u32,
    /// Coverage below this fraction records a warning in the manifest.
    pub coverage_floor: f64,
}

impl Default for AnnotationConfig {
    fn default() -> Self {
        AnnotationConfig {
            endpoint: String::new(),
            batch_size: 64,
            max_retries: 3,
            coverage_floor: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StatsConfig {
    pub bootstrap: u32,
    pub seed: u64,
    pub by_topic: bool,
    pub low_n_threshold: u64,
    pub appeal_basis: AppealBasis,
    /// Fold Unmatched articles into the Low tier instead of excluding them.
    pub unmatched_as_low: bool,
}

impl Default for StatsConfig {
    fn default() -> Self {
        StatsConfig {
            bootstrap: 1000,
            seed: 7,
            by_topic: false,
            low_n_threshold: 30,
            appeal_basis: AppealBasis::SpanLevel,
            unmatched_as_low: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DistinctConfig {
    pub alpha0: f64,
    pub top_k: usize,
    pub all_source_types: bool,
}

impl Default for DistinctConfig {
    fn default() -> Self {
        DistinctConfig { alpha0: 1.0, top_k: 20, all_source_types: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TopicsSection {
    pub k: usize,
    /// Defaults to 50/k when absent.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub min_doc_freq: usize,
    pub max_doc_ratio: f64,
    /// Topic indices excluded from per-topic strata after human inspection.
    pub junk_topics: Vec<u32>,
    /// Terms per topic in the labeling export.
    pub export_top: usize,
}

impl Default for TopicsSection {
    fn default() -> Self {
        TopicsSection {
            k: 30,
            alpha: None,
            beta: 0.01,
            iterations: 1000,
            burn_in: 500,
            seed: 7,
            min_doc_freq: 5,
            max_doc_ratio: 0.5,
            junk_topics: Vec::new(),
            export_top: 15,
        }
    }
}

impl TopicsSection {
    pub fn model_config(&self) -> TopicModelConfig {
        TopicModelConfig {
            k: self.k,
            alpha: self.alpha.unwrap_or(50.0 / self.k as f64),
            beta: self.beta,
            iterations: self.iterations,
            burn_in: self.burn_in,
            seed: self.seed,
            min_doc_freq: self.min_doc_freq,
            max_doc_ratio: self.max_doc_ratio,
        }
    }
}

/// The complete, validated run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub data_dir: PathBuf,
    pub periods: Vec<DateRange>,
    pub outlets: (OutletId, OutletId),
    #[serde(default)]
    pub inputs: Vec<InputSpec>,
    #[serde(default)]
    pub ingest: IngestConfig,
    #[serde(rename = "match", default)]
    pub matching: MatchConfig,
    #[serde(default)]
    pub embedding: EmbeddingConfig,
    #[serde(default)]
    pub annotation: AnnotationConfig,
    #[serde(default)]
    pub stats: StatsConfig,
    #[serde(default)]
    pub distinct: DistinctConfig,
    #[serde(default)]
    pub topics: TopicsSection,
}

#[derive(Deserialize)]
struct RawConfig {
    data_dir: PathBuf,
    periods: Vec<String>,
    outlets: Vec<String>,
    #[serde(default)]
    inputs: Vec<RawInput>,
    #[serde(default)]
    ingest: IngestConfig,
    #[serde(rename = "match", default)]
    r#match: MatchConfig,
    #[serde(default)]
    embedding: EmbeddingConfig,
    #[serde(default)]
    annotation: AnnotationConfig,
    #[serde(default)]
    stats: StatsConfig,
    #[serde(default)]
    distinct: DistinctConfig,
    #[serde(default)]
    topics: TopicsSection,
}

#[derive(Deserialize)]
struct RawInput {
    outlet: String,
    files: Vec<PathBuf>,
}

impl RunConfig {
    /// Parse and validate a config file, resolving relative paths against
    /// its directory.
    pub fn load(path: &Path) -> Result<RunConfig, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let raw: RawConfig = toml::from_str(&text).map_err(|e| PipelineError::BadConfig {
            reason: format!("{}: {e}", path.display()),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        RunConfig::from_raw(raw, base)
    }

    fn from_raw(raw: RawConfig, base: &Path) -> Result<RunConfig, PipelineError> {
        let bad = |reason: String| PipelineError::BadConfig { reason };
        if raw.outlets.len() != 2 {
            return Err(bad(format!("exactly two outlets required, got {}", raw.outlets.len())));
        }
        let outlet_a = OutletId::new(&raw.outlets[0]).map_err(config_err)?;
        let outlet_b = OutletId::new(&raw.outlets[1]).map_err(config_err)?;
        if outlet_a == outlet_b {
            return Err(bad(format!("outlets must be distinct, got `{outlet_a}` twice")));
        }
        if raw.periods.is_empty() {
            return Err(bad("at least one period required".to_string()));
        }
        let periods = raw
            .periods
            .iter()
            .map(|p| DateRange::parse(p))
            .collect::<Result<Vec<_>, _>>()
            .map_err(config_err)?;
        let resolve = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base.join(p) };
        let inputs = raw
            .inputs
            .into_iter()
            .map(|i| {
                Ok(InputSpec {
                    outlet: OutletId::new(&i.outlet).map_err(config_err)?,
                    files: i.files.iter().map(&resolve).collect(),
                })
            })
            .collect::<Result<Vec<_>, PipelineError>>()?;
        let config = RunConfig {
            data_dir: resolve(&raw.data_dir),
            periods,
            outlets: (outlet_a, outlet_b),
            inputs,
            ingest: raw.ingest,
            matching: raw.r#match,
            embedding: raw.embedding,
            annotation: raw.annotation,
            stats: raw.stats,
            distinct: raw.distinct,
            topics: raw.topics,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |reason: String| PipelineError::BadConfig { reason };
        self.matching
            .bounds()
            .validate()
            .map_err(|e| bad(e.to_string()))?;
        for input in &self.inputs {
            if input.outlet != self.outlets.0 && input.outlet != self.outlets.1 {
                return Err(bad(format!(
                    "input outlet `{}` is not one of the configured outlets",
                    input.outlet
                )));
            }
        }
        if self.topics.k < 2 {
            return Err(bad(format!("topics.k must be at least 2, got {}", self.topics.k)));
        }
        self.topics.model_config().validate().map_err(|e| bad(e.to_string()))?;
        if !(self.distinct.alpha0 > 0.0) {
            return Err(bad(format!("distinct.alpha0 must be positive, got {}", self.distinct.alpha0)));
        }
        if !(self.matching.bin_width > 0.0) {
            return Err(bad(format!("match.bin_width must be positive, got {}", self.matching.bin_width)));
        }
        Ok(())
    }

    /// True when `day` falls inside any configured period.
    pub fn period_of(&self, day: chrono::NaiveDate) -> Option<&DateRange> {
        self.periods.iter().find(|p| p.contains(day))
    }
}

fn config_err(e: CorpusError) -> PipelineError {
    PipelineError::BadConfig { reason: e.to_string() }
}
