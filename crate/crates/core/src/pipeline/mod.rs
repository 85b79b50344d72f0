//! End-to-end orchestration: the analysis stages as a hash-gated DAG.
//!
//! Stages execute in dependency order, each gated on a fingerprint of its
//! configuration and upstream artifacts. A rerun with identical inputs
//! re-executes nothing. Requesting a stage whose upstream outputs are
//! missing fails fast naming the missing stage; a lock file enforces one
//! run per data directory.

mod config;
mod manifest;
mod report;
mod stages;

pub use config::{
    AnnotationConfig, DistinctConfig, EmbeddingConfig, IngestConfig, InputSpec, MatchConfig,
    RunConfig, StatsConfig, TopicsSection,
};
pub use manifest::{hash_file, Fingerprint, RunLock, RunManifest, StageRecord};

use thiserror::Error;

use crate::annotate::AnnotateError;
use crate::corpus::CorpusError;
use crate::matcher::{EmbedError, MatchError};
use crate::topics::TopicsError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid run config: {reason}")]
    BadConfig { reason: String },
    #[error("pipeline I/O failure at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt manifest at {path}: {reason}")]
    CorruptManifest { path: String, reason: String },
    #[error("another run holds the lock at {path}")]
    Locked { path: String },
    #[error("stage `{requested}` requires `{missing}` to run first")]
    MissingUpstream { requested: String, missing: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Annotate(#[from] AnnotateError),
    #[error(transparent)]
    Topics(#[from] TopicsError),
    #[error("CSV failure: {0}")]
    Csv(#[from] csv::Error),
}

/// The pipeline stages in canonical execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Ingest,
    Segment,
    Match,
    Annotate,
    Parse,
    Topics,
    Stats,
    Distinct,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::Ingest,
        Stage::Segment,
        Stage::Match,
        Stage::Annotate,
        Stage::Parse,
        Stage::Topics,
        Stage::Stats,
        Stage::Distinct,
        Stage::Report,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Segment => "segment",
            Stage::Match => "match",
            Stage::Annotate => "annotate",
            Stage::Parse => "parse",
            Stage::Topics => "topics",
            Stage::Stats => "stats",
            Stage::Distinct => "distinct",
            Stage::Report => "report",
        }
    }

    pub fn from_label(s: &str) -> Option<Stage> {
        Stage::ALL.into_iter().find(|stage| stage.label() == s)
    }

    /// Upstream stages whose outputs this stage consumes.
    pub fn deps(self, config: &RunConfig) -> Vec<Stage> {
        match self {
            Stage::Ingest => vec![],
            Stage::Segment => vec![Stage::Ingest],
            Stage::Match => vec![Stage::Ingest],
            Stage::Annotate => vec![Stage::Segment],
            Stage::Parse => vec![Stage::Annotate],
            Stage::Topics => vec![Stage::Ingest],
            Stage::Stats => {
                let mut deps = vec![Stage::Parse, Stage::Match];
                if config.stats.by_topic {
                    deps.push(Stage::Topics);
                }
                deps
            }
            Stage::Distinct => vec![Stage::Parse],
            Stage::Report => {
                let mut deps = vec![Stage::Stats, Stage::Distinct, Stage::Match];
                if config.stats.by_topic {
                    deps.push(Stage::Topics);
                }
                deps
            }
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

pub struct RunOutcome {
    pub manifest: RunManifest,
    /// Stages actually executed (not skipped) this run, in order.
    pub executed: Vec<Stage>,
}

/// Run the requested stages (all of them when `stages` is empty) in
/// dependency order. Each stage is idempotent: unchanged fingerprints and
/// outputs are skipped.
pub fn run(config: &RunConfig, stages: &[Stage], stub: bool) -> Result<RunOutcome, PipelineError> {
    config.validate()?;
    std::fs::create_dir_all(&config.data_dir).map_err(|e| PipelineError::Io {
        path: config.data_dir.display().to_string(),
        source: e,
    })?;
    let _lock = RunLock::acquire(&config.data_dir)?;
    let mut manifest = RunManifest::load_or_default(&config.data_dir)?;
    let requested: Vec<Stage> = if stages.is_empty() {
        Stage::ALL.to_vec()
    } else {
        Stage::ALL.into_iter().filter(|s| stages.contains(s)).collect()
    };

    let mut executed = Vec::new();
    for stage in requested {
        // Walk the full upstream closure and name the earliest missing
        // stage, so `stats` with a cold store points at `annotate`, not at
        // some intermediate artifact.
        let mut missing: Option<Stage> = None;
        let mut frontier = stage.deps(config);
        let mut seen = std::collections::BTreeSet::new();
        while let Some(dep) = frontier.pop() {
            if !seen.insert(dep) {
                continue;
            }
            frontier.extend(dep.deps(config));
            if !manifest.outputs_exist(&config.data_dir, dep.label())
                && missing.map_or(true, |m| dep < m)
            {
                missing = Some(dep);
            }
        }
        if let Some(dep) = missing {
            return Err(PipelineError::MissingUpstream {
                requested: stage.label().to_string(),
                missing: dep.label().to_string(),
            });
        }
        let fingerprint = stages::fingerprint(stage, config, stub, &manifest)?;
        if manifest.is_current(&config.data_dir, stage.label(), &fingerprint)? {
            log::info!("stage {stage}: up to date, skipped");
            continue;
        }
        log::info!("stage {stage}: running");
        let outputs = stages::execute(stage, config, stub, &mut manifest)?;
        manifest.record_stage(&config.data_dir, stage.label(), fingerprint, &outputs)?;
        manifest.save(&config.data_dir)?;
        executed.push(stage);
    }
    manifest.save(&config.data_dir)?;
    Ok(RunOutcome { manifest, executed })
}
