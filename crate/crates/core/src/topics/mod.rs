//! LDA topic modeling over article bodies, supplying the per-topic stratum
//! for the comparative statistics.
//!
//! The model is fit once on the pooled two-outlet corpus so topic strata
//! are comparable across outlets; junk topics are excluded downstream via
//! an explicit config list after human inspection of the exported terms.

mod lda;
mod porter;
mod preprocess;

pub use lda::fold_in;
pub use porter::stem;
pub use preprocess::{preprocess, Vocabulary};

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicModelConfig {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub min_doc_freq: usize,
    pub max_doc_ratio: f64,
}

impl Default for TopicModelConfig {
    fn default() -> Self {
        let k = 30;
        TopicModelConfig {
            k,
            alpha: 50.0 / k as f64,
            beta: 0.01,
            iterations: 1000,
            burn_in: 500,
            seed: 7,
            min_doc_freq: 5,
            max_doc_ratio: 0.5,
        }
    }
}

impl TopicModelConfig {
    /// `k = 1` is accepted as the documented degenerate case; production
    /// configs use `k >= 2`.
    pub fn validate(&self) -> Result<(), TopicsError> {
        if self.k < 1 || self.alpha <= 0.0 || self.beta <= 0.0 || self.iterations < 1 {
            return Err(TopicsError::BadConfig(format!(
                "k={}, alpha={}, beta={}, iterations={}",
                self.k, self.alpha, self.beta, self.iterations
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum TopicsError {
    #[error("invalid topic model config: {0}")]
    BadConfig(String),
    #[error("{docs} nonempty documents is fewer than k={k} topics")]
    TooFewDocuments { docs: usize, k: usize },
    #[error("vocabulary is empty after pruning")]
    EmptyVocabulary,
    #[error("term id {term} out of range for vocabulary of {vocab_size}")]
    TermOutOfRange { term: usize, vocab_size: usize },
    #[error("model archive I/O failure at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("unreadable model archive at {path}: {reason}")]
    Archive { path: String, reason: String },
}

/// A fitted topic model: smoothed posterior point estimates plus everything
/// needed to fold in held-out documents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedTopics {
    pub version: u32,
    pub config: TopicModelConfig,
    pub vocabulary: Vec<String>,
    /// K x V; rows sum to 1.
    pub topic_word: Vec<Vec<f64>>,
    /// D x K over the fitted (nonempty) documents; rows sum to 1.
    pub doc_topic: Vec<Vec<f64>>,
    /// Ids of the fitted documents, aligned with `doc_topic` rows.
    pub doc_ids: Vec<String>,
    pub log_likelihood_trace: Vec<f64>,
}

pub const MODEL_ARCHIVE_VERSION: u32 = 1;

/// An article's dominant topic: the argmax of its document-topic row, ties
/// broken by lowest index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicAssignment {
    pub article_id: String,
    pub topic: u32,
    pub weight: f64,
}

/// Outcome of fitting the pooled corpus.
pub struct CorpusFit {
    pub fitted: FittedTopics,
    /// Ids of documents with no tokens after preprocessing, excluded from
    /// fitting and from per-topic strata.
    pub skipped_empty: Vec<String>,
}

/// Preprocess, build the pruned vocabulary, and fit the sampler over
/// (id, body) pairs. Documents must be passed in a stable order for
/// reproducibility; ids must be unique.
pub fn fit_corpus(
    docs: &[(String, String)],
    config: &TopicModelConfig,
) -> Result<CorpusFit, TopicsError> {
    config.validate()?;
    let tokenized: Vec<Vec<String>> =
        docs.iter().map(|(_, body)| preprocess::preprocess(body)).collect();
    let vocabulary = Vocabulary::build(&tokenized, config.min_doc_freq, config.max_doc_ratio);
    if vocabulary.is_empty() {
        return Err(TopicsError::EmptyVocabulary);
    }

    let mut doc_ids = Vec::new();
    let mut term_docs: Vec<Vec<usize>> = Vec::new();
    let mut skipped_empty = Vec::new();
    for ((id, _), tokens) in docs.iter().zip(&tokenized) {
        let ids = vocabulary.map_doc(tokens);
        if ids.is_empty() {
            log::warn!("document {id} empty after preprocessing; skipped in fitting");
            skipped_empty.push(id.clone());
        } else {
            doc_ids.push(id.clone());
            term_docs.push(ids);
        }
    }

    let state = lda::fit(&term_docs, vocabulary.len(), config)?;
    let fitted = FittedTopics {
        version: MODEL_ARCHIVE_VERSION,
        config: config.clone(),
        vocabulary: vocabulary.terms,
        topic_word: state.topic_word(config.beta),
        doc_topic: state.doc_topic(config.alpha),
        doc_ids,
        log_likelihood_trace: state.log_likelihood_trace,
    };
    Ok(CorpusFit { fitted, skipped_empty })
}

/// Fit directly over term-id documents (test/synthetic entry point).
pub fn fit_term_docs(
    docs: &[Vec<usize>],
    vocab: Vocabulary,
    doc_ids: Vec<String>,
    config: &TopicModelConfig,
) -> Result<FittedTopics, TopicsError> {
    let state = lda::fit(docs, vocab.len(), config)?;
    Ok(FittedTopics {
        version: MODEL_ARCHIVE_VERSION,
        config: config.clone(),
        vocabulary: vocab.terms,
        topic_word: state.topic_word(config.beta),
        doc_topic: state.doc_topic(config.alpha),
        doc_ids,
        log_likelihood_trace: state.log_likelihood_trace,
    })
}

fn argmax_lowest_index(row: &[f64]) -> (u32, f64) {
    let mut best = 0usize;
    for (i, &w) in row.iter().enumerate() {
        if w > row[best] {
            best = i;
        }
    }
    (best as u32, row[best])
}

impl FittedTopics {
    /// Dominant-topic assignments for every fitted document.
    pub fn assign_fitted(&self) -> Vec<TopicAssignment> {
        self.doc_ids
            .iter()
            .zip(&self.doc_topic)
            .map(|(id, row)| {
                let (topic, weight) = argmax_lowest_index(row);
                TopicAssignment { article_id: id.clone(), topic, weight }
            })
            .collect()
    }

    /// Dominant topic of a held-out body, folded in with a short seeded
    /// Gibbs pass. `None` when the body has no usable tokens.
    pub fn dominant_topic(&self, article_id: &str, body: &str) -> Option<TopicAssignment> {
        let vocab = Vocabulary::from_terms(self.vocabulary.clone());
        let tokens = vocab.map_doc(&preprocess::preprocess(body));
        if tokens.is_empty() {
            return None;
        }
        let row = lda::fold_in(
            &self.topic_word,
            &tokens,
            self.config.alpha,
            20,
            fold_in_seed(self.config.seed, article_id),
        );
        let (topic, weight) = argmax_lowest_index(&row);
        Some(TopicAssignment { article_id: article_id.to_string(), topic, weight })
    }

    /// Per topic, the `top_n` highest-probability terms (probability
    /// descending, index ascending on ties) for human labeling.
    pub fn label_export(&self, top_n: usize) -> Vec<(usize, Vec<String>)> {
        self.topic_word
            .iter()
            .enumerate()
            .map(|(topic, row)| {
                let mut order: Vec<usize> = (0..row.len()).collect();
                order.sort_by(|&a, &b| {
                    row[b].partial_cmp(&row[a]).expect("finite probability").then(a.cmp(&b))
                });
                (topic, order.into_iter().take(top_n).map(|i| self.vocabulary[i].clone()).collect())
            })
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<(), TopicsError> {
        let json = serde_json::to_string(self)
            .map_err(|e| TopicsError::Archive { path: path.display().to_string(), reason: e.to_string() })?;
        std::fs::write(path, json)
            .map_err(|e| TopicsError::Io { path: path.display().to_string(), source: e })
    }

    pub fn load(path: &Path) -> Result<FittedTopics, TopicsError> {
        let json = std::fs::read_to_string(path)
            .map_err(|e| TopicsError::Io { path: path.display().to_string(), source: e })?;
        let fitted: FittedTopics = serde_json::from_str(&json)
            .map_err(|e| TopicsError::Archive { path: path.display().to_string(), reason: e.to_string() })?;
        if fitted.version != MODEL_ARCHIVE_VERSION {
            return Err(TopicsError::Archive {
                path: path.display().to_string(),
                reason: format!("unsupported archive version {}", fitted.version),
            });
        }
        Ok(fitted)
    }
}

fn fold_in_seed(seed: u64, article_id: &str) -> u64 {
    let digest = Sha256::digest(article_id.as_bytes());
    seed ^ u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}
