//! Gateway to the sentence annotation endpoint.
//!
//! Sentences go out in batches and come back with inline tags. Every
//! accepted response must untag back to its input (the alignment contract);
//! misaligned generations are retried once and then excluded rather than
//! fuzzily realigned, since silent realignment would corrupt span offsets.
//! Aligned responses are cached by content hash of the sentence text, so a
//! rerun over identical input never touches the network.

mod http;
mod stub;

pub use http::{HttpAnnotator, ANNOTATE_API_KEY_VAR};
pub use stub::{stub_annotate, StubAnnotator};

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::parser::{align, SentenceId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationRequest {
    pub sentence_id: SentenceId,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationStatus {
    Ok,
    Misaligned,
    EndpointError,
}

/// One annotated sentence. For `Misaligned` the rejected model output is
/// kept for diagnostics; for `EndpointError` the tagged text is just the
/// input. Only `Ok` responses enter statistics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationResponse {
    pub sentence_id: SentenceId,
    pub tagged_text: String,
    pub status: AnnotationStatus,
}

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("annotation endpoint failed after {attempts} attempts: {reason}")]
    Endpoint { attempts: u32, reason: String },
    #[error("endpoint returned {got} annotations for {want} sentences")]
    CountMismatch { got: usize, want: usize },
    #[error("annotation cache I/O failure at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl AnnotateError {
    fn io(path: &Path, source: std::io::Error) -> AnnotateError {
        AnnotateError::Io { path: path.display().to_string(), source }
    }
}

/// An annotation backend: returns one tagged sentence per input, in order.
pub trait Annotator: Send + Sync {
    fn id(&self) -> &str;
    fn annotate_batch(&self, texts: &[String]) -> Result<Vec<String>, AnnotateError>;
}

fn content_key(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

#[derive(Serialize, Deserialize)]
struct CacheRecord {
    key: String,
    tagged: String,
}

/// Append-only cache of aligned annotations, keyed by sentence content hash.
pub struct AnnotationCache {
    path: PathBuf,
    entries: HashMap<String, String>,
}

impl AnnotationCache {
    pub fn open(data_dir: &Path) -> Result<AnnotationCache, AnnotateError> {
        let dir = data_dir.join("cache");
        fs::create_dir_all(&dir).map_err(|e| AnnotateError::io(&dir, e))?;
        let path = dir.join("annotations.jsonl");
        let mut entries = HashMap::new();
        if path.exists() {
            let file = fs::File::open(&path).map_err(|e| AnnotateError::io(&path, e))?;
            for line in BufReader::new(file).lines() {
                let line = line.map_err(|e| AnnotateError::io(&path, e))?;
                if line.is_empty() {
                    continue;
                }
                if let Ok(record) = serde_json::from_str::<CacheRecord>(&line) {
                    entries.insert(record.key, record.tagged);
                }
            }
        }
        Ok(AnnotationCache { path, entries })
    }

    pub fn get(&self, text: &str) -> Option<&String> {
        self.entries.get(&content_key(text))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn put(&mut self, text: &str, tagged: String) -> Result<(), AnnotateError> {
        let key = content_key(text);
        let record = CacheRecord { key: key.clone(), tagged };
        let line = serde_json::to_string(&record).expect("cache record serializes");
        let mut file = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| AnnotateError::io(&self.path, e))?;
        writeln!(file, "{line}").map_err(|e| AnnotateError::io(&self.path, e))?;
        self.entries.insert(key, record.tagged);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GatewayConfig {
    pub batch_size: usize,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig { batch_size: 64 }
    }
}

/// Annotate a list of sentences: one response per request, in request order.
///
/// The cache is consulted first; uncovered sentences go to the annotator in
/// batches. A response failing the alignment check is retried once on its
/// own, then marked `Misaligned`. A failing batch marks all its requests
/// `EndpointError` and the run continues; nothing is dropped silently.
pub fn annotate(
    requests: &[AnnotationRequest],
    annotator: &dyn Annotator,
    cache: &mut AnnotationCache,
    config: &GatewayConfig,
) -> Result<Vec<AnnotationResponse>, AnnotateError> {
    let batch_size = config.batch_size.max(1);
    let mut tagged: Vec<Option<AnnotationResponse>> = vec![None; requests.len()];

    let mut pending: Vec<usize> = Vec::new();
    for (i, req) in requests.iter().enumerate() {
        if let Some(cached) = cache.get(&req.text) {
            tagged[i] = Some(AnnotationResponse {
                sentence_id: req.sentence_id.clone(),
                tagged_text: cached.clone(),
                status: AnnotationStatus::Ok,
            });
        } else {
            pending.push(i);
        }
    }

    for batch in pending.chunks(batch_size) {
        let texts: Vec<String> = batch.iter().map(|&i| requests[i].text.clone()).collect();
        let outputs = match annotator.annotate_batch(&texts) {
            Ok(outputs) if outputs.len() == texts.len() => outputs,
            Ok(outputs) => {
                return Err(AnnotateError::CountMismatch { got: outputs.len(), want: texts.len() })
            }
            Err(err) => {
                log::warn!("annotation batch of {} failed: {err}", texts.len());
                for &i in batch {
                    tagged[i] = Some(AnnotationResponse {
                        sentence_id: requests[i].sentence_id.clone(),
                        tagged_text: requests[i].text.clone(),
                        status: AnnotationStatus::EndpointError,
                    });
                }
                continue;
            }
        };
        for (&i, output) in batch.iter().zip(outputs) {
            tagged[i] = Some(resolve(requests[i].clone(), output, annotator, cache)?);
        }
    }

    Ok(tagged.into_iter().map(|r| r.expect("every request resolved")).collect())
}

fn resolve(
    request: AnnotationRequest,
    output: String,
    annotator: &dyn Annotator,
    cache: &mut AnnotationCache,
) -> Result<AnnotationResponse, AnnotateError> {
    if align(&output, &request.text) {
        cache.put(&request.text, output.clone())?;
        return Ok(AnnotationResponse {
            sentence_id: request.sentence_id,
            tagged_text: output,
            status: AnnotationStatus::Ok,
        });
    }
    // One single-sentence retry before giving up on this sentence.
    log::warn!(
        "misaligned annotation for {:?}/{}; retrying once",
        request.sentence_id.article_id,
        request.sentence_id.index
    );
    match annotator.annotate_batch(std::slice::from_ref(&request.text)) {
        Ok(mut retried) if retried.len() == 1 => {
            let retried = retried.remove(0);
            if align(&retried, &request.text) {
                cache.put(&request.text, retried.clone())?;
                Ok(AnnotationResponse {
                    sentence_id: request.sentence_id,
                    tagged_text: retried,
                    status: AnnotationStatus::Ok,
                })
            } else {
                Ok(AnnotationResponse {
                    sentence_id: request.sentence_id,
                    tagged_text: retried,
                    status: AnnotationStatus::Misaligned,
                })
            }
        }
        _ => Ok(AnnotationResponse {
            sentence_id: request.sentence_id,
            tagged_text: output,
            status: AnnotationStatus::Misaligned,
        }),
    }
}
