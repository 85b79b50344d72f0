//! Title embedding providers and the persistent, content-addressed cache.
//!
//! The cache is keyed by `sha256(model_id || title)` and scoped to a model
//! id so a model upgrade can never silently mix vector spaces. Lookups hit
//! the cache before any network call; fresh vectors are appended to the
//! cache file as they arrive.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::Article;

use super::TitleEmbedding;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("embedding endpoint failed after {attempts} attempts: {reason}; uncovered ids: {uncovered:?}")]
    Endpoint { attempts: u32, reason: String, uncovered: Vec<String> },
    #[error("embedding dimension mismatch: cache has {cached}, endpoint returned {fresh} (model `{model}`)")]
    DimensionMismatch { cached: usize, fresh: usize, model: String },
    #[error("endpoint returned {got} embeddings for {want} inputs")]
    CountMismatch { got: usize, want: usize },
    #[error("embedding cache I/O failure at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt embedding cache record in {path}: {reason}")]
    Corrupt { path: String, reason: String },
}

impl EmbedError {
    fn io(path: &Path, source: std::io::Error) -> EmbedError {
        EmbedError::Io { path: path.display().to_string(), source }
    }
}

/// A provider of title embeddings. Implementations must return one vector
/// per input, in input order, all of one dimension.
pub trait Embedder: Send + Sync {
    fn model_id(&self) -> &str;
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbedError>;
}

/// Cache key: hex sha256 of (model_id, title).
pub fn cache_key(model_id: &str, title: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(model_id.as_bytes());
    hasher.update(b"\x1f");
    hasher.update(title.as_bytes());
    hex(&hasher.finalize())
}

fn hex(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

#[derive(Serialize, Deserialize)]
struct CacheRecord {
    key: String,
    model: String,
    vector: Vec<f64>,
}

/// Append-only on-disk key-value store of embedding vectors.
pub struct EmbeddingCache {
    path: PathBuf,
    entries: HashMap<String, Vec<f64>>,
    /// Dimension of entries for the active model, once known.
    dim: Option<usize>,
    model: String,
}

impl EmbeddingCache {
    /// Open the cache under `data_dir`, loading entries for `model_id`.
    /// Fails fast if cached entries for that model disagree in dimension.
    pub fn open(data_dir: &Path, model_id: &str) -> Result<EmbeddingCache, EmbedError> {
        let dir = data_dir.join("cache");
        fs::create_dir_all(&dir).map_err(|e| EmbedError::io(&dir, e))?;
        let path = dir.join("embeddings.jsonl");
        let mut entries = HashMap::new();
        let mut dim = None;
        if path.exists() {
            let file = fs::File::open(&path).map_err(|e| EmbedError::io(&path, e))?;
            for line in BufReader::new(file).lines() {
                let line = line.map_err(|e| EmbedError::io(&path, e))?;
                if line.is_empty() {
                    continue;
                }
                let record: CacheRecord =
                    serde_json::from_str(&line).map_err(|e| EmbedError::Corrupt {
                        path: path.display().to_string(),
                        reason: e.to_string(),
                    })?;
                if record.model != model_id {
                    continue;
                }
                match dim {
                    None => dim = Some(record.vector.len()),
                    Some(d) if d != record.vector.len() => {
                        return Err(EmbedError::DimensionMismatch {
                            cached: d,
                            fresh: record.vector.len(),
                            model: model_id.to_string(),
                        });
                    }
                    _ => {}
                }
                entries.insert(record.key, record.vector);
            }
        }
        Ok(EmbeddingCache { path, entries, dim, model: model_id.to_string() })
    }

    pub fn get(&self, title: &str) -> Option<&Vec<f64>> {
        self.entries.get(&cache_key(&self.model, title))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Insert a fresh vector, enforcing the one-dimension-per-model rule,
    /// and append it to the cache file.
    pub fn put(&mut self, title: &str, vector: Vec<f64>) -> Result<(), EmbedError> {
        match self.dim {
            None => self.dim = Some(vector.len()),
            Some(d) if d != vector.len() => {
                return Err(EmbedError::DimensionMismatch {
                    cached: d,
                    fresh: vector.len(),
                    model: self.model.clone(),
                });
            }
            _ => {}
        }
        let key = cache_key(&self.model, title);
        let record = CacheRecord { key: key.clone(), model: self.model.clone(), vector };
        let line = serde_json::to_string(&record).expect("cache record serializes");
        let mut file = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| EmbedError::io(&self.path, e))?;
        writeln!(file, "{line}").map_err(|e| EmbedError::io(&self.path, e))?;
        self.entries.insert(key, record.vector);
        Ok(())
    }
}

/// Embed the titles of `articles`, one embedding per article, consulting the
/// cache before any provider call and persisting fresh vectors.
pub fn embed_titles(
    articles: &[Article],
    embedder: &dyn Embedder,
    cache: &mut EmbeddingCache,
    batch_size: usize,
) -> Result<Vec<TitleEmbedding>, EmbedError> {
    assert_eq!(cache.model, embedder.model_id(), "cache opened for a different model");
    let batch_size = batch_size.max(1);

    // Unique uncovered titles, in first-seen order.
    let mut pending: Vec<String> = Vec::new();
    for article in articles {
        if cache.get(&article.title).is_none() && !pending.contains(&article.title) {
            pending.push(article.title.clone());
        }
    }
    for chunk in pending.chunks(batch_size) {
        let vectors = embedder.embed_batch(chunk)?;
        if vectors.len() != chunk.len() {
            return Err(EmbedError::CountMismatch { got: vectors.len(), want: chunk.len() });
        }
        for (title, vector) in chunk.iter().zip(vectors) {
            cache.put(title, vector)?;
        }
    }

    let model_id = embedder.model_id().to_string();
    Ok(articles
        .iter()
        .map(|a| TitleEmbedding {
            article_id: a.id.clone(),
            vector: cache.get(&a.title).expect("just populated").clone(),
            model_id: model_id.clone(),
        })
        .collect())
}

/// Deterministic offline embedder: a bag-of-words hash embedding.
///
/// Each lowercase token hashes to a fixed pseudo-random direction; a title's
/// vector is the normalized token sum, so titles sharing words land near
/// each other. Identical titles get identical vectors on every platform.
pub struct HashEmbedder {
    dim: usize,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        HashEmbedder { dim: 64 }
    }
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Self {
        HashEmbedder { dim: dim.max(1) }
    }

    fn token_direction(&self, token: &str) -> Vec<f64> {
        let digest = Sha256::digest(token.as_bytes());
        // xorshift64* seeded from the token hash; avoids any RNG-crate
        // version sensitivity in golden outputs.
        let mut state = u64::from_le_bytes(digest[..8].try_into().unwrap()) | 1;
        let mut next = || {
            state ^= state >> 12;
            state ^= state << 25;
            state ^= state >> 27;
            let x = state.wrapping_mul(0x2545_F491_4F6C_DD1D);
            // Map the top 53 bits into [-1, 1).
            (x >> 11) as f64 / (1u64 << 52) as f64 - 1.0
        };
        (0..self.dim).map(|_| next()).collect()
    }
}

impl Embedder for HashEmbedder {
    fn model_id(&self) -> &str {
        "hash-bow-64"
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbedError> {
        Ok(texts
            .iter()
            .map(|text| {
                let mut acc = vec![0.0f64; self.dim];
                let mut any = false;
                for token in text
                    .split(|c: char| !c.is_alphanumeric())
                    .filter(|t| !t.is_empty())
                {
                    any = true;
                    for (a, d) in acc.iter_mut().zip(self.token_direction(&token.to_lowercase()))
                    {
                        *a += d;
                    }
                }
                if !any {
                    acc[0] = 1.0;
                }
                let norm = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 0.0 {
                    for a in &mut acc {
                        *a /= norm;
                    }
                } else {
                    acc[0] = 1.0;
                }
                acc
            })
            .collect())
    }
}

/// Remote embedding endpoint client.
///
/// POSTs `{"model": str, "input": [str, ...]}` and expects
/// `{"data": [{"embedding": [f64, ...]}, ...]}` in input order. The API key
/// comes from the `EMBED_API_KEY` environment variable.
pub struct HttpEmbedder {
    endpoint: String,
    model: String,
    max_retries: u32,
    client: reqwest::blocking::Client,
}

pub const EMBED_API_KEY_VAR: &str = "EMBED_API_KEY";

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    input: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    data: Vec<EmbedDatum>,
}

#[derive(Deserialize)]
struct EmbedDatum {
    embedding: Vec<f64>,
}

impl HttpEmbedder {
    pub fn new(endpoint: &str, model: &str, max_retries: u32) -> HttpEmbedder {
        HttpEmbedder {
            endpoint: endpoint.to_string(),
            model: model.to_string(),
            max_retries: max_retries.max(1),
            client: reqwest::blocking::Client::new(),
        }
    }

    fn request(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, String> {
        let mut req = self
            .client
            .post(&self.endpoint)
            .json(&EmbedRequest { model: &self.model, input: texts });
        if let Ok(key) = std::env::var(EMBED_API_KEY_VAR) {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| e.to_string())?;
        if !resp.status().is_success() {
            return Err(format!("status {}", resp.status()));
        }
        let body: EmbedResponse = resp.json().map_err(|e| e.to_string())?;
        Ok(body.data.into_iter().map(|d| d.embedding).collect())
    }
}

impl Embedder for HttpEmbedder {
    fn model_id(&self) -> &str {
        &self.model
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbedError> {
        let mut last = String::new();
        for attempt in 0..self.max_retries {
            match self.request(texts) {
                Ok(vectors) => return Ok(vectors),
                Err(reason) => {
                    log::warn!("embedding request attempt {} failed: {reason}", attempt + 1);
                    last = reason;
                    std::thread::sleep(std::time::Duration::from_millis(100 << attempt));
                }
            }
        }
        Err(EmbedError::Endpoint {
            attempts: self.max_retries,
            reason: last,
            uncovered: Vec::new(),
        })
    }
}
