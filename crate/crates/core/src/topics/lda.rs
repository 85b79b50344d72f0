//! Collapsed Gibbs sampler for latent Dirichlet allocation.
//!
//! One chain, exact collapsed sampling: for token w in document d the
//! conditional for topic k is
//!
//! ```text
//! p(z = k) ∝ (n_dk + alpha) * (n_kw + beta) / (n_k + V*beta)
//! ```
//!
//! with all counts excluding the token being resampled. A fixed seed makes
//! assignments bit-reproducible; posterior means come from the final
//! sample's counts.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{TopicModelConfig, TopicsError};

pub struct GibbsState {
    pub k: usize,
    pub vocab_size: usize,
    /// Per-document topic assignment of every token.
    pub z: Vec<Vec<u32>>,
    pub n_dk: Vec<Vec<u32>>,
    pub n_kw: Vec<Vec<u32>>,
    pub n_k: Vec<u64>,
    pub doc_len: Vec<u32>,
    pub log_likelihood_trace: Vec<f64>,
}

/// Run the sampler over documents given as term-id sequences.
pub fn fit(
    docs: &[Vec<usize>],
    vocab_size: usize,
    config: &TopicModelConfig,
) -> Result<GibbsState, TopicsError> {
    config.validate()?;
    let k = config.k;
    let nonempty = docs.iter().filter(|d| !d.is_empty()).count();
    if nonempty < k {
        return Err(TopicsError::TooFewDocuments { docs: nonempty, k });
    }
    if vocab_size == 0 {
        return Err(TopicsError::EmptyVocabulary);
    }
    for doc in docs {
        if let Some(&w) = doc.iter().find(|&&w| w >= vocab_size) {
            return Err(TopicsError::TermOutOfRange { term: w, vocab_size });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = GibbsState {
        k,
        vocab_size,
        z: docs.iter().map(|d| vec![0u32; d.len()]).collect(),
        n_dk: vec![vec![0u32; k]; docs.len()],
        n_kw: vec![vec![0u32; vocab_size]; k],
        n_k: vec![0u64; k],
        doc_len: docs.iter().map(|d| d.len() as u32).collect(),
        log_likelihood_trace: Vec::new(),
    };

    // Random initial assignment.
    for (d, doc) in docs.iter().enumerate() {
        for (i, &w) in doc.iter().enumerate() {
            let topic = rng.gen_range(0..k) as u32;
            state.z[d][i] = topic;
            state.n_dk[d][topic as usize] += 1;
            state.n_kw[topic as usize][w] += 1;
            state.n_k[topic as usize] += 1;
        }
    }

    let alpha = config.alpha;
    let beta = config.beta;
    let v_beta = vocab_size as f64 * beta;
    let mut weights = vec![0.0f64; k];

    for sweep in 0..config.iterations {
        for (d, doc) in docs.iter().enumerate() {
            for (i, &w) in doc.iter().enumerate() {
                let old = state.z[d][i] as usize;
                state.n_dk[d][old] -= 1;
                state.n_kw[old][w] -= 1;
                state.n_k[old] -= 1;

                let mut total = 0.0;
                for topic in 0..k {
                    let weight = (state.n_dk[d][topic] as f64 + alpha)
                        * (state.n_kw[topic][w] as f64 + beta)
                        / (state.n_k[topic] as f64 + v_beta);
                    weights[topic] = weight;
                    total += weight;
                }
                let mut draw = rng.gen::<f64>() * total;
                let mut new = k - 1;
                for (topic, &weight) in weights.iter().enumerate() {
                    draw -= weight;
                    if draw < 0.0 {
                        new = topic;
                        break;
                    }
                }

                state.z[d][i] = new as u32;
                state.n_dk[d][new] += 1;
                state.n_kw[new][w] += 1;
                state.n_k[new] += 1;
            }
        }
        debug_assert!(state.counts_conserved(docs));
        // Predictive log-likelihood trace after burn-in, every 10 sweeps
        // plus the final one; a cheap convergence diagnostic.
        if sweep >= config.burn_in && (sweep % 10 == 0 || sweep + 1 == config.iterations) {
            state.log_likelihood_trace.push(state.predictive_ll(docs, alpha, beta));
        }
    }
    Ok(state)
}

impl GibbsState {
    /// Every count matrix must stay consistent with the raw assignments.
    pub fn counts_conserved(&self, docs: &[Vec<usize>]) -> bool {
        let token_total: u64 = self.doc_len.iter().map(|&l| l as u64).sum();
        let nk_total: u64 = self.n_k.iter().sum();
        if token_total != nk_total {
            return false;
        }
        for (d, doc) in docs.iter().enumerate() {
            let row: u32 = self.n_dk[d].iter().sum();
            if row != doc.len() as u32 {
                return false;
            }
        }
        for topic in 0..self.k {
            let row: u64 = self.n_kw[topic].iter().map(|&c| c as u64).sum();
            if row != self.n_k[topic] {
                return false;
            }
        }
        true
    }

    /// Smoothed point estimate of the document-topic matrix from the
    /// current counts; every row sums to one.
    pub fn doc_topic(&self, alpha: f64) -> Vec<Vec<f64>> {
        self.n_dk
            .iter()
            .zip(&self.doc_len)
            .map(|(row, &len)| {
                let denom = len as f64 + self.k as f64 * alpha;
                row.iter().map(|&c| (c as f64 + alpha) / denom).collect()
            })
            .collect()
    }

    /// Smoothed point estimate of the topic-word matrix; rows sum to one.
    pub fn topic_word(&self, beta: f64) -> Vec<Vec<f64>> {
        let v_beta = self.vocab_size as f64 * beta;
        self.n_kw
            .iter()
            .zip(&self.n_k)
            .map(|(row, &total)| {
                let denom = total as f64 + v_beta;
                row.iter().map(|&c| (c as f64 + beta) / denom).collect()
            })
            .collect()
    }

    fn predictive_ll(&self, docs: &[Vec<usize>], alpha: f64, beta: f64) -> f64 {
        let theta = self.doc_topic(alpha);
        let phi = self.topic_word(beta);
        let mut ll = 0.0;
        for (d, doc) in docs.iter().enumerate() {
            for &w in doc {
                let p: f64 = (0..self.k).map(|t| theta[d][t] * phi[t][w]).sum();
                ll += p.ln();
            }
        }
        ll
    }
}

/// Fold a held-out document into a fitted model with a short seeded Gibbs
/// pass against the frozen topic-word distribution; returns the smoothed
/// topic row.
pub fn fold_in(
    topic_word: &[Vec<f64>],
    tokens: &[usize],
    alpha: f64,
    sweeps: usize,
    seed: u64,
) -> Vec<f64> {
    let k = topic_word.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut n_dk = vec![0u32; k];
    let mut z = vec![0u32; tokens.len()];
    for (i, &w) in tokens.iter().enumerate() {
        let topic = rng.gen_range(0..k) as u32;
        z[i] = topic;
        n_dk[topic as usize] += 1;
        let _ = w;
    }
    let mut weights = vec![0.0f64; k];
    for _ in 0..sweeps {
        for (i, &w) in tokens.iter().enumerate() {
            let old = z[i] as usize;
            n_dk[old] -= 1;
            let mut total = 0.0;
            for topic in 0..k {
                let weight = (n_dk[topic] as f64 + alpha) * topic_word[topic][w];
                weights[topic] = weight;
                total += weight;
            }
            let mut draw = rng.gen::<f64>() * total;
            let mut new = k - 1;
            for (topic, &weight) in weights.iter().enumerate() {
                draw -= weight;
                if draw < 0.0 {
                    new = topic;
                    break;
                }
            }
            z[i] = new as u32;
            n_dk[new] += 1;
        }
    }
    let denom = tokens.len() as f64 + k as f64 * alpha;
    n_dk.iter().map(|&c| (c as f64 + alpha) / denom).collect()
}
