//! Body-text preprocessing for the topic model: tokenize on non-letters,
//! lowercase, drop stopwords and tokens under three characters, stem, then
//! map through a document-frequency-pruned vocabulary.

use std::collections::{BTreeMap, HashMap, HashSet};

use super::porter;

/// Fixed English stopword list (plus contraction fragments left behind by
/// the letters-only tokenizer).
const STOPWORDS: &[&str] = &[
    "all", "also", "although", "among", "and", "another", "any", "are", "because", "been",
    "before", "being", "between", "both", "but", "came", "can", "cannot", "come", "could",
    "did", "didn", "does", "doesn", "doing", "don", "down", "during", "each", "even", "few",
    "for", "from", "further", "get", "got", "had", "hadn", "has", "hasn", "have", "haven",
    "having", "her", "here", "hers", "herself", "him", "himself", "his", "how", "into", "isn",
    "its", "itself", "just", "let", "like", "made", "make", "many", "may", "might", "more",
    "most", "much", "must", "mustn", "myself", "nor", "not", "now", "off", "once", "only",
    "other", "our", "ours", "ourselves", "out", "over", "own", "same", "shan", "she", "should",
    "shouldn", "since", "some", "still", "such", "take", "than", "that", "the", "their",
    "theirs", "them", "themselves", "then", "there", "these", "they", "this", "those",
    "through", "too", "under", "until", "upon", "very", "was", "wasn", "were", "weren", "what",
    "when", "where", "which", "while", "who", "whom", "why", "will", "with", "won", "would",
    "wouldn", "you", "your", "yours", "yourself", "yourselves",
];

/// Tokenize, filter, and stem one body text.
pub fn preprocess(text: &str) -> Vec<String> {
    let stopwords: HashSet<&str> = STOPWORDS.iter().copied().collect();
    text.split(|c: char| !c.is_alphabetic())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .filter(|t| t.chars().count() >= 3 && !stopwords.contains(t.as_str()))
        .map(|t| porter::stem(&t))
        .collect()
}

/// Document-frequency-pruned term vocabulary, alphabetically ordered for
/// reproducible term ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    pub terms: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Build from tokenized documents, keeping terms appearing in at least
    /// `min_doc_freq` documents and at most `max_doc_ratio` of them.
    pub fn build(docs: &[Vec<String>], min_doc_freq: usize, max_doc_ratio: f64) -> Vocabulary {
        let mut doc_freq: BTreeMap<&String, usize> = BTreeMap::new();
        for doc in docs {
            let unique: HashSet<&String> = doc.iter().collect();
            for term in unique {
                *doc_freq.entry(term).or_insert(0) += 1;
            }
        }
        let max_df = (max_doc_ratio * docs.len() as f64).floor() as usize;
        let terms: Vec<String> = doc_freq
            .into_iter()
            .filter(|(_, df)| *df >= min_doc_freq && *df <= max_df)
            .map(|(term, _)| term.clone())
            .collect();
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary { terms, index }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn id_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    /// Map a tokenized document to term ids, dropping pruned terms.
    pub fn map_doc(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().filter_map(|t| self.id_of(t)).collect()
    }

    pub fn from_terms(terms: Vec<String>) -> Vocabulary {
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary { terms, index }
    }
}
