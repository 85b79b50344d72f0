//! Shared helpers for integration tests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use factlens_core::annotate::stub_annotate;
use factlens_core::corpus::{segment_article, Article, OutletId, RuleSegmenter};
use factlens_core::metrics::{FeatureCounts, Stratum, TierScope};
use factlens_core::parser::{parse_strict, AnnotatedSentence, SentenceId};

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn read_lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
        .lines()
        .map(str::to_string)
        .collect()
}

#[derive(serde::Deserialize)]
pub struct FixtureArticle {
    pub id: String,
    pub title: String,
    pub body: String,
    pub date: String,
}

pub fn fixture_articles(outlet: &str) -> Vec<Article> {
    let path = fixtures_dir().join("corpus").join(format!("{outlet}.jsonl"));
    read_lines(&path)
        .iter()
        .filter(|line| !line.is_empty())
        .map(|line| {
            let raw: FixtureArticle = serde_json::from_str(line).expect("fixture article");
            Article {
                id: raw.id,
                outlet: OutletId::new(outlet).unwrap(),
                day: raw.date.parse().unwrap(),
                title: raw.title,
                body: raw.body,
                url: None,
            }
        })
        .collect()
}

/// Segment, stub-annotate, and strictly parse one article.
pub fn stub_parse_article(article: &Article) -> Vec<AnnotatedSentence> {
    let segmenter = RuleSegmenter::default();
    segment_article(article, &segmenter)
        .into_iter()
        .map(|sentence| {
            let tagged = stub_annotate(&sentence.text);
            parse_strict(SentenceId::new(sentence.article_id.clone(), sentence.index), &tagged)
                .expect("stub output parses strictly")
        })
        .collect()
}

pub fn article_counts(article: &Article, sentences: &[AnnotatedSentence]) -> FeatureCounts {
    let stratum = Stratum {
        outlet: article.outlet.clone(),
        tier: TierScope::All,
        topic: None,
        period: "fixture".to_string(),
    };
    let mut counts = FeatureCounts::zero(stratum);
    for s in sentences {
        counts.accumulate(&s.to_counts());
    }
    counts
}

/// Per-article and per-outlet expectations derived when the corpus was
/// authored, independent of this implementation.
#[derive(serde::Deserialize)]
pub struct FixtureCounts {
    pub articles: BTreeMap<String, FixtureTally>,
    pub outlets: BTreeMap<String, FixtureTally>,
}

#[derive(serde::Deserialize)]
pub struct FixtureTally {
    pub sentences: u64,
    pub factual: u64,
    pub direct: u64,
    pub indirect: u64,
    pub official: u64,
    pub news_report: u64,
}

pub fn fixture_counts() -> FixtureCounts {
    let path = fixtures_dir().join("fixture_counts.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}
