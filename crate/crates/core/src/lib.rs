//! Core library for a two-outlet news corpus analysis pipeline.
//!
//! The pipeline ingests line-delimited article dumps from exactly two
//! outlets, matches same-day articles across outlets by title-embedding
//! similarity, sends sentences to an annotation endpoint that marks factual
//! claims and their epistemic appeals with inline tags, parses those tags
//! into typed span trees, and aggregates the results into tiered, per-topic
//! comparative statistics with distinctive-source rankings.

pub mod annotate;
pub mod corpus;
pub mod distinct;
pub mod matcher;
pub mod metrics;
pub mod parser;
pub mod pipeline;
pub mod topics;

pub use corpus::{Article, CorpusStats, DateRange, OutletId, Sentence};
pub use matcher::{MatchRecord, SimilarityTier, TierBounds, TitleEmbedding};
pub use metrics::{ComparisonRow, FeatureCounts, MetricKey, SentenceFeatures, Stratum};
pub use parser::{
    AnnotatedSentence, Naming, ParseError, ParseErrorReason, QuoteMode, SentenceId, SourceType,
    Span, TagKind,
};
pub use pipeline::{RunConfig, RunManifest, Stage};
pub use topics::{FittedTopics, TopicAssignment, TopicModelConfig};
