//! Feature extraction from a parsed sentence.

use super::{AnnotatedSentence, SourceType, TagKind};
use crate::metrics::SentenceFeatures;

/// Tally the spans of a sentence into the mergeable per-sentence features
/// consumed by the metrics engine.
pub fn to_counts(sentence: &AnnotatedSentence) -> SentenceFeatures {
    let mut f = SentenceFeatures::default();
    for span in &sentence.spans {
        match span.kind {
            TagKind::FactAppeal => {
                f.n_fact_appeal += 1;
                if let Some(q) = span.quote {
                    *f.quotes.entry(q).or_insert(0) += 1;
                }
            }
            TagKind::FactNoAppeal => f.n_fact_no_appeal += 1,
            TagKind::Source => {
                *f.sources.entry((span.naming, span.source_type)).or_insert(0) += 1;
                if span.source_type == Some(SourceType::Expert) {
                    f.expert_span_texts.push(sentence.span_text(span));
                }
            }
            TagKind::SourceAttribute => f.has_source_attribute = true,
            TagKind::Recipient => f.has_recipient = true,
            TagKind::Time => f.has_time = true,
            TagKind::Location => f.has_location = true,
        }
    }
    f.is_factual = f.n_fact_appeal + f.n_fact_no_appeal >= 1;
    f
}
