//! Parser for inline-tagged sentences produced by the annotation model.
//!
//! The annotator reproduces each input sentence with XML-style tags marking
//! factual claims and the structure of their epistemic appeals, e.g.
//!
//! ```text
//! <Fact_Appeal Indirect>It rained,</Fact_Appeal> according to the
//! <Source Named Official>Weather Service</Source>.
//! ```
//!
//! Tags are `<Name attr attr>` / `</Name>` with space-separated bare
//! attributes and strict nesting. Two surface conventions exist in the wild
//! (`Source` vs `Appeal_Source`, `Direct` vs `Direct_Quote`); both are
//! accepted and canonicalized at parse time. Anything between `<` and `>`
//! that does not lexically form a tag is treated as literal text.
//!
//! Span offsets are in Unicode scalar values against the untagged sentence.

mod counts;
mod engine;

pub use engine::{parse_recover, parse_strict};

use serde::{Deserialize, Serialize};

/// Kind of an annotated span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagKind {
    FactNoAppeal,
    FactAppeal,
    Source,
    SourceAttribute,
    Recipient,
    Time,
    Location,
}

impl TagKind {
    /// Resolve a wire tag name, accepting both observed surface styles.
    pub fn from_wire(name: &str) -> Option<TagKind> {
        Some(match name {
            "Fact_No_Appeal" => TagKind::FactNoAppeal,
            "Fact_Appeal" => TagKind::FactAppeal,
            "Source" | "Appeal_Source" => TagKind::Source,
            "Source_Attribute" => TagKind::SourceAttribute,
            "Recipient" => TagKind::Recipient,
            "Time" => TagKind::Time,
            "Location" => TagKind::Location,
            _ => return None,
        })
    }

    /// Canonical serialization name.
    pub fn wire_name(self) -> &'static str {
        match self {
            TagKind::FactNoAppeal => "Fact_No_Appeal",
            TagKind::FactAppeal => "Fact_Appeal",
            TagKind::Source => "Source",
            TagKind::SourceAttribute => "Source_Attribute",
            TagKind::Recipient => "Recipient",
            TagKind::Time => "Time",
            TagKind::Location => "Location",
        }
    }
}

/// The seven appeal-source classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceType {
    Official,
    Expert,
    ActiveParticipant,
    Witness,
    DirectEvidence,
    NewsReport,
    ExpertDocument,
}

impl SourceType {
    pub const ALL: [SourceType; 7] = [
        SourceType::Official,
        SourceType::Expert,
        SourceType::ActiveParticipant,
        SourceType::Witness,
        SourceType::DirectEvidence,
        SourceType::NewsReport,
        SourceType::ExpertDocument,
    ];

    pub fn from_wire(name: &str) -> Option<SourceType> {
        Some(match name {
            "Official" => SourceType::Official,
            "Expert" => SourceType::Expert,
            "Active_Participant" => SourceType::ActiveParticipant,
            "Witness" => SourceType::Witness,
            "Direct_Evidence" => SourceType::DirectEvidence,
            "News_Report" => SourceType::NewsReport,
            "Expert_Document" => SourceType::ExpertDocument,
            _ => return None,
        })
    }

    pub fn wire_name(self) -> &'static str {
        match self {
            SourceType::Official => "Official",
            SourceType::Expert => "Expert",
            SourceType::ActiveParticipant => "Active_Participant",
            SourceType::Witness => "Witness",
            SourceType::DirectEvidence => "Direct_Evidence",
            SourceType::NewsReport => "News_Report",
            SourceType::ExpertDocument => "Expert_Document",
        }
    }

    /// Label used in CSV outputs.
    pub fn label(self) -> &'static str {
        match self {
            SourceType::Official => "official",
            SourceType::Expert => "expert",
            SourceType::ActiveParticipant => "active_participant",
            SourceType::Witness => "witness",
            SourceType::DirectEvidence => "direct_evidence",
            SourceType::NewsReport => "news_report",
            SourceType::ExpertDocument => "expert_document",
        }
    }
}

/// Whether a source is explicitly named.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Naming {
    Named,
    Unnamed,
}

impl Naming {
    pub fn from_wire(name: &str) -> Option<Naming> {
        match name {
            "Named" => Some(Naming::Named),
            "Unnamed" => Some(Naming::Unnamed),
            _ => None,
        }
    }

    pub fn wire_name(self) -> &'static str {
        match self {
            Naming::Named => "Named",
            Naming::Unnamed => "Unnamed",
        }
    }
}

/// Direct vs. paraphrased quotation of the appeal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuoteMode {
    Direct,
    Indirect,
}

impl QuoteMode {
    pub fn from_wire(name: &str) -> Option<QuoteMode> {
        match name {
            "Direct" | "Direct_Quote" => Some(QuoteMode::Direct),
            "Indirect" | "Indirect_Quote" => Some(QuoteMode::Indirect),
            _ => None,
        }
    }

    pub fn wire_name(self) -> &'static str {
        match self {
            QuoteMode::Direct => "Direct",
            QuoteMode::Indirect => "Indirect",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            QuoteMode::Direct => "direct",
            QuoteMode::Indirect => "indirect",
        }
    }
}

/// Identifies a sentence by its article and position.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SentenceId {
    pub article_id: String,
    pub index: usize,
}

impl SentenceId {
    pub fn new(article_id: impl Into<String>, index: usize) -> Self {
        SentenceId { article_id: article_id.into(), index }
    }
}

/// One typed span over the untagged sentence text.
///
/// `start`/`end` are Unicode scalar value offsets with `start < end`.
/// `parent` indexes the enclosing span within [`AnnotatedSentence::spans`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub kind: TagKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub naming: Option<Naming>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub source_type: Option<SourceType>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub quote: Option<QuoteMode>,
    pub start: usize,
    pub end: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub parent: Option<usize>,
}

/// A sentence plus the typed spans parsed from its tagged form, in document
/// order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedSentence {
    pub sentence_id: SentenceId,
    pub text: String,
    pub spans: Vec<Span>,
}

impl AnnotatedSentence {
    /// The text covered by a span (offsets are in chars, not bytes).
    pub fn span_text(&self, span: &Span) -> String {
        self.text
            .chars()
            .skip(span.start)
            .take(span.end - span.start)
            .collect()
    }

    /// Per-sentence feature tallies used by the metrics engine.
    pub fn to_counts(&self) -> crate::metrics::SentenceFeatures {
        counts::to_counts(self)
    }
}

/// Why a tag was rejected. `position` is a character index into the tagged
/// input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseErrorReason {
    UnknownTag,
    UnknownAttribute,
    UnmatchedClose,
    UnclosedOpen,
    OverlapViolation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseError {
    pub position: usize,
    pub reason: ParseErrorReason,
}

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?} at char {}", self.reason, self.position)
    }
}

impl std::error::Error for ParseError {}

/// Strip all well-formed and recoverable tags, keeping every non-tag
/// character. Pure; never fails.
pub fn untag(tagged: &str) -> String {
    parse_recover(SentenceId::new("", 0), tagged).0.text
}

/// Collapse runs of whitespace to single spaces and trim the ends.
pub fn collapse_ws(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// True iff the untagged form of `tagged` reproduces `original` up to
/// whitespace. This is the contract every accepted annotation must satisfy.
pub fn align(tagged: &str, original: &str) -> bool {
    collapse_ws(&untag(tagged)) == collapse_ws(original)
}

/// Serialize a sentence back to canonical tagged text.
///
/// Inverse of parsing for valid trees: opens are emitted in document order,
/// closes innermost-first, attributes in canonical order.
pub fn serialize(sentence: &AnnotatedSentence) -> String {
    let chars: Vec<char> = sentence.text.chars().collect();
    let mut out = String::with_capacity(sentence.text.len() + sentence.spans.len() * 16);
    for pos in 0..=chars.len() {
        // Closes first, innermost (most recently opened) first.
        for span in sentence.spans.iter().rev() {
            if span.end == pos {
                out.push_str("</");
                out.push_str(span.kind.wire_name());
                out.push('>');
            }
        }
        for span in &sentence.spans {
            if span.start == pos {
                out.push('<');
                out.push_str(span.kind.wire_name());
                if let Some(naming) = span.naming {
                    out.push(' ');
                    out.push_str(naming.wire_name());
                }
                if let Some(st) = span.source_type {
                    out.push(' ');
                    out.push_str(st.wire_name());
                }
                if let Some(q) = span.quote {
                    out.push(' ');
                    out.push_str(q.wire_name());
                }
                out.push('>');
            }
        }
        if pos < chars.len() {
            out.push(chars[pos]);
        }
    }
    out
}
