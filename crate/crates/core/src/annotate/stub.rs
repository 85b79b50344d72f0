//! Deterministic rule-based annotator for tests and offline runs.
//!
//! Two rules, applied in order; the first hit wins:
//!
//! 1. `<clause>, according to [the] <X>` tags the clause as an indirect
//!    appeal and X as a named source (News_Report when X mentions
//!    News/Times, Official otherwise).
//! 2. A double-quoted span adjacent to the word "said" becomes a direct
//!    quote appeal.
//!
//! Sentences hitting neither rule come back untagged (non-factual). Tags
//! are only ever inserted, so output always untags back to its input.

use super::{AnnotateError, Annotator};

const ACCORDING_TO: &str = "according to ";

/// Annotate one sentence with the stub rule set. Deterministic and pure.
pub fn stub_annotate(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    if let Some(result) = according_to_rule(&chars) {
        return result;
    }
    if let Some(result) = said_quote_rule(&chars) {
        return result;
    }
    text.to_string()
}

/// Insert tag strings at char positions (position, tag) without disturbing
/// any original character.
fn insert_tags(chars: &[char], mut tags: Vec<(usize, &str)>) -> String {
    tags.sort_by_key(|(pos, _)| *pos);
    let mut out = String::with_capacity(chars.len() + 64);
    let mut tag_iter = tags.into_iter().peekable();
    for (i, c) in chars.iter().enumerate() {
        while matches!(tag_iter.peek(), Some((pos, _)) if *pos == i) {
            out.push_str(tag_iter.next().unwrap().1);
        }
        out.push(*c);
    }
    for (_, tag) in tag_iter {
        out.push_str(tag);
    }
    out
}

fn find_last(chars: &[char], needle: &str) -> Option<usize> {
    let needle: Vec<char> = needle.chars().collect();
    if needle.is_empty() || chars.len() < needle.len() {
        return None;
    }
    (0..=chars.len() - needle.len()).rev().find(|&i| chars[i..i + needle.len()] == needle[..])
}

fn according_to_rule(chars: &[char]) -> Option<String> {
    let at = find_last(chars, ACCORDING_TO)?;
    // The clause before the marker is the appeal; it must have content.
    let mut clause_end = at;
    while clause_end > 0 && chars[clause_end - 1].is_whitespace() {
        clause_end -= 1;
    }
    if clause_end == 0 {
        return None;
    }

    let mut src_start = at + ACCORDING_TO.chars().count();
    let the: Vec<char> = "the ".chars().collect();
    if chars[src_start..].starts_with(&the) {
        src_start += the.len();
    }
    let mut src_end = src_start;
    while src_end < chars.len()
        && !matches!(chars[src_end], '.' | ',' | ';' | ':' | '!' | '?' | '"')
    {
        src_end += 1;
    }
    while src_end > src_start && chars[src_end - 1].is_whitespace() {
        src_end -= 1;
    }
    if src_end == src_start {
        return None;
    }

    let source_text: String = chars[src_start..src_end].iter().collect();
    let source_tag = if source_text.contains("News") || source_text.contains("Times") {
        "<Source Named News_Report>"
    } else {
        "<Source Named Official>"
    };
    Some(insert_tags(
        chars,
        vec![
            (0, "<Fact_Appeal Indirect>"),
            (clause_end, "</Fact_Appeal>"),
            (src_start, source_tag),
            (src_end, "</Source>"),
        ],
    ))
}

fn is_word_said(chars: &[char], start: usize) -> bool {
    let said: Vec<char> = "said".chars().collect();
    chars[start..].starts_with(&said)
        && chars.get(start + said.len()).map_or(true, |c| !c.is_alphanumeric())
}

fn said_quote_rule(chars: &[char]) -> Option<String> {
    let open = chars.iter().position(|&c| c == '"')?;
    let close = open + 1 + chars[open + 1..].iter().position(|&c| c == '"')?;

    // "..." said  /  said "..."
    let mut after = close + 1;
    while after < chars.len() && chars[after].is_whitespace() {
        after += 1;
    }
    let said_after = after < chars.len() && is_word_said(chars, after);

    let mut before_end = open;
    while before_end > 0 && chars[before_end - 1].is_whitespace() {
        before_end -= 1;
    }
    let said_before = before_end >= 4 && {
        let start = before_end - 4;
        is_word_said(chars, start)
            && (start == 0 || !chars[start - 1].is_alphanumeric())
    };

    if !(said_after || said_before) {
        return None;
    }
    Some(insert_tags(
        chars,
        vec![(open, "<Fact_Appeal Direct>"), (close + 1, "</Fact_Appeal>")],
    ))
}

/// [`Annotator`] wrapper over [`stub_annotate`].
pub struct StubAnnotator;

impl Annotator for StubAnnotator {
    fn id(&self) -> &str {
        "stub-rules-v1"
    }

    fn annotate_batch(&self, texts: &[String]) -> Result<Vec<String>, AnnotateError> {
        Ok(texts.iter().map(|t| stub_annotate(t)).collect())
    }
}
