//! Single-pass stack parser over tagged text.
//!
//! Strict mode reports every violation and yields no tree; recovery mode
//! drops offending tags, keeps their text, and returns the best-effort tree
//! together with the recorded errors. Both modes share one pass, so the
//! untagged text is identical whenever strict parsing would have succeeded.

use super::{
    AnnotatedSentence, Naming, ParseError, ParseErrorReason, QuoteMode, SentenceId, SourceType,
    Span, TagKind,
};

/// Parse in strict mode: any violation fails the sentence.
pub fn parse_strict(
    sentence_id: SentenceId,
    tagged: &str,
) -> Result<AnnotatedSentence, Vec<ParseError>> {
    let (sentence, errors) = run(sentence_id, tagged);
    if errors.is_empty() {
        Ok(sentence)
    } else {
        Err(errors)
    }
}

/// Parse in recovery mode: offending tags are dropped (their text is kept)
/// and the best-effort tree is returned alongside the recorded errors.
pub fn parse_recover(sentence_id: SentenceId, tagged: &str) -> (AnnotatedSentence, Vec<ParseError>) {
    run(sentence_id, tagged)
}

struct LexedTag {
    closing: bool,
    name: String,
    /// (attribute, char position of the attribute in the tagged input)
    attrs: Vec<(String, usize)>,
    /// char index just past the closing `>`
    end: usize,
}

fn is_name_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Try to lex a tag at `chars[at]` (which must be `<`). Anything that does
/// not match `</?Name( Attr)*>` with bare word tokens is literal text.
fn lex_tag(chars: &[char], at: usize) -> Option<LexedTag> {
    let mut i = at + 1;
    let closing = matches!(chars.get(i), Some('/'));
    if closing {
        i += 1;
    }
    if !chars.get(i).copied().is_some_and(is_name_start) {
        return None;
    }
    let name_start = i;
    while chars.get(i).copied().is_some_and(is_name_char) {
        i += 1;
    }
    let name: String = chars[name_start..i].iter().collect();

    let mut attrs = Vec::new();
    loop {
        let ws_start = i;
        while matches!(chars.get(i), Some(c) if c.is_whitespace()) {
            i += 1;
        }
        match chars.get(i) {
            Some('>') => return Some(LexedTag { closing, name, attrs, end: i + 1 }),
            Some(&c) if is_name_start(c) && ws_start < i => {
                let attr_start = i;
                while chars.get(i).copied().is_some_and(is_name_char) {
                    i += 1;
                }
                attrs.push((chars[attr_start..i].iter().collect(), attr_start));
            }
            _ => return None,
        }
    }
}

struct Node {
    kind: TagKind,
    naming: Option<Naming>,
    source_type: Option<SourceType>,
    quote: Option<QuoteMode>,
    start: usize,
    end: usize,
    parent: Option<usize>,
    open_pos: usize,
    dropped: bool,
}

fn run(sentence_id: SentenceId, tagged: &str) -> (AnnotatedSentence, Vec<ParseError>) {
    let chars: Vec<char> = tagged.chars().collect();
    let mut text = String::with_capacity(tagged.len());
    let mut out_len = 0usize; // length of `text` in chars
    let mut nodes: Vec<Node> = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    let mut errors: Vec<ParseError> = Vec::new();

    let mut i = 0usize;
    while i < chars.len() {
        if chars[i] == '<' {
            if let Some(tag) = lex_tag(&chars, i) {
                if tag.closing {
                    handle_close(&tag, i, &mut nodes, &mut stack, out_len, &mut errors);
                } else {
                    handle_open(&tag, i, &mut nodes, &mut stack, out_len, &mut errors);
                }
                i = tag.end;
                continue;
            }
        }
        text.push(chars[i]);
        out_len += 1;
        i += 1;
    }

    // Anything still open is unclosed; drop it but keep its text.
    for node_idx in stack.drain(..) {
        errors.push(ParseError {
            position: nodes[node_idx].open_pos,
            reason: ParseErrorReason::UnclosedOpen,
        });
        nodes[node_idx].dropped = true;
    }

    // Flatten surviving nodes in document (creation) order, re-parenting
    // children of dropped nodes to their nearest surviving ancestor.
    let mut final_index: Vec<Option<usize>> = vec![None; nodes.len()];
    let mut spans = Vec::with_capacity(nodes.len());
    for idx in 0..nodes.len() {
        if nodes[idx].dropped {
            continue;
        }
        let mut ancestor = nodes[idx].parent;
        while let Some(a) = ancestor {
            if !nodes[a].dropped {
                break;
            }
            ancestor = nodes[a].parent;
        }
        let node = &nodes[idx];
        final_index[idx] = Some(spans.len());
        spans.push(Span {
            kind: node.kind,
            naming: node.naming,
            source_type: node.source_type,
            quote: node.quote,
            start: node.start,
            end: node.end,
            parent: ancestor.and_then(|a| final_index[a]),
        });
    }

    (AnnotatedSentence { sentence_id, text, spans }, errors)
}

fn handle_open(
    tag: &LexedTag,
    tag_pos: usize,
    nodes: &mut Vec<Node>,
    stack: &mut Vec<usize>,
    out_len: usize,
    errors: &mut Vec<ParseError>,
) {
    let Some(kind) = TagKind::from_wire(&tag.name) else {
        errors.push(ParseError { position: tag_pos, reason: ParseErrorReason::UnknownTag });
        return;
    };

    let mut naming = None;
    let mut source_type = None;
    let mut quote = None;
    for (attr, attr_pos) in &tag.attrs {
        // Attribute order is insignificant; repeats and attributes on the
        // wrong kind are unknown-attribute violations.
        let accepted = match (kind, Naming::from_wire(attr), SourceType::from_wire(attr)) {
            (TagKind::Source, Some(n), _) if naming.is_none() => {
                naming = Some(n);
                true
            }
            (TagKind::Source, _, Some(st)) if source_type.is_none() => {
                source_type = Some(st);
                true
            }
            (TagKind::FactAppeal, ..) => match QuoteMode::from_wire(attr) {
                Some(q) if quote.is_none() => {
                    quote = Some(q);
                    true
                }
                _ => false,
            },
            _ => false,
        };
        if !accepted {
            errors.push(ParseError {
                position: *attr_pos,
                reason: ParseErrorReason::UnknownAttribute,
            });
        }
    }

    let node_idx = nodes.len();
    nodes.push(Node {
        kind,
        naming,
        source_type,
        quote,
        start: out_len,
        end: out_len,
        parent: stack.last().copied(),
        open_pos: tag_pos,
        dropped: false,
    });
    stack.push(node_idx);
}

fn handle_close(
    tag: &LexedTag,
    tag_pos: usize,
    nodes: &mut [Node],
    stack: &mut Vec<usize>,
    out_len: usize,
    errors: &mut Vec<ParseError>,
) {
    if !tag.attrs.is_empty() {
        for (_, attr_pos) in &tag.attrs {
            errors.push(ParseError {
                position: *attr_pos,
                reason: ParseErrorReason::UnknownAttribute,
            });
        }
    }
    let Some(kind) = TagKind::from_wire(&tag.name) else {
        errors.push(ParseError { position: tag_pos, reason: ParseErrorReason::UnknownTag });
        return;
    };
    match stack.last().copied() {
        Some(top) if nodes[top].kind == kind => {
            stack.pop();
            let node = &mut nodes[top];
            node.end = out_len;
            if node.start >= node.end {
                // Zero-width spans carry no text; drop them silently so
                // offsets always satisfy start < end.
                node.dropped = true;
            }
        }
        _ => {
            let overlapping = stack.iter().any(|&idx| nodes[idx].kind == kind);
            errors.push(ParseError {
                position: tag_pos,
                reason: if overlapping {
                    ParseErrorReason::OverlapViolation
                } else {
                    ParseErrorReason::UnmatchedClose
                },
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{serialize, untag};

    fn sid() -> SentenceId {
        SentenceId::new("a1", 0)
    }

    fn strict(tagged: &str) -> AnnotatedSentence {
        parse_strict(sid(), tagged).expect("strict parse")
    }

    #[test]
    fn untagged_input_has_no_spans() {
        let s = strict("Hello there.");
        assert_eq!(s.text, "Hello there.");
        assert!(s.spans.is_empty());
    }

    #[test]
    fn simple_appeal_and_source() {
        let s = strict(
            "<Fact_Appeal Indirect>It rained,</Fact_Appeal> according to the \
             <Source Named Official>Weather Service</Source>.",
        );
        assert_eq!(s.text, "It rained, according to the Weather Service.");
        assert_eq!(s.spans.len(), 2);
        assert_eq!(s.spans[0].kind, TagKind::FactAppeal);
        assert_eq!(s.spans[0].quote, Some(QuoteMode::Indirect));
        assert_eq!(s.span_text(&s.spans[0]), "It rained,");
        assert_eq!(s.spans[1].kind, TagKind::Source);
        assert_eq!(s.spans[1].naming, Some(Naming::Named));
        assert_eq!(s.spans[1].source_type, Some(SourceType::Official));
        assert_eq!(s.span_text(&s.spans[1]), "Weather Service");
    }

    #[test]
    fn alias_closure_yields_identical_trees() {
        let canonical = "<Fact_Appeal Indirect>A.</Fact_Appeal> according to \
                         <Source Named News_Report>B</Source>";
        let aliased = "<Fact_Appeal Indirect_Quote>A.</Fact_Appeal> according to \
                       <Appeal_Source Named News_Report>B</Appeal_Source>";
        let a = strict(canonical);
        let b = strict(aliased);
        assert_eq!(a.text, b.text);
        assert_eq!(a.spans, b.spans);
        assert_eq!(b.spans[0].quote, Some(QuoteMode::Indirect));
        assert_eq!(b.spans[1].source_type, Some(SourceType::NewsReport));
    }

    #[test]
    fn nested_spans_get_parent_links() {
        let s = strict(
            "<Fact_Appeal Indirect>Cases in Kansas, which <Source Unnamed Official>the state \
             health department</Source> said may be linked, reached 24.</Fact_Appeal>",
        );
        assert_eq!(s.spans.len(), 2);
        assert_eq!(s.spans[0].parent, None);
        assert_eq!(s.spans[1].parent, Some(0));
        assert!(s.spans[0].start <= s.spans[1].start && s.spans[1].end <= s.spans[0].end);
    }

    #[test]
    fn unknown_tag_strict_fails_recovery_keeps_text() {
        let tagged = "<Bogus>kept</Bogus> text";
        let errs = parse_strict(sid(), tagged).unwrap_err();
        assert_eq!(errs.len(), 2);
        assert!(errs.iter().all(|e| e.reason == ParseErrorReason::UnknownTag));
        assert_eq!(errs[0].position, 0);
        let (s, errs) = parse_recover(sid(), tagged);
        assert_eq!(s.text, "kept text");
        assert!(s.spans.is_empty());
        assert_eq!(errs.len(), 2);
    }

    #[test]
    fn unknown_attribute_keeps_tag() {
        let tagged = "<Source Named Offcial>CDC</Source>";
        let errs = parse_strict(sid(), tagged).unwrap_err();
        assert_eq!(errs, vec![ParseError { position: 14, reason: ParseErrorReason::UnknownAttribute }]);
        let (s, _) = parse_recover(sid(), tagged);
        assert_eq!(s.spans.len(), 1);
        assert_eq!(s.spans[0].naming, Some(Naming::Named));
        assert_eq!(s.spans[0].source_type, None);
    }

    #[test]
    fn attribute_on_wrong_kind_is_unknown() {
        let errs = parse_strict(sid(), "<Recipient Named>NPR</Recipient>").unwrap_err();
        assert_eq!(errs[0].reason, ParseErrorReason::UnknownAttribute);
    }

    #[test]
    fn unmatched_close_is_reported() {
        let (s, errs) = parse_recover(sid(), "plain </Source> text");
        assert_eq!(s.text, "plain  text");
        assert_eq!(errs, vec![ParseError { position: 6, reason: ParseErrorReason::UnmatchedClose }]);
    }

    #[test]
    fn unclosed_open_is_reported_and_dropped() {
        let (s, errs) = parse_recover(sid(), "<Fact_Appeal Direct>claim text");
        assert_eq!(s.text, "claim text");
        assert!(s.spans.is_empty());
        assert_eq!(errs, vec![ParseError { position: 0, reason: ParseErrorReason::UnclosedOpen }]);
    }

    #[test]
    fn overlap_is_rejected_not_misreported() {
        // <A>x<B>y</A>z</B> — close of A while B is on top.
        let (s, errs) =
            parse_recover(sid(), "<Fact_Appeal>x<Source>y</Fact_Appeal>z</Source>");
        assert_eq!(s.text, "xyz");
        let reasons: Vec<_> = errs.iter().map(|e| e.reason).collect();
        assert!(reasons.contains(&ParseErrorReason::OverlapViolation));
        assert!(reasons.contains(&ParseErrorReason::UnclosedOpen));
        // The Source span survives; the overlapped Fact_Appeal is dropped.
        assert_eq!(s.spans.len(), 1);
        assert_eq!(s.spans[0].kind, TagKind::Source);
    }

    #[test]
    fn dropped_parent_reparents_children() {
        // Outer tag never closes; inner span must survive with no parent.
        let (s, _) = parse_recover(sid(), "<Fact_Appeal>x <Source Named Expert>Dr. A</Source> y");
        assert_eq!(s.spans.len(), 1);
        assert_eq!(s.spans[0].kind, TagKind::Source);
        assert_eq!(s.spans[0].parent, None);
    }

    #[test]
    fn non_tag_angle_brackets_are_literal() {
        let s = strict("3 < 5 and x > y and <not a tag!>");
        assert_eq!(s.text, "3 < 5 and x > y and <not a tag!>");
        assert!(s.spans.is_empty());
    }

    #[test]
    fn zero_width_span_is_dropped() {
        let (s, errs) = parse_recover(sid(), "a<Source></Source>b");
        assert_eq!(s.text, "ab");
        assert!(s.spans.is_empty());
        assert!(errs.is_empty());
    }

    #[test]
    fn offsets_are_chars_not_bytes() {
        let s = strict("<Fact_Appeal Direct>\u{201c}caf\u{e9} \u{2014} ok\u{201d}</Fact_Appeal> said X.");
        assert_eq!(s.spans[0].start, 0);
        assert_eq!(s.spans[0].end, 11);
        assert_eq!(s.span_text(&s.spans[0]), "\u{201c}caf\u{e9} \u{2014} ok\u{201d}");
    }

    #[test]
    fn untag_is_identity_on_plain_text() {
        assert_eq!(untag("no tags here"), "no tags here");
    }

    #[test]
    fn serialize_then_parse_round_trips() {
        let s = strict(
            "<Fact_Appeal Indirect>Cases, which <Source Unnamed Official>the dept</Source> \
             said rose,</Fact_Appeal> per <Source Named News_Report>NBC News</Source>.",
        );
        let wire = serialize(&s);
        let reparsed = parse_strict(sid(), &wire).expect("reparse");
        assert_eq!(reparsed, s);
        assert_eq!(serialize(&reparsed), wire);
    }
}
