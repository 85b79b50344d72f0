//! Rule-based sentence boundary detection.
//!
//! The default splitter breaks on terminal punctuation (. ! ?) followed by
//! whitespace and an uppercase/digit/quote sentence opener, absorbing
//! closing quotes and brackets, and refusing to split after a known
//! abbreviation. Splits happen only at whitespace, so joining the trimmed
//! sentences with single spaces and collapsing whitespace always reproduces
//! the whitespace-collapsed body.

/// Pluggable segmentation strategy. Implementations must be deterministic.
pub trait SentenceSegmenter: Send + Sync {
    fn split(&self, text: &str) -> Vec<String>;
}

/// Lowercased abbreviations (with trailing period) that never end a sentence.
const ABBREVIATIONS: &[&str] = &[
    "mr.", "mrs.", "ms.", "dr.", "prof.", "sen.", "rep.", "gov.", "gen.", "col.", "capt.",
    "lt.", "sgt.", "cmdr.", "jr.", "sr.", "st.", "mt.", "inc.", "corp.", "co.", "ltd.", "llc.",
    "vs.", "etc.", "e.g.", "i.e.", "jan.", "feb.", "mar.", "apr.", "jun.", "jul.", "aug.",
    "sep.", "sept.", "oct.", "nov.", "dec.", "u.s.", "u.k.", "u.n.", "d.c.", "a.m.", "p.m.",
    "ph.d.",
];

/// Default deterministic splitter.
pub struct RuleSegmenter {
    abbreviations: Vec<&'static str>,
}

impl Default for RuleSegmenter {
    fn default() -> Self {
        RuleSegmenter { abbreviations: ABBREVIATIONS.to_vec() }
    }
}

const CLOSERS: [char; 6] = ['"', '\'', '\u{201d}', '\u{2019}', ')', ']'];
const OPENERS: [char; 4] = ['"', '\'', '\u{201c}', '\u{2018}'];

impl RuleSegmenter {
    fn ends_with_abbreviation(&self, chars: &[char], dot: usize) -> bool {
        // Token is the maximal run of letters and periods ending at `dot`.
        let mut start = dot;
        while start > 0 {
            let c = chars[start - 1];
            if c.is_alphabetic() || c == '.' {
                start -= 1;
            } else {
                break;
            }
        }
        if start == dot {
            return false;
        }
        let token: String = chars[start..=dot].iter().collect::<String>().to_lowercase();
        self.abbreviations.iter().any(|a| *a == token)
    }
}

impl SentenceSegmenter for RuleSegmenter {
    fn split(&self, text: &str) -> Vec<String> {
        let chars: Vec<char> = text.chars().collect();
        let mut sentences = Vec::new();
        let mut start = 0usize;
        let mut i = 0usize;
        while i < chars.len() {
            let c = chars[i];
            if matches!(c, '.' | '!' | '?') {
                // Absorb closing quotes/brackets after the terminal mark.
                let mut j = i + 1;
                while j < chars.len() && CLOSERS.contains(&chars[j]) {
                    j += 1;
                }
                let at_end = j >= chars.len();
                let boundary = if at_end {
                    true
                } else if !chars[j].is_whitespace() {
                    false
                } else {
                    // Next sentence must open with something sentence-like.
                    let next = chars[j..].iter().copied().find(|c| !c.is_whitespace());
                    matches!(next, Some(n) if n.is_uppercase() || n.is_numeric() || OPENERS.contains(&n))
                };
                let abbreviation = c == '.' && self.ends_with_abbreviation(&chars, i);
                if boundary && !abbreviation {
                    let sentence: String = chars[start..j].iter().collect();
                    let trimmed = sentence.trim();
                    if !trimmed.is_empty() {
                        sentences.push(trimmed.to_string());
                    }
                    start = j;
                    i = j;
                    continue;
                }
            }
            i += 1;
        }
        let tail: String = chars[start..].iter().collect();
        let trimmed = tail.trim();
        if !trimmed.is_empty() {
            sentences.push(trimmed.to_string());
        }
        sentences
    }
}
