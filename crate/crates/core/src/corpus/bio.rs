use super::{CorpusError, Report};
use crate::span_detection::{Tag, TaggedSentence, Token};
use crate::text::char_slice;

/// Model-free tokenizer: whitespace split, then leading and trailing
/// non-alphanumeric characters peeled off as one-character tokens.
/// `base` is added to every offset.
pub fn tokenize(text: &str, base: usize) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() && !chars[i].is_whitespace() {
            i += 1;
        }
        let end = i;
        let mut lo = start;
        let mut hi = end;
        let mut trailing = Vec::new();
        while lo < hi && !chars[lo].is_alphanumeric() {
            tokens.push(Token::new(chars[lo].to_string(), base + lo, base + lo + 1));
            lo += 1;
        }
        while hi > lo && !chars[hi - 1].is_alphanumeric() {
            trailing.push(Token::new(
                chars[hi - 1].to_string(),
                base + hi - 1,
                base + hi,
            ));
            hi -= 1;
        }
        if lo < hi {
            tokens.push(Token::new(
                chars[lo..hi].iter().collect(),
                base + lo,
                base + hi,
            ));
        }
        tokens.extend(trailing.into_iter().rev());
    }
    tokens
}

/// BIO-tags every sentence of `report` against its gold mentions.
///
/// The first token overlapping a mention is `B`, later overlapping tokens `I`.
pub fn to_bio(report: &Report) -> Result<Vec<TaggedSentence>, CorpusError> {
    for (i, a) in report.mentions.iter().enumerate() {
        for b in &report.mentions[i + 1..] {
            if a.overlaps(b) {
                return Err(CorpusError::OverlappingMentions {
                    a: a.id.clone(),
                    b: b.id.clone(),
                });
            }
        }
    }
    let mut out = Vec::with_capacity(report.sentences.len());
    for &(start, end) in &report.sentences {
        let text = char_slice(&report.text, start, end).unwrap_or_default();
        let tokens = tokenize(text, start);
        let mut tags = Vec::with_capacity(tokens.len());
        let mut previous: Option<usize> = None;
        for tok in &tokens {
            let hit = report
                .mentions
                .iter()
                .position(|m| tok.start < m.span_end && m.span_start < tok.end);
            tags.push(match hit {
                Some(idx) if previous == Some(idx) => Tag::I,
                Some(_) => Tag::B,
                None => Tag::O,
            });
            previous = hit;
        }
        out.push(TaggedSentence::new(tokens, tags).expect("tags built per token"));
    }
    Ok(out)
}
