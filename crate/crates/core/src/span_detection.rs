//! BIO tagging contract, a dictionary-matching baseline tagger and exact-match
//! span evaluation.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::tokenize;
use crate::lexicon::Lexicon;
use crate::num::{f1, ratio, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tag {
    B,
    I,
    O,
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tag::B => "B",
            Tag::I => "I",
            Tag::O => "O",
        })
    }
}

impl FromStr for Tag {
    type Err = SpanError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "B" => Ok(Tag::B),
            "I" => Ok(Tag::I),
            "O" => Ok(Tag::O),
            _ => Err(SpanError::UnknownTag(s.to_string())),
        }
    }
}

/// A token with character offsets into the report text.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

impl Token {
    pub fn new(text: String, start: usize, end: usize) -> Self {
        Token { text, start, end }
    }
}

#[derive(Debug, Error)]
pub enum SpanError {
    #[error("{tokens} tokens but {tags} tags")]
    LengthMismatch { tokens: usize, tags: usize },
    #[error("sentence {0}: predicted and gold tokenizations differ")]
    TokenizationMismatch(usize),
    #[error("{predicted} predicted sentences but {gold} gold sentences")]
    SentenceCountMismatch { predicted: usize, gold: usize },
    #[error("unknown tag {0:?}")]
    UnknownTag(String),
    #[error("line {line}: {message}")]
    Exchange { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedSentence {
    pub tokens: Vec<Token>,
    pub tags: Vec<Tag>,
}

impl TaggedSentence {
    /// Pairs tokens with tags. An `I` that does not continue a `B`/`I` run is
    /// promoted to `B`, so the stored sequence is always valid BIO.
    pub fn new(tokens: Vec<Token>, tags: Vec<Tag>) -> Result<Self, SpanError> {
        if tokens.len() != tags.len() {
            return Err(SpanError::LengthMismatch {
                tokens: tokens.len(),
                tags: tags.len(),
            });
        }
        Ok(TaggedSentence {
            tokens,
            tags: repair_bio(&tags),
        })
    }

    /// Entity extents as token index ranges `[first, last + 1)`.
    pub fn token_spans(&self) -> Vec<(usize, usize)> {
        decode_bio(&self.tags)
    }

    /// Entity extents as character offsets.
    pub fn char_spans(&self) -> Vec<(usize, usize)> {
        self.token_spans()
            .into_iter()
            .map(|(a, b)| (self.tokens[a].start, self.tokens[b - 1].end))
            .collect()
    }

    pub fn is_valid_bio(tags: &[Tag]) -> bool {
        let mut prev = Tag::O;
        for &t in tags {
            if t == Tag::I && prev == Tag::O {
                return false;
            }
            prev = t;
        }
        true
    }
}

/// Promotes every `I` that follows `O` (or starts the sequence) to `B`.
pub fn repair_bio(tags: &[Tag]) -> Vec<Tag> {
    let mut prev = Tag::O;
    tags.iter()
        .map(|&t| {
            let fixed = if t == Tag::I && prev == Tag::O {
                Tag::B
            } else {
                t
            };
            prev = fixed;
            fixed
        })
        .collect()
}

/// Token ranges of `B I*` runs; invalid `I`s are repaired first.
pub fn decode_bio(tags: &[Tag]) -> Vec<(usize, usize)> {
    let tags = repair_bio(tags);
    let mut spans = Vec::new();
    let mut open: Option<usize> = None;
    for (i, &t) in tags.iter().enumerate() {
        match t {
            Tag::B => {
                if let Some(s) = open.take() {
                    spans.push((s, i));
                }
                open = Some(i);
            }
            Tag::I => {}
            Tag::O => {
                if let Some(s) = open.take() {
                    spans.push((s, i));
                }
            }
        }
    }
    if let Some(s) = open {
        spans.push((s, tags.len()));
    }
    spans
}

/// Inverse of [`decode_bio`] for disjoint, sorted token ranges.
pub fn encode_bio(len: usize, spans: &[(usize, usize)]) -> Vec<Tag> {
    let mut tags = vec![Tag::O; len];
    for &(s, e) in spans {
        for (k, tag) in tags.iter_mut().enumerate().take(e).skip(s) {
            *tag = if k == s { Tag::B } else { Tag::I };
        }
    }
    tags
}

/// Greedy longest-leftmost phrase matcher over case-folded tokens.
#[derive(Debug, Clone, Default)]
pub struct DictionaryTagger {
    phrases: HashSet<Vec<String>>,
    max_len: usize,
}

fn phrase_key(text: &str) -> Vec<String> {
    tokenize(text, 0)
        .into_iter()
        .map(|t| t.text.to_lowercase())
        .collect()
}

impl DictionaryTagger {
    /// Phrases come from the gazetteer plus every preferred name and synonym.
    pub fn new<'a>(lexicon: &Lexicon, gazetteer: impl IntoIterator<Item = &'a str>) -> Self {
        let mut tagger = DictionaryTagger::default();
        for c in lexicon.concepts() {
            tagger.add(&c.preferred_name);
            for s in &c.synonyms {
                tagger.add(s);
            }
        }
        for g in gazetteer {
            tagger.add(g);
        }
        tagger
    }

    pub fn add(&mut self, phrase: &str) {
        let key = phrase_key(phrase);
        if key.is_empty() {
            return;
        }
        self.max_len = self.max_len.max(key.len());
        self.phrases.insert(key);
    }

    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }

    pub fn tag_tokens(&self, tokens: Vec<Token>) -> TaggedSentence {
        let folded: Vec<String> = tokens.iter().map(|t| t.text.to_lowercase()).collect();
        let mut tags = vec![Tag::O; tokens.len()];
        let mut i = 0;
        while i < folded.len() {
            let longest = (1..=self.max_len.min(folded.len() - i))
                .rev()
                .find(|&n| self.phrases.contains(&folded[i..i + n]));
            match longest {
                Some(n) => {
                    tags[i] = Tag::B;
                    for t in &mut tags[i + 1..i + n] {
                        *t = Tag::I;
                    }
                    i += n;
                }
                None => i += 1,
            }
        }
        TaggedSentence { tokens, tags }
    }

    /// Tags one sentence whose first character sits at `offset` in the report.
    pub fn tag(&self, sentence: &str, offset: usize) -> TaggedSentence {
        self.tag_tokens(tokenize(sentence, offset))
    }
}

/// Convenience wrapper building a throwaway [`DictionaryTagger`].
pub fn dictionary_tag<'a>(
    sentence: &str,
    offset: usize,
    lexicon: &Lexicon,
    gazetteer: impl IntoIterator<Item = &'a str>,
) -> TaggedSentence {
    DictionaryTagger::new(lexicon, gazetteer).tag(sentence, offset)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpanScores<S> {
    pub precision: S,
    pub recall: S,
    pub f1: S,
    pub true_positives: usize,
    pub predicted: usize,
    pub gold: usize,
}

/// Exact-match span precision, recall and F1, micro-pooled over sentences.
///
/// With no predicted spans precision is 0 unless gold is also empty, in which
/// case every score is 1.
pub fn evaluate_spans<S: Real>(
    predicted: &[TaggedSentence],
    gold: &[TaggedSentence],
) -> Result<SpanScores<S>, SpanError> {
    if predicted.len() != gold.len() {
        return Err(SpanError::SentenceCountMismatch {
            predicted: predicted.len(),
            gold: gold.len(),
        });
    }
    let (mut tp, mut n_pred, mut n_gold) = (0, 0, 0);
    for (k, (p, g)) in predicted.iter().zip(gold).enumerate() {
        if p.tokens != g.tokens {
            return Err(SpanError::TokenizationMismatch(k));
        }
        let ps: HashSet<(usize, usize)> = p.char_spans().into_iter().collect();
        let gs: HashSet<(usize, usize)> = g.char_spans().into_iter().collect();
        tp += ps.intersection(&gs).count();
        n_pred += ps.len();
        n_gold += gs.len();
    }
    let both_empty = n_pred == 0 && n_gold == 0;
    let empty = if both_empty { S::one() } else { S::zero() };
    let precision = ratio(tp, n_pred, empty);
    let recall = ratio(tp, n_gold, empty);
    let f = if both_empty {
        S::one()
    } else {
        f1(precision, recall)
    };
    Ok(SpanScores {
        precision,
        recall,
        f1: f,
        true_positives: tp,
        predicted: n_pred,
        gold: n_gold,
    })
}

/// CoNLL-like exchange: `token<TAB>start<TAB>end<TAB>tag`, blank line between
/// sentences.
pub fn write_conll(sentences: &[TaggedSentence]) -> String {
    let mut out = String::new();
    for (k, s) in sentences.iter().enumerate() {
        if k > 0 {
            out.push('\n');
        }
        for (t, tag) in s.tokens.iter().zip(&s.tags) {
            out.push_str(&format!("{}\t{}\t{}\t{}\n", t.text, t.start, t.end, tag));
        }
    }
    out
}

pub fn read_conll(text: &str) -> Result<Vec<TaggedSentence>, SpanError> {
    let mut out = Vec::new();
    let mut tokens = Vec::new();
    let mut tags = Vec::new();
    let flush = |tokens: &mut Vec<Token>,
                 tags: &mut Vec<Tag>,
                 out: &mut Vec<TaggedSentence>|
     -> Result<(), SpanError> {
        if !tokens.is_empty() {
            out.push(TaggedSentence::new(
                std::mem::take(tokens),
                std::mem::take(tags),
            )?);
        }
        Ok(())
    };
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            flush(&mut tokens, &mut tags, &mut out)?;
            continue;
        }
        let cells: Vec<&str> = line.split('\t').collect();
        if cells.len() != 4 {
            return Err(SpanError::Exchange {
                line: line_no,
                message: format!("expected 4 columns, found {}", cells.len()),
            });
        }
        let offset = |s: &str| {
            s.parse::<usize>().map_err(|_| SpanError::Exchange {
                line: line_no,
                message: format!("bad offset {s:?}"),
            })
        };
        tokens.push(Token::new(
            cells[0].to_string(),
            offset(cells[1])?,
            offset(cells[2])?,
        ));
        tags.push(cells[3].parse()?);
    }
    flush(&mut tokens, &mut tags, &mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::parse_lexicon_str;
    use proptest::prelude::*;

    fn lexicon() -> Lexicon {
        parse_lexicon_str("rid\tpreferred_name\tsynonyms\tparents\tdefinition\nRID1\tlung apex\t\t\t\nRID2\tright lung\t\t\t").unwrap()
    }

    fn sentence(tags: &[Tag]) -> TaggedSentence {
        let tokens = (0..tags.len())
            .map(|i| Token::new(format!("w{i}"), 3 * i, 3 * i + 2))
            .collect();
        TaggedSentence::new(tokens, tags.to_vec()).unwrap()
    }

    #[test]
    fn gazetteer_match() {
        let s = dictionary_tag(
            "pleural effusion noted",
            0,
            &Lexicon::default(),
            ["pleural effusion"],
        );
        assert_eq!(s.tags, vec![Tag::B, Tag::I, Tag::O]);
        let s = dictionary_tag("nothing here", 0, &Lexicon::default(), ["pleural effusion"]);
        assert_eq!(s.tags, vec![Tag::O, Tag::O]);
    }

    #[test]
    fn longest_leftmost_wins() {
        let s = dictionary_tag("Right lung apex", 0, &lexicon(), []);
        assert_eq!(s.tags, vec![Tag::B, Tag::I, Tag::O]);
        let s = dictionary_tag("Right lung apex", 0, &lexicon(), ["apex"]);
        assert_eq!(s.tags, vec![Tag::B, Tag::I, Tag::B]);
        let s = dictionary_tag("the lung apex.", 7, &lexicon(), []);
        assert_eq!(s.tags, vec![Tag::O, Tag::B, Tag::I, Tag::O]);
        assert_eq!(s.char_spans(), vec![(11, 20)]);
    }

    #[test]
    fn repair_promotes_orphan_inside() {
        assert_eq!(
            repair_bio(&[Tag::I, Tag::O, Tag::I, Tag::I]),
            vec![Tag::B, Tag::O, Tag::B, Tag::I]
        );
        assert_eq!(
            decode_bio(&[Tag::O, Tag::I, Tag::B, Tag::I]),
            vec![(1, 2), (2, 4)]
        );
    }

    #[test]
    fn evaluate_identical_and_empty() {
        let g = vec![sentence(&[Tag::B, Tag::I, Tag::O, Tag::B])];
        let s: SpanScores<f64> = evaluate_spans(&g, &g).unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
        let p = vec![sentence(&[Tag::O; 4])];
        let s: SpanScores<f64> = evaluate_spans(&p, &g).unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
        let s: SpanScores<f64> = evaluate_spans(&p, &p).unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn evaluate_three_predicted_four_gold_two_match() {
        use Tag::*;
        let gold = vec![sentence(&[B, I, O, B, O, B]), sentence(&[B, O, O])];
        let pred = vec![sentence(&[B, I, O, B, I, O]), sentence(&[B, O, O])];
        let s: SpanScores<f64> = evaluate_spans(&pred, &gold).unwrap();
        assert_eq!((s.true_positives, s.predicted, s.gold), (2, 3, 4));
        assert!((s.precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.recall - 0.5).abs() < 1e-12);
        assert!((s.f1 - 4.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn evaluate_rejects_mismatched_tokens() {
        let a = vec![sentence(&[Tag::O, Tag::O])];
        let b = vec![sentence(&[Tag::O])];
        assert!(matches!(
            evaluate_spans::<f64>(&a, &b),
            Err(SpanError::TokenizationMismatch(0))
        ));
        assert!(matches!(
            evaluate_spans::<f64>(&a, &[]),
            Err(SpanError::SentenceCountMismatch { .. })
        ));
    }

    #[test]
    fn conll_round_trip() {
        let sents = vec![sentence(&[Tag::B, Tag::I]), sentence(&[Tag::O])];
        assert_eq!(read_conll(&write_conll(&sents)).unwrap(), sents);
        assert!(read_conll("a\t0\t1\n").is_err());
        assert!(read_conll("a\t0\t1\tX\n").is_err());
    }

    fn valid_bio() -> impl Strategy<Value = Vec<Tag>> {
        proptest::collection::vec(prop_oneof![Just(Tag::B), Just(Tag::I), Just(Tag::O)], 0..30)
            .prop_map(|t| repair_bio(&t))
    }

    fn paired_bio() -> impl Strategy<Value = (Vec<Tag>, Vec<Tag>)> {
        (0usize..20).prop_flat_map(|n| {
            let tags = || {
                proptest::collection::vec(prop_oneof![Just(Tag::B), Just(Tag::I), Just(Tag::O)], n)
            };
            (tags(), tags())
        })
    }

    proptest! {
        #[test]
        fn decode_then_encode_is_identity(tags in valid_bio()) {
            prop_assert!(TaggedSentence::is_valid_bio(&tags));
            prop_assert_eq!(encode_bio(tags.len(), &decode_bio(&tags)), tags);
        }

        #[test]
        fn self_evaluation_is_perfect(tags in valid_bio(), extra in valid_bio()) {
            let sents = vec![sentence(&tags), sentence(&extra)];
            prop_assume!(sents.iter().any(|s| !s.token_spans().is_empty()));
            let s: SpanScores<f64> = evaluate_spans(&sents, &sents).unwrap();
            prop_assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
        }

        #[test]
        fn f1_invariant_to_sentence_order((a, c) in paired_bio(), (b, d) in paired_bio()) {
            let gold = vec![sentence(&a), sentence(&b)];
            let pred = vec![sentence(&c), sentence(&d)];
            let s1: SpanScores<f64> = evaluate_spans(&pred, &gold).unwrap();
            let gold_r: Vec<_> = gold.into_iter().rev().collect();
            let pred_r: Vec<_> = pred.into_iter().rev().collect();
            let s2: SpanScores<f64> = evaluate_spans(&pred_r, &gold_r).unwrap();
            prop_assert_eq!(s1.f1, s2.f1);
        }
    }
}
