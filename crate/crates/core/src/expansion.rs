//! Mention expansion before retrieval: abbreviation replacement, then
//! whole-mention synonym lookup that appends the concept's preferred name.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::Lexicon;
use crate::text::{fold, normalize_ws};

pub const ABBREVIATION_HEADER: &str = "abbreviation\texpansion";

#[derive(Debug, Error)]
pub enum ExpansionError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Case-folded abbreviation → expansion.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AbbreviationDict {
    entries: BTreeMap<String, String>,
}

impl AbbreviationDict {
    /// Adds an entry. Empty keys, empty expansions and self-mappings are ignored
    /// and reported as `false`.
    pub fn insert(&mut self, abbreviation: &str, expansion: &str) -> bool {
        let key = fold(abbreviation);
        let value = normalize_ws(expansion);
        if key.is_empty() || value.is_empty() || fold(&value) == key {
            return false;
        }
        self.entries.insert(key, value);
        true
    }

    pub fn get(&self, token: &str) -> Option<&str> {
        self.entries.get(&token.to_lowercase()).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Reads the two-column TSV. Lines starting with `#` are comments.
    pub fn parse(mut source: impl Read) -> Result<Self, ExpansionError> {
        let mut text = String::new();
        source.read_to_string(&mut text)?;
        Self::parse_str(&text)
    }

    pub fn parse_str(text: &str) -> Result<Self, ExpansionError> {
        let mut dict = AbbreviationDict::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let raw = raw.trim_end_matches('\r');
            if raw.trim().is_empty() || raw.starts_with('#') {
                continue;
            }
            if idx == 0 && raw == ABBREVIATION_HEADER {
                continue;
            }
            let cells: Vec<&str> = raw.split('\t').collect();
            if cells.len() != 2 {
                return Err(ExpansionError::Malformed {
                    line,
                    message: format!("expected 2 tab-separated columns, found {}", cells.len()),
                });
            }
            if cells[0].split_whitespace().count() != 1 {
                return Err(ExpansionError::Malformed {
                    line,
                    message: format!("abbreviation {:?} must be a single token", cells[0]),
                });
            }
            if !dict.insert(cells[0], cells[1]) {
                return Err(ExpansionError::Malformed {
                    line,
                    message: format!("unusable entry {:?} -> {:?}", cells[0], cells[1]),
                });
            }
        }
        Ok(dict)
    }
}

impl<'a> FromIterator<(&'a str, &'a str)> for AbbreviationDict {
    fn from_iter<T: IntoIterator<Item = (&'a str, &'a str)>>(iter: T) -> Self {
        let mut dict = AbbreviationDict::default();
        for (k, v) in iter {
            dict.insert(k, v);
        }
        dict
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expansion {
    Abbreviation,
    Synonym,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpandedMention {
    pub original: String,
    pub expanded: String,
    pub applied: BTreeSet<Expansion>,
}

impl ExpandedMention {
    /// A mention passed through with only whitespace normalization.
    pub fn unexpanded(mention: &str) -> Self {
        ExpandedMention {
            original: mention.to_string(),
            expanded: normalize_ws(mention),
            applied: BTreeSet::new(),
        }
    }
}

/// Which expansion steps to run; both on by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpansionOptions {
    pub abbreviations: bool,
    pub synonyms: bool,
}

impl Default for ExpansionOptions {
    fn default() -> Self {
        ExpansionOptions {
            abbreviations: true,
            synonyms: true,
        }
    }
}

/// Replaces each whitespace token that is a dictionary key. Single pass.
pub fn expand_abbreviations(mention: &str, dict: &AbbreviationDict) -> String {
    mention
        .split_whitespace()
        .map(|tok| dict.get(tok).unwrap_or(tok))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Appends the preferred name of the first concept that lists the whole
/// mention as a synonym. A mention that already is a preferred name is
/// returned unchanged.
pub fn expand_with_synonym(mention: &str, lexicon: &Lexicon) -> String {
    if !lexicon.find_by_name(mention).is_empty() {
        return mention.to_string();
    }
    let target = lexicon
        .find_by_surface(mention)
        .into_iter()
        .find_map(|id| lexicon.lookup(&id))
        .filter(|c| fold(&c.preferred_name) != fold(mention));
    match target {
        Some(concept) => format!("{} {}", mention, concept.preferred_name),
        None => mention.to_string(),
    }
}

pub fn expand_mention(
    mention: &str,
    lexicon: &Lexicon,
    dict: &AbbreviationDict,
) -> ExpandedMention {
    expand_mention_with(mention, lexicon, dict, ExpansionOptions::default())
}

pub fn expand_mention_with(
    mention: &str,
    lexicon: &Lexicon,
    dict: &AbbreviationDict,
    options: ExpansionOptions,
) -> ExpandedMention {
    let mut applied = BTreeSet::new();
    let mut current = normalize_ws(mention);
    if options.abbreviations {
        let next = expand_abbreviations(&current, dict);
        if next != current {
            applied.insert(Expansion::Abbreviation);
            current = next;
        }
    }
    if options.synonyms {
        let next = expand_with_synonym(&current, lexicon);
        if next != current {
            applied.insert(Expansion::Synonym);
            current = next;
        }
    }
    ExpandedMention {
        original: mention.to_string(),
        expanded: normalize_ws(&current),
        applied,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::parse_lexicon_str;
    use proptest::prelude::*;

    fn lexicon() -> Lexicon {
        parse_lexicon_str(
            "rid\tpreferred_name\tsynonyms\tparents\tdefinition\n\
             RID5055\tdisorder of brain\tencephalopathy\t\t\n\
             RID1534\tcostophrenic sulcus\tcostophrenic angle\t\t\n\
             RID200\tbrain disease\tencephalopathy|cerebropathy\t\t\n\
             RID300\tenteric tube\tnasogastric tube\t\t\n",
        )
        .unwrap()
    }

    fn dict() -> AbbreviationDict {
        [
            ("NGT", "nasogastric tube"),
            ("NPH", "normal pressure hydrocephalus"),
            ("CT", "computed tomography"),
        ]
        .into_iter()
        .collect()
    }

    #[test]
    fn abbreviation_examples() {
        assert_eq!(expand_abbreviations("NGT", &dict()), "nasogastric tube");
        assert_eq!(
            expand_abbreviations("NPH", &dict()),
            "normal pressure hydrocephalus"
        );
        assert_eq!(expand_abbreviations("ngt", &dict()), "nasogastric tube");
        assert_eq!(
            expand_abbreviations("pleural effusion", &dict()),
            "pleural effusion"
        );
    }

    #[test]
    fn abbreviation_expansion_is_single_pass() {
        let d: AbbreviationDict = [("A", "B x"), ("B", "never")].into_iter().collect();
        assert_eq!(expand_abbreviations("A", &d), "B x");
    }

    #[test]
    fn synonym_examples() {
        // RID200 has the lower RID, so it is the first synonym hit.
        assert_eq!(
            expand_with_synonym("encephalopathy", &lexicon()),
            "encephalopathy brain disease"
        );
        assert_eq!(
            expand_with_synonym("costophrenic sulcus", &lexicon()),
            "costophrenic sulcus"
        );
        assert_eq!(
            expand_with_synonym("costophrenic angle", &lexicon()),
            "costophrenic angle costophrenic sulcus"
        );
        assert_eq!(expand_with_synonym("lungs", &lexicon()), "lungs");
    }

    #[test]
    fn synonym_single_concept_example() {
        let lex = parse_lexicon_str(
            "rid\tpreferred_name\tsynonyms\tparents\tdefinition\nRID5055\tdisorder of brain\tencephalopathy\t\t",
        )
        .unwrap();
        assert_eq!(
            expand_with_synonym("encephalopathy", &lex),
            "encephalopathy disorder of brain"
        );
    }

    #[test]
    fn composed_expansion() {
        let e = expand_mention("NGT", &lexicon(), &dict());
        assert_eq!(e.expanded, "nasogastric tube enteric tube");
        assert_eq!(
            e.applied,
            BTreeSet::from([Expansion::Abbreviation, Expansion::Synonym])
        );

        let e = expand_mention("NGT", &Lexicon::default(), &dict());
        assert_eq!(e.expanded, "nasogastric tube");
        assert_eq!(e.applied, BTreeSet::from([Expansion::Abbreviation]));

        let e = expand_mention("lungs", &lexicon(), &dict());
        assert_eq!(e.expanded, "lungs");
        assert!(e.applied.is_empty());

        let e = expand_mention("CT  of   chest", &lexicon(), &dict());
        assert_eq!(e.expanded, "computed tomography of chest");
        assert_eq!(e.applied, BTreeSet::from([Expansion::Abbreviation]));
    }

    #[test]
    fn options_disable_steps() {
        let off = ExpansionOptions {
            abbreviations: false,
            synonyms: false,
        };
        assert_eq!(
            expand_mention_with("NGT", &lexicon(), &dict(), off),
            ExpandedMention::unexpanded("NGT")
        );
    }

    #[test]
    fn dict_parsing() {
        let d = AbbreviationDict::parse_str(
            "abbreviation\texpansion\n# comment\nNGT\tnasogastric tube\n",
        )
        .unwrap();
        assert_eq!(d.get("ngt"), Some("nasogastric tube"));
        assert!(AbbreviationDict::parse_str("NGT\n").is_err());
        assert!(AbbreviationDict::parse_str("NG T\tnasogastric tube\n").is_err());
        assert!(AbbreviationDict::parse_str("abc\tABC\n").is_err());
    }

    fn words() -> impl Strategy<Value = String> {
        proptest::collection::vec(
            prop_oneof![
                Just("NGT"),
                Just("ngt"),
                Just("CT"),
                Just("of"),
                Just("chest"),
                Just("encephalopathy"),
                Just("costophrenic"),
                Just("angle"),
                Just("lung"),
            ],
            0..5,
        )
        .prop_map(|w| w.join(" "))
    }

    proptest! {
        #[test]
        fn token_count_never_shrinks(m in words(), pad in "[ \t]{0,3}") {
            let input = format!("{pad}{m}{pad}");
            let e = expand_mention(&input, &lexicon(), &dict());
            prop_assert!(e.expanded.split_whitespace().count() >= input.split_whitespace().count());
            if e.applied.is_empty() {
                prop_assert_eq!(e.expanded, normalize_ws(&input));
            }
        }

        #[test]
        fn original_is_prefix_of_synonym_expansion(m in words()) {
            let out = expand_with_synonym(&m, &lexicon());
            prop_assert!(out.starts_with(&m));
        }

        #[test]
        fn rerun_with_applied_steps_disabled_adds_nothing(m in words()) {
            let e = expand_mention(&m, &lexicon(), &dict());
            let options = ExpansionOptions {
                abbreviations: !e.applied.contains(&Expansion::Abbreviation),
                synonyms: !e.applied.contains(&Expansion::Synonym),
            };
            let again = expand_mention_with(&e.expanded, &lexicon(), &dict(), options);
            prop_assert!(!again.applied.contains(&Expansion::Synonym));
            if !e.applied.contains(&Expansion::Synonym) {
                prop_assert!(again.applied.is_empty());
                prop_assert_eq!(&again.expanded, &e.expanded);
            }
            let twice = expand_mention(&m, &lexicon(), &dict());
            prop_assert_eq!(twice, e);
        }
    }
}
