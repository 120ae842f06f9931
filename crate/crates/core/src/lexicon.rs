//! RadLex-style lexicon: concepts with preferred names, synonyms and Is-A
//! parents, parsed from a five-column TSV.
//!
//! ```text
//! rid<TAB>preferred_name<TAB>synonyms<TAB>parents<TAB>definition
//! RID1534<TAB>costophrenic sulcus<TAB>costophrenic angle<TAB>RID1243<TAB>
//! ```
//!
//! Synonyms and parents are `|`-separated. The last three cells may be empty.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{fold, normalize_ws};

/// Column header of the canonical lexicon TSV.
pub const LEXICON_HEADER: &str = "rid\tpreferred_name\tsynonyms\tparents\tdefinition";

const UNLINKABLE: &str = "XXXXX";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed concept id {0:?}: expected RID<digits> or XXXXX")]
pub struct InvalidConceptId(pub String);

/// A RadLex identifier (`RID1534`) or the RID-less sentinel `XXXXX`.
///
/// Ordering is by RID number, with the sentinel after every real RID.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ConceptId(String);

impl ConceptId {
    pub fn parse(s: &str) -> Result<Self, InvalidConceptId> {
        if s == UNLINKABLE {
            return Ok(Self::unlinkable());
        }
        match s.strip_prefix("RID") {
            Some(digits) if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) => {
                Ok(ConceptId(s.to_string()))
            }
            _ => Err(InvalidConceptId(s.to_string())),
        }
    }

    /// The RID-less sentinel.
    pub fn unlinkable() -> Self {
        ConceptId(UNLINKABLE.to_string())
    }

    pub fn is_unlinkable(&self) -> bool {
        self.0 == UNLINKABLE
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    fn digits(&self) -> Option<&str> {
        self.0
            .strip_prefix("RID")
            .map(|d| d.trim_start_matches('0'))
    }
}

impl Ord for ConceptId {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.digits(), other.digits()) {
            (Some(a), Some(b)) => a
                .len()
                .cmp(&b.len())
                .then_with(|| a.cmp(b))
                .then_with(|| self.0.cmp(&other.0)),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => Ordering::Equal,
        }
    }
}

impl PartialOrd for ConceptId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl FromStr for ConceptId {
    type Err = InvalidConceptId;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl TryFrom<String> for ConceptId {
    type Error = InvalidConceptId;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        Self::parse(&s)
    }
}

impl From<ConceptId> for String {
    fn from(id: ConceptId) -> String {
        id.0
    }
}

impl fmt::Display for ConceptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for ConceptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Concept {
    pub id: ConceptId,
    pub preferred_name: String,
    pub synonyms: Vec<String>,
    pub parents: Vec<ConceptId>,
    pub definition: Option<String>,
}

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("line {line}: {source}")]
    MalformedRid {
        line: usize,
        #[source]
        source: InvalidConceptId,
    },
    #[error("line {line}: duplicate concept {rid}")]
    DuplicateRid { line: usize, rid: ConceptId },
    #[error("line {line}: the sentinel XXXXX cannot be stored as a concept")]
    SentinelStored { line: usize },
    #[error("line {line}: concept {rid} has an empty preferred name")]
    EmptyPreferredName { line: usize, rid: ConceptId },
    #[error("line {line}: concept {rid} lists itself as a parent")]
    SelfParent { line: usize, rid: ConceptId },
    #[error("line {line}: expected at most 5 tab-separated columns, found {found}")]
    TooManyColumns { line: usize, found: usize },
    #[error("line {line}: expected at least rid and preferred_name columns")]
    MissingColumns { line: usize },
    #[error("unexpected lexicon header {0:?}")]
    BadHeader(String),
    #[error("referential integrity: {child} names unknown parent {parent}")]
    DanglingParent { child: ConceptId, parent: ConceptId },
    #[error("radlex import: missing column {0:?}")]
    MissingImportColumn(&'static str),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Immutable, indexed collection of concepts.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    concepts: BTreeMap<ConceptId, Concept>,
    synonym_index: HashMap<String, Vec<ConceptId>>,
    name_index: HashMap<String, Vec<ConceptId>>,
    /// Release tag of the source vocabulary, when known.
    pub version: Option<String>,
}

impl PartialEq for Lexicon {
    fn eq(&self, other: &Self) -> bool {
        self.concepts == other.concepts
    }
}

impl Eq for Lexicon {}

impl Lexicon {
    /// Validates and indexes a set of concepts. `lines` carries the source line
    /// of each concept for error reporting (0 when not from a file).
    fn build(rows: Vec<(usize, Concept)>) -> Result<Self, LexiconError> {
        let mut concepts = BTreeMap::new();
        for (line, concept) in rows {
            if concepts.contains_key(&concept.id) {
                return Err(LexiconError::DuplicateRid {
                    line,
                    rid: concept.id,
                });
            }
            concepts.insert(concept.id.clone(), concept);
        }
        for concept in concepts.values() {
            for parent in &concept.parents {
                if !concepts.contains_key(parent) {
                    return Err(LexiconError::DanglingParent {
                        child: concept.id.clone(),
                        parent: parent.clone(),
                    });
                }
            }
        }

        let mut synonym_index: HashMap<String, Vec<ConceptId>> = HashMap::new();
        let mut name_index: HashMap<String, Vec<ConceptId>> = HashMap::new();
        // BTreeMap iteration is ascending by RID, so every posting list is sorted.
        for concept in concepts.values() {
            name_index
                .entry(fold(&concept.preferred_name))
                .or_default()
                .push(concept.id.clone());
            for syn in &concept.synonyms {
                synonym_index
                    .entry(fold(syn))
                    .or_default()
                    .push(concept.id.clone());
            }
        }

        Ok(Lexicon {
            concepts,
            synonym_index,
            name_index,
            version: None,
        })
    }

    /// Builds a lexicon from in-memory concepts, applying the same cleanup and
    /// validation as [`parse_lexicon`].
    pub fn from_concepts(
        concepts: impl IntoIterator<Item = Concept>,
    ) -> Result<Self, LexiconError> {
        let rows = concepts
            .into_iter()
            .map(|c| {
                let cleaned = clean_concept(
                    0,
                    c.id,
                    &c.preferred_name,
                    c.synonyms,
                    c.parents,
                    c.definition,
                )?;
                Ok((0, cleaned))
            })
            .collect::<Result<Vec<_>, LexiconError>>()?;
        Self::build(rows)
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    /// Concepts in ascending RID order.
    pub fn concepts(&self) -> impl Iterator<Item = &Concept> {
        self.concepts.values()
    }

    pub fn lookup(&self, id: &ConceptId) -> Option<&Concept> {
        self.concepts.get(id)
    }

    pub fn contains(&self, id: &ConceptId) -> bool {
        self.concepts.contains_key(id)
    }

    /// Concepts whose preferred name or synonym equals `surface` after case
    /// folding and whitespace normalization. Preferred-name hits come first;
    /// within each group ids ascend.
    pub fn find_by_surface(&self, surface: &str) -> Vec<ConceptId> {
        let key = fold(surface);
        if key.is_empty() {
            return Vec::new();
        }
        let mut out: Vec<ConceptId> = self.name_index.get(&key).cloned().unwrap_or_default();
        if let Some(ids) = self.synonym_index.get(&key) {
            for id in ids {
                if !out.contains(id) {
                    out.push(id.clone());
                }
            }
        }
        out
    }

    /// Concepts whose preferred name folds to the same key as `name`.
    pub fn find_by_name(&self, name: &str) -> &[ConceptId] {
        self.name_index
            .get(&fold(name))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Concepts that list `surface` (folded) as a synonym.
    pub fn find_by_synonym(&self, surface: &str) -> &[ConceptId] {
        self.synonym_index
            .get(&fold(surface))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Preferred name of the first Is-A parent.
    pub fn class_of(&self, id: &ConceptId) -> Option<&str> {
        let concept = self.lookup(id)?;
        let parent = concept.parents.first()?;
        self.lookup(parent).map(|p| p.preferred_name.as_str())
    }

    /// Canonical TSV: header plus one row per concept in ascending RID order.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(LEXICON_HEADER);
        out.push('\n');
        for c in self.concepts.values() {
            let parents: Vec<&str> = c.parents.iter().map(ConceptId::as_str).collect();
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                c.id,
                c.preferred_name,
                c.synonyms.join("|"),
                parents.join("|"),
                c.definition.as_deref().unwrap_or("")
            ));
        }
        out
    }
}

fn clean_concept(
    line: usize,
    id: ConceptId,
    preferred_name: &str,
    synonyms: Vec<String>,
    parents: Vec<ConceptId>,
    definition: Option<String>,
) -> Result<Concept, LexiconError> {
    if id.is_unlinkable() {
        return Err(LexiconError::SentinelStored { line });
    }
    let preferred_name = normalize_ws(preferred_name);
    if preferred_name.is_empty() {
        return Err(LexiconError::EmptyPreferredName { line, rid: id });
    }
    let mut seen: HashSet<String> = HashSet::from([fold(&preferred_name)]);
    let synonyms = synonyms
        .into_iter()
        .map(|s| normalize_ws(&s))
        .filter(|s| !s.is_empty() && seen.insert(fold(s)))
        .collect();
    let mut unique_parents: Vec<ConceptId> = Vec::with_capacity(parents.len());
    for p in parents {
        if p == id {
            return Err(LexiconError::SelfParent { line, rid: id });
        }
        if !unique_parents.contains(&p) {
            unique_parents.push(p);
        }
    }
    let definition = definition
        .map(|d| d.trim().to_string())
        .filter(|d| !d.is_empty());
    Ok(Concept {
        id,
        preferred_name,
        synonyms,
        parents: unique_parents,
        definition,
    })
}

fn split_pipes(cell: &str) -> impl Iterator<Item = &str> {
    cell.split('|').map(str::trim).filter(|s| !s.is_empty())
}

/// Parses the canonical lexicon TSV. Row order does not affect the result.
pub fn parse_lexicon(mut source: impl Read) -> Result<Lexicon, LexiconError> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    parse_lexicon_str(&text)
}

pub fn parse_lexicon_str(text: &str) -> Result<Lexicon, LexiconError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end_matches('\r') == LEXICON_HEADER => {}
        Some((_, header)) => return Err(LexiconError::BadHeader(header.to_string())),
        None => return Ok(Lexicon::default()),
    }
    let mut rows = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        let raw = raw.trim_end_matches('\r');
        if raw.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = raw.split('\t').collect();
        if cells.len() > 5 {
            return Err(LexiconError::TooManyColumns {
                line,
                found: cells.len(),
            });
        }
        if cells.len() < 2 {
            return Err(LexiconError::MissingColumns { line });
        }
        let cell = |i: usize| cells.get(i).copied().unwrap_or("");
        let id = ConceptId::parse(cell(0).trim())
            .map_err(|source| LexiconError::MalformedRid { line, source })?;
        let synonyms = split_pipes(cell(2)).map(str::to_string).collect();
        let parents = split_pipes(cell(3))
            .map(ConceptId::parse)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|source| LexiconError::MalformedRid { line, source })?;
        let definition = Some(cell(4).to_string());
        rows.push((
            line,
            clean_concept(line, id, cell(1), synonyms, parents, definition)?,
        ));
    }
    Lexicon::build(rows)
}

/// Counters reported by [`import_radlex_csv`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ImportSummary {
    pub imported: usize,
    pub skipped_non_rid: usize,
    pub dropped_parents: usize,
}

fn rid_from_iri(iri: &str) -> Option<ConceptId> {
    let tail = iri.rsplit(['/', '#']).next()?.trim();
    ConceptId::parse(tail).ok().filter(|id| !id.is_unlinkable())
}

/// Reads an official RadLex class export (CSV with `Class ID`, `Preferred Label`,
/// `Synonyms`, `Parents` and optionally `Definitions` columns) into a lexicon.
///
/// Rows whose class IRI is not a RID are skipped; parents outside the imported
/// set (e.g. `owl#Thing`, obsolete classes) are dropped.
pub fn import_radlex_csv(source: impl Read) -> Result<(Lexicon, ImportSummary), LexiconError> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(source);
    let headers = reader.headers()?.clone();
    let column = |name: &'static str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or(LexiconError::MissingImportColumn(name))
    };
    let id_col = column("Class ID")?;
    let label_col = column("Preferred Label")?;
    let syn_col = column("Synonyms")?;
    let parent_col = column("Parents")?;
    let def_col = column("Definitions").ok();

    let mut summary = ImportSummary::default();
    let mut staged = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let line = idx + 2;
        let field = |i: usize| record.get(i).unwrap_or("");
        let Some(id) = rid_from_iri(field(id_col)) else {
            summary.skipped_non_rid += 1;
            continue;
        };
        if field(label_col).trim().is_empty() {
            summary.skipped_non_rid += 1;
            continue;
        }
        let synonyms: Vec<String> = split_pipes(field(syn_col)).map(str::to_string).collect();
        let parents: Vec<ConceptId> = split_pipes(field(parent_col))
            .filter_map(rid_from_iri)
            .collect();
        let definition = def_col.map(|c| field(c).to_string());
        staged.push((
            line,
            id,
            field(label_col).to_string(),
            synonyms,
            parents,
            definition,
        ));
    }

    let known: HashSet<ConceptId> = staged.iter().map(|s| s.1.clone()).collect();
    let mut rows = Vec::with_capacity(staged.len());
    for (line, id, label, synonyms, parents, definition) in staged {
        let before = parents.len();
        let parents: Vec<ConceptId> = parents
            .into_iter()
            .filter(|p| known.contains(p) && *p != id)
            .collect();
        summary.dropped_parents += before - parents.len();
        rows.push((
            line,
            clean_concept(line, id, &label, synonyms, parents, definition)?,
        ));
    }
    summary.imported = rows.len();
    Ok((Lexicon::build(rows)?, summary))
}
