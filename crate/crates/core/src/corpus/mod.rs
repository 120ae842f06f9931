//! Annotated radiology reports: BRAT standoff ingestion, annotation rule
//! checks, descriptive statistics, inter-annotator agreement and BIO export.

mod agreement;
mod bio;
mod brat;
mod stats;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::ConceptId;

pub use agreement::{align_mentions, normalization_agreement, span_agreement_f1};
pub use bio::{to_bio, tokenize};
pub use brat::{parse_brat_report, split_sentences, write_brat_ann};
pub use stats::{corpus_stats, CorpusStats};

/// The closed set of annotated entity classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EntityClass {
    ClinicalFinding,
    ImagingObservation,
    AnatomicalEntity,
    MedicalDevice,
    RadLexDescriptor,
    Procedure,
    ProcedureStep,
    Process,
    ImagingModality,
    Property,
}

impl EntityClass {
    pub const ALL: [EntityClass; 10] = [
        EntityClass::ClinicalFinding,
        EntityClass::ImagingObservation,
        EntityClass::AnatomicalEntity,
        EntityClass::MedicalDevice,
        EntityClass::RadLexDescriptor,
        EntityClass::Procedure,
        EntityClass::ProcedureStep,
        EntityClass::Process,
        EntityClass::ImagingModality,
        EntityClass::Property,
    ];

    /// BRAT label, identical to the variant name.
    pub fn label(self) -> &'static str {
        match self {
            EntityClass::ClinicalFinding => "ClinicalFinding",
            EntityClass::ImagingObservation => "ImagingObservation",
            EntityClass::AnatomicalEntity => "AnatomicalEntity",
            EntityClass::MedicalDevice => "MedicalDevice",
            EntityClass::RadLexDescriptor => "RadLexDescriptor",
            EntityClass::Procedure => "Procedure",
            EntityClass::ProcedureStep => "ProcedureStep",
            EntityClass::Process => "Process",
            EntityClass::ImagingModality => "ImagingModality",
            EntityClass::Property => "Property",
        }
    }
}

impl fmt::Display for EntityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown entity class {0:?}")]
pub struct UnknownEntityClass(pub String);

impl FromStr for EntityClass {
    type Err = UnknownEntityClass;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EntityClass::ALL
            .into_iter()
            .find(|c| c.label() == s)
            .ok_or_else(|| UnknownEntityClass(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModalityGroup {
    ChestXray,
    BrainMri,
    Babygram,
    Other,
}

impl ModalityGroup {
    pub fn as_str(self) -> &'static str {
        match self {
            ModalityGroup::ChestXray => "chest_xray",
            ModalityGroup::BrainMri => "brain_mri",
            ModalityGroup::Babygram => "babygram",
            ModalityGroup::Other => "other",
        }
    }
}

impl FromStr for ModalityGroup {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "chest_xray" => Ok(ModalityGroup::ChestXray),
            "brain_mri" => Ok(ModalityGroup::BrainMri),
            "babygram" => Ok(ModalityGroup::Babygram),
            "other" => Ok(ModalityGroup::Other),
            _ => Err(format!("unknown modality group {s:?}")),
        }
    }
}

/// One annotated entity span. Offsets are character offsets, end exclusive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub id: String,
    pub span_start: usize,
    pub span_end: usize,
    pub surface: String,
    pub entity_class: EntityClass,
    pub gold_concept: ConceptId,
}

impl Mention {
    pub fn overlaps(&self, other: &Mention) -> bool {
        self.span_start < other.span_end && other.span_start < self.span_end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub report_id: String,
    pub modality_group: ModalityGroup,
    pub text: String,
    /// Sentence extents as character offsets, ascending and disjoint.
    pub sentences: Vec<(usize, usize)>,
    pub mentions: Vec<Mention>,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{tid}: offsets {start}..{end} outside report text of length {len}")]
    OffsetOutOfBounds {
        tid: String,
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("{tid}: annotated surface {annotated:?} differs from text slice {actual:?}")]
    SurfaceMismatch {
        tid: String,
        annotated: String,
        actual: String,
    },
    #[error("ann line {line}: {source}")]
    UnknownEntityClass {
        line: usize,
        #[source]
        source: UnknownEntityClass,
    },
    #[error("{tid}: more than one normalization; each mention takes a single RadLex ID")]
    DuplicateNormalization { tid: String },
    #[error("{tid}: no normalization line and no RID-less attribute")]
    MissingNormalization { tid: String },
    #[error("ann line {line}: normalization refers to unknown mention {tid}")]
    DanglingNormalization { line: usize, tid: String },
    #[error("ann line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("duplicate mention id {0}")]
    DuplicateMentionId(String),
    #[error("sentence lines must be ascending, disjoint and inside the text ({start}..{end})")]
    BadSentence { start: usize, end: usize },
    #[error("mentions {a} and {b} overlap")]
    OverlappingMentions { a: String, b: String },
    #[error("annotator report sets differ: {0}")]
    ReportSetMismatch(String),
    #[error("aligned sequences differ in length ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("aligned pair {index} does not share a span")]
    Misaligned { index: usize },
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<CorpusError>,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} line {line}: {message}")]
    Sidecar {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

/// Rule violations found by [`validate_annotations`]. Data, not failures.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Violation {
    UnknownConcept {
        mention_id: String,
        concept: ConceptId,
    },
    Overlap {
        first: String,
        second: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownConcept {
                mention_id,
                concept,
            } => {
                write!(
                    f,
                    "{mention_id}: gold concept {concept} is not in the lexicon"
                )
            }
            Violation::Overlap { first, second } => write!(f, "{first} overlaps {second}"),
        }
    }
}

/// Checks gold concepts against the lexicon and looks for overlapping spans.
pub fn validate_annotations(report: &Report, lexicon: &crate::lexicon::Lexicon) -> Vec<Violation> {
    let mut out = Vec::new();
    for m in &report.mentions {
        if !m.gold_concept.is_unlinkable() && !lexicon.contains(&m.gold_concept) {
            out.push(Violation::UnknownConcept {
                mention_id: m.id.clone(),
                concept: m.gold_concept.clone(),
            });
        }
    }
    for (i, a) in report.mentions.iter().enumerate() {
        for b in &report.mentions[i + 1..] {
            if a.overlaps(b) {
                out.push(Violation::Overlap {
                    first: a.id.clone(),
                    second: b.id.clone(),
                });
            }
        }
    }
    out
}

/// A collection of reports, typically loaded from a directory.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub reports: Vec<Report>,
}

/// Header of the report metadata sidecar.
pub const SIDECAR_HEADER: &str = "report_id\tmodality_group\ttxt_path\tann_path";
pub const SIDECAR_FILE: &str = "reports.tsv";

fn read_file(path: &Path) -> Result<String, CorpusError> {
    std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

impl Corpus {
    /// Loads `dir/reports.tsv` when present, otherwise every `<id>.txt` that has
    /// a sibling `<id>.ann` (modality `other`), sorted by id.
    pub fn load_dir(dir: &Path) -> Result<Self, CorpusError> {
        let sidecar = dir.join(SIDECAR_FILE);
        let entries: Vec<(String, ModalityGroup, PathBuf, PathBuf)> = if sidecar.exists() {
            let text = read_file(&sidecar)?;
            let mut rows = Vec::new();
            for (idx, line) in text.lines().enumerate() {
                let line_no = idx + 1;
                if idx == 0 {
                    if line.trim_end() != SIDECAR_HEADER {
                        return Err(CorpusError::Sidecar {
                            path: sidecar.clone(),
                            line: line_no,
                            message: format!("expected header {SIDECAR_HEADER:?}"),
                        });
                    }
                    continue;
                }
                if line.trim().is_empty() {
                    continue;
                }
                let cells: Vec<&str> = line.split('\t').collect();
                if cells.len() != 4 {
                    return Err(CorpusError::Sidecar {
                        path: sidecar.clone(),
                        line: line_no,
                        message: format!("expected 4 columns, found {}", cells.len()),
                    });
                }
                let modality = cells[1].parse().map_err(|message| CorpusError::Sidecar {
                    path: sidecar.clone(),
                    line: line_no,
                    message,
                })?;
                rows.push((
                    cells[0].to_string(),
                    modality,
                    dir.join(cells[2]),
                    dir.join(cells[3]),
                ));
            }
            rows
        } else {
            let listing = std::fs::read_dir(dir).map_err(|source| CorpusError::Io {
                path: dir.to_path_buf(),
                source,
            })?;
            let mut rows = Vec::new();
            for entry in listing {
                let path = entry
                    .map_err(|source| CorpusError::Io {
                        path: dir.to_path_buf(),
                        source,
                    })?
                    .path();
                if path.extension().is_some_and(|e| e == "txt") {
                    let ann = path.with_extension("ann");
                    if ann.exists() {
                        let id = path
                            .file_stem()
                            .unwrap_or_default()
                            .to_string_lossy()
                            .into_owned();
                        rows.push((id, ModalityGroup::Other, path, ann));
                    }
                }
            }
            rows.sort_by(|a, b| a.0.cmp(&b.0));
            rows
        };

        let mut reports = Vec::with_capacity(entries.len());
        for (id, modality, txt_path, ann_path) in entries {
            let txt = read_file(&txt_path)?;
            let ann = read_file(&ann_path)?;
            let report =
                parse_brat_report(&id, modality, &txt, &ann).map_err(|e| CorpusError::File {
                    path: ann_path.clone(),
                    source: Box::new(e),
                })?;
            reports.push(report);
        }
        Ok(Corpus { reports })
    }

    /// Writes `<id>.txt`, `<id>.ann` and the sidecar into `dir`.
    pub fn write_dir(
        &self,
        dir: &Path,
        names: &dyn Fn(&ConceptId) -> String,
    ) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut sidecar = String::from(SIDECAR_HEADER);
        sidecar.push('\n');
        for r in &self.reports {
            let txt = format!("{}.txt", r.report_id);
            let ann = format!("{}.ann", r.report_id);
            std::fs::write(dir.join(&txt), &r.text)?;
            std::fs::write(dir.join(&ann), write_brat_ann(r, names))?;
            sidecar.push_str(&format!(
                "{}\t{}\t{txt}\t{ann}\n",
                r.report_id,
                r.modality_group.as_str()
            ));
        }
        std::fs::write(dir.join(SIDECAR_FILE), sidecar)
    }

    pub fn report_ids(&self) -> Vec<String> {
        self.reports.iter().map(|r| r.report_id.clone()).collect()
    }

    pub fn get(&self, report_id: &str) -> Option<&Report> {
        self.reports.iter().find(|r| r.report_id == report_id)
    }

    pub fn mention_count(&self) -> usize {
        self.reports.iter().map(|r| r.mentions.len()).sum()
    }

    pub fn by_id(&self) -> BTreeMap<&str, &Report> {
        self.reports
            .iter()
            .map(|r| (r.report_id.as_str(), r))
            .collect()
    }
}
