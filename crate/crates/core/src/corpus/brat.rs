//! BRAT standoff reading and writing.
//!
//! Lines understood in `.ann`:
//!
//! ```text
//! T1<TAB>AnatomicalEntity 10 29<TAB>costophrenic angle
//! N1<TAB>Reference T1 RadLex:RID1534<TAB>costophrenic sulcus
//! A1<TAB>RIDless T2
//! S1<TAB>0 42
//! ```
//!
//! Other record types (`R`, `E`, `#`, ...) are ignored.

use std::collections::HashMap;

use super::{CorpusError, Mention, ModalityGroup, Report};
use crate::lexicon::ConceptId;
use crate::text::{char_len, char_slice};

fn malformed(line: usize, message: impl Into<String>) -> CorpusError {
    CorpusError::Malformed {
        line,
        message: message.into(),
    }
}

fn parse_offset(line: usize, s: &str) -> Result<usize, CorpusError> {
    s.parse()
        .map_err(|_| malformed(line, format!("offset {s:?} is not a non-negative integer")))
}

struct PendingMention {
    id: String,
    class: super::EntityClass,
    start: usize,
    end: usize,
    surface: String,
}

/// Parses one report from its text and standoff annotation.
pub fn parse_brat_report(
    report_id: &str,
    modality_group: ModalityGroup,
    txt: &str,
    ann: &str,
) -> Result<Report, CorpusError> {
    let text_len = char_len(txt);
    let mut pending: Vec<PendingMention> = Vec::new();
    let mut norms: HashMap<String, ConceptId> = HashMap::new();
    let mut rid_less: Vec<(usize, String)> = Vec::new();
    let mut norm_lines: Vec<(usize, String)> = Vec::new();
    let mut sentences = Vec::new();

    for (idx, raw) in ann.lines().enumerate() {
        let line = idx + 1;
        let raw = raw.trim_end_matches('\r');
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        let record = fields[0];
        match record.chars().next() {
            Some('T') => {
                if fields.len() < 3 {
                    return Err(malformed(
                        line,
                        "text-bound annotation needs 3 tab-separated fields",
                    ));
                }
                let head: Vec<&str> = fields[1].split_whitespace().collect();
                if head.len() != 3 || fields[1].contains(';') {
                    return Err(malformed(
                        line,
                        "expected `<Class> <start> <end>`; discontinuous spans are not supported",
                    ));
                }
                let class = head[0]
                    .parse()
                    .map_err(|source| CorpusError::UnknownEntityClass { line, source })?;
                let start = parse_offset(line, head[1])?;
                let end = parse_offset(line, head[2])?;
                if pending.iter().any(|m| m.id == record) {
                    return Err(CorpusError::DuplicateMentionId(record.to_string()));
                }
                pending.push(PendingMention {
                    id: record.to_string(),
                    class,
                    start,
                    end,
                    surface: fields[2..].join("\t"),
                });
            }
            Some('N') => {
                let head: Vec<&str> = fields
                    .get(1)
                    .map(|f| f.split_whitespace().collect())
                    .unwrap_or_default();
                if head.len() != 3 || head[0] != "Reference" {
                    return Err(malformed(line, "expected `Reference T<k> RadLex:<RID>`"));
                }
                let target = head[1].to_string();
                let rid = head[2].strip_prefix("RadLex:").ok_or_else(|| {
                    malformed(
                        line,
                        format!("normalization {:?} is not a RadLex reference", head[2]),
                    )
                })?;
                let id = ConceptId::parse(rid).map_err(|e| malformed(line, e.to_string()))?;
                if norms.insert(target.clone(), id).is_some() {
                    return Err(CorpusError::DuplicateNormalization { tid: target });
                }
                norm_lines.push((line, target));
            }
            Some('A') | Some('M') => {
                let head: Vec<&str> = fields
                    .get(1)
                    .map(|f| f.split_whitespace().collect())
                    .unwrap_or_default();
                if head.len() == 2 && (head[0] == "RIDless" || head[0] == "RID-less") {
                    rid_less.push((line, head[1].to_string()));
                }
            }
            Some('S') => {
                let head: Vec<&str> = fields
                    .get(1)
                    .map(|f| f.split_whitespace().collect())
                    .unwrap_or_default();
                if head.len() != 2 {
                    return Err(malformed(line, "expected `S<k><TAB><start> <end>`"));
                }
                sentences.push((parse_offset(line, head[0])?, parse_offset(line, head[1])?));
            }
            _ => {}
        }
    }

    for (line, tid) in &norm_lines {
        if !pending.iter().any(|m| &m.id == tid) {
            return Err(CorpusError::DanglingNormalization {
                line: *line,
                tid: tid.clone(),
            });
        }
    }
    for (line, tid) in &rid_less {
        if !pending.iter().any(|m| &m.id == tid) {
            return Err(CorpusError::DanglingNormalization {
                line: *line,
                tid: tid.clone(),
            });
        }
    }

    let mut mentions = Vec::with_capacity(pending.len());
    for p in pending {
        if p.start >= p.end || p.end > text_len {
            return Err(CorpusError::OffsetOutOfBounds {
                tid: p.id,
                start: p.start,
                end: p.end,
                len: text_len,
            });
        }
        let actual = char_slice(txt, p.start, p.end).unwrap_or_default();
        if actual != p.surface {
            return Err(CorpusError::SurfaceMismatch {
                tid: p.id,
                annotated: p.surface,
                actual: actual.to_string(),
            });
        }
        let gold_concept = match norms.remove(&p.id) {
            Some(id) => id,
            None if rid_less.iter().any(|(_, t)| *t == p.id) => ConceptId::unlinkable(),
            None => return Err(CorpusError::MissingNormalization { tid: p.id }),
        };
        mentions.push(Mention {
            id: p.id,
            span_start: p.start,
            span_end: p.end,
            surface: p.surface,
            entity_class: p.class,
            gold_concept,
        });
    }
    mentions.sort_by_key(|a| (a.span_start, a.span_end));

    if sentences.is_empty() {
        sentences = split_sentences(txt);
    } else {
        sentences.sort();
        let mut prev_end = 0;
        for &(start, end) in &sentences {
            if start < prev_end || start >= end || end > text_len {
                return Err(CorpusError::BadSentence { start, end });
            }
            prev_end = end;
        }
    }

    Ok(Report {
        report_id: report_id.to_string(),
        modality_group,
        text: txt.to_string(),
        sentences,
        mentions,
    })
}

/// Rule-based fallback sentence splitter: a sentence ends at `.` followed by a
/// newline, or by spaces and an uppercase letter. Extents are trimmed.
pub fn split_sentences(text: &str) -> Vec<(usize, usize)> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut start = 0;
    let push = |out: &mut Vec<(usize, usize)>, s: usize, e: usize| {
        let mut s = s;
        let mut e = e;
        while s < e && chars[s].is_whitespace() {
            s += 1;
        }
        while e > s && chars[e - 1].is_whitespace() {
            e -= 1;
        }
        if s < e {
            out.push((s, e));
        }
    };
    let mut i = 0;
    while i < chars.len() {
        if chars[i] == '.' {
            let next = chars.get(i + 1).copied();
            let boundary = match next {
                Some('\n') | Some('\r') => true,
                Some(c) if c.is_whitespace() => {
                    let mut j = i + 1;
                    while j < chars.len() && chars[j] == ' ' {
                        j += 1;
                    }
                    chars.get(j).is_some_and(|c| c.is_uppercase() || *c == '\n')
                }
                _ => false,
            };
            if boundary {
                push(&mut out, start, i + 1);
                start = i + 1;
            }
        }
        i += 1;
    }
    push(&mut out, start, chars.len());
    out
}

/// Renders a report's annotations as `.ann` text (S, T and N lines).
pub fn write_brat_ann(report: &Report, names: &dyn Fn(&ConceptId) -> String) -> String {
    let mut out = String::new();
    for (k, (start, end)) in report.sentences.iter().enumerate() {
        out.push_str(&format!("S{}\t{start} {end}\n", k + 1));
    }
    for (k, m) in report.mentions.iter().enumerate() {
        out.push_str(&format!(
            "{}\t{} {} {}\t{}\n",
            m.id, m.entity_class, m.span_start, m.span_end, m.surface
        ));
        out.push_str(&format!(
            "N{}\tReference {} RadLex:{}\t{}\n",
            k + 1,
            m.id,
            m.gold_concept,
            names(&m.gold_concept)
        ));
    }
    out
}
