use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{EntityClass, Report};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CorpusStats {
    pub per_class_counts: BTreeMap<EntityClass, usize>,
    pub total_mentions: usize,
    pub unlinkable_mentions: usize,
    pub distinct_concepts: usize,
}

pub fn corpus_stats(reports: &[Report]) -> CorpusStats {
    let mut per_class_counts: BTreeMap<EntityClass, usize> =
        EntityClass::ALL.iter().map(|&c| (c, 0)).collect();
    let mut unlinkable_mentions = 0;
    let mut concepts = BTreeSet::new();
    for m in reports.iter().flat_map(|r| &r.mentions) {
        *per_class_counts.entry(m.entity_class).or_default() += 1;
        if m.gold_concept.is_unlinkable() {
            unlinkable_mentions += 1;
        } else {
            concepts.insert(m.gold_concept.clone());
        }
    }
    CorpusStats {
        total_mentions: per_class_counts.values().sum(),
        per_class_counts,
        unlinkable_mentions,
        distinct_concepts: concepts.len(),
    }
}

impl CorpusStats {
    fn count(&self, class: EntityClass) -> usize {
        self.per_class_counts.get(&class).copied().unwrap_or(0)
    }

    /// Markdown table in the layout of the published corpus statistics, where
    /// procedures and procedure steps share one "Procedure-Related" row.
    pub fn to_markdown(&self) -> String {
        use EntityClass::*;
        let rows: [(&str, usize); 9] = [
            ("Clinical Finding", self.count(ClinicalFinding)),
            ("Imaging Observation", self.count(ImagingObservation)),
            ("Anatomical Entity", self.count(AnatomicalEntity)),
            ("Medical Device", self.count(MedicalDevice)),
            ("RadLex Descriptor", self.count(RadLexDescriptor)),
            (
                "Procedure-Related",
                self.count(Procedure) + self.count(ProcedureStep),
            ),
            ("Process", self.count(Process)),
            ("Imaging Modality", self.count(ImagingModality)),
            ("Property", self.count(Property)),
        ];
        let mut out = String::from("| Item | Frequency |\n|---|---:|\n");
        for (label, n) in rows {
            out.push_str(&format!("| {label} | {n} |\n"));
        }
        out.push_str(&format!(
            "| Total entity mentions | {} |\n",
            self.total_mentions
        ));
        out.push_str(&format!(
            "| Unlinkable mentions | {} |\n",
            self.unlinkable_mentions
        ));
        out.push_str(&format!(
            "| Distinct concepts | {} |\n",
            self.distinct_concepts
        ));
        out
    }
}
