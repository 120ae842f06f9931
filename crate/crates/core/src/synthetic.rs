//! Deterministic synthetic lexicon, abbreviation list and annotated corpus.
//!
//! The real annotated corpus is access-restricted, so the bundled fixture is
//! generated here: 50 short reports (17 chest radiographs, 16 brain MRIs, 17
//! babygrams) annotated with all ten entity classes, including synonym
//! mentions, unlinkable mentions and one abbreviation-only mention per
//! abbreviation item. Each abbreviation item is used exactly once and its
//! token occurs nowhere else, so it can only be retrieved through the
//! abbreviation dictionary. Identifiers are synthetic.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, EntityClass, Mention, ModalityGroup, Report};
use crate::expansion::{AbbreviationDict, ABBREVIATION_HEADER};
use crate::lexicon::{Concept, ConceptId, Lexicon};
use crate::retrieval::MentionRef;
use crate::text::char_len;

pub const DEFAULT_SEED: u64 = 2020;

/// `(rid, preferred name, synonyms separated by |, parent rid)`.
const CONCEPTS: &[(&str, &str, &str, &str)] = &[
    ("RID3", "anatomical entity", "", ""),
    ("RID5", "clinical finding", "", ""),
    ("RID6", "imaging observation", "", ""),
    ("RID10", "medical device", "", ""),
    ("RID11", "RadLex descriptor", "", ""),
    ("RID12", "procedure", "", ""),
    ("RID13", "procedure step", "", ""),
    ("RID14", "process", "", ""),
    ("RID15", "imaging modality", "", ""),
    ("RID16", "property", "", ""),
    // anatomy
    ("RID1301", "lung", "lungs|pulmonary parenchyma", "RID3"),
    ("RID1302", "right lung", "", "RID3"),
    ("RID1326", "left lung", "", "RID3"),
    (
        "RID1303",
        "upper lobe of right lung",
        "right upper lobe",
        "RID3",
    ),
    (
        "RID1310",
        "middle lobe of right lung",
        "right middle lobe",
        "RID3",
    ),
    (
        "RID1315",
        "lower lobe of right lung",
        "right lower lobe",
        "RID3",
    ),
    (
        "RID1327",
        "upper lobe of left lung",
        "left upper lobe",
        "RID3",
    ),
    (
        "RID1338",
        "lower lobe of left lung",
        "left lower lobe",
        "RID3",
    ),
    (
        "RID1534",
        "costophrenic sulcus",
        "costophrenic angle",
        "RID3",
    ),
    ("RID1385", "heart", "", "RID3"),
    ("RID1386", "cardiac silhouette", "", "RID3"),
    ("RID1384", "mediastinum", "", "RID3"),
    ("RID1243", "diaphragm", "hemidiaphragm", "RID3"),
    ("RID1247", "carina", "tracheal carina", "RID3"),
    ("RID480", "superior vena cava", "", "RID3"),
    ("RID481", "inferior vena cava", "", "RID3"),
    ("RID114", "stomach", "", "RID3"),
    ("RID115", "bowel", "intestine", "RID3"),
    ("RID116", "abdomen", "", "RID3"),
    ("RID117", "liver", "", "RID3"),
    ("RID118", "umbilicus", "", "RID3"),
    ("RID2502", "femur", "", "RID3"),
    ("RID2503", "skull", "", "RID3"),
    ("RID2504", "spine", "vertebral column", "RID3"),
    ("RID2505", "hip joint", "", "RID3"),
    ("RID2506", "rib", "ribs", "RID3"),
    ("RID6434", "brain", "", "RID3"),
    ("RID6440", "lateral ventricle", "lateral ventricles", "RID3"),
    ("RID6441", "cerebellum", "", "RID3"),
    ("RID6442", "frontal lobe", "", "RID3"),
    ("RID6443", "basal ganglia", "", "RID3"),
    ("RID6444", "corpus callosum", "", "RID3"),
    ("RID6445", "middle cerebral artery", "", "RID3"),
    ("RID6446", "internal carotid artery", "", "RID3"),
    ("RID6447", "posterior cerebral artery", "", "RID3"),
    ("RID6448", "anterior cerebral artery", "", "RID3"),
    ("RID6449", "cerebral white matter", "white matter", "RID3"),
    ("RID6450", "pituitary gland", "hypophysis", "RID3"),
    ("RID6451", "brainstem", "", "RID3"),
    (
        "RID6452",
        "posterior cranial fossa",
        "posterior fossa",
        "RID3",
    ),
    // clinical findings
    ("RID4872", "pleural effusion", "hydrothorax", "RID5"),
    ("RID5352", "pneumothorax", "", "RID5"),
    ("RID4866", "pulmonary edema", "", "RID5"),
    ("RID28493", "atelectasis", "", "RID5"),
    ("RID5350", "pneumonia", "", "RID5"),
    ("RID34786", "congestive heart failure", "", "RID5"),
    ("RID5220", "acute respiratory distress syndrome", "", "RID5"),
    ("RID5221", "respiratory distress syndrome", "", "RID5"),
    (
        "RID5317",
        "chronic obstructive pulmonary disease",
        "",
        "RID5",
    ),
    ("RID4834", "pulmonary embolism", "", "RID5"),
    ("RID4700", "hydrocephalus", "", "RID5"),
    ("RID4701", "cerebral infarction", "stroke", "RID5"),
    ("RID4702", "subarachnoid hemorrhage", "", "RID5"),
    ("RID4703", "subdural hematoma", "", "RID5"),
    ("RID4704", "epidural hematoma", "", "RID5"),
    ("RID4705", "intracranial hemorrhage", "", "RID5"),
    ("RID4706", "mass effect", "", "RID5"),
    ("RID4707", "midline shift", "", "RID5"),
    ("RID4710", "necrotizing enterocolitis", "", "RID5"),
    ("RID4711", "patent ductus arteriosus", "", "RID5"),
    ("RID4712", "atrial septal defect", "", "RID5"),
    ("RID4713", "ventricular septal defect", "", "RID5"),
    ("RID4714", "developmental dysplasia of the hip", "", "RID5"),
    ("RID4715", "transient tachypnea of the newborn", "", "RID5"),
    ("RID4716", "bronchopulmonary dysplasia", "", "RID5"),
    (
        "RID4717",
        "pneumoperitoneum",
        "free intraperitoneal air",
        "RID5",
    ),
    ("RID4718", "fracture", "", "RID5"),
    // imaging observations
    ("RID39050", "opacity", "opacification", "RID6"),
    (
        "RID43255",
        "consolidation",
        "airspace consolidation",
        "RID6",
    ),
    ("RID39051", "volume loss", "", "RID6"),
    ("RID39052", "pleural thickening", "", "RID6"),
    ("RID39053", "nodule", "", "RID6"),
    ("RID39054", "ground glass opacity", "", "RID6"),
    ("RID39055", "restricted diffusion", "", "RID6"),
    ("RID39056", "enhancement", "", "RID6"),
    ("RID39057", "hyperintensity", "", "RID6"),
    ("RID39058", "vasogenic edema", "", "RID6"),
    ("RID39059", "lesion", "", "RID6"),
    ("RID39060", "air-fluid level", "", "RID6"),
    (
        "RID39061",
        "pneumatosis intestinalis",
        "pneumatosis",
        "RID6",
    ),
    ("RID39062", "dilation", "dilatation", "RID6"),
    // devices
    ("RID5001", "nasogastric tube", "", "RID10"),
    ("RID5002", "endotracheal tube", "", "RID10"),
    (
        "RID5003",
        "thoracostomy tube",
        "chest tube|chest drain",
        "RID10",
    ),
    ("RID5004", "central venous catheter", "", "RID10"),
    (
        "RID5005",
        "peripherally inserted central catheter",
        "",
        "RID10",
    ),
    ("RID5006", "umbilical arterial catheter", "", "RID10"),
    ("RID5007", "umbilical venous catheter", "", "RID10"),
    (
        "RID5008",
        "ventriculoperitoneal shunt",
        "shunt catheter",
        "RID10",
    ),
    (
        "RID5009",
        "implantable cardioverter defibrillator",
        "",
        "RID10",
    ),
    ("RID5010", "pacemaker", "cardiac pacemaker", "RID10"),
    ("RID5011", "orogastric tube", "", "RID10"),
    ("RID5012", "tracheostomy tube", "", "RID10"),
    ("RID5013", "sternotomy wire", "sternotomy wires", "RID10"),
    // descriptors
    ("RID5671", "mild", "", "RID11"),
    ("RID5672", "moderate", "", "RID11"),
    ("RID5673", "severe", "", "RID11"),
    ("RID5674", "small", "", "RID11"),
    ("RID5675", "large", "", "RID11"),
    ("RID5676", "stable", "unchanged", "RID11"),
    ("RID5677", "new", "", "RID11"),
    ("RID5678", "increased", "", "RID11"),
    ("RID5679", "absent", "no", "RID11"),
    ("RID5680", "bilateral", "", "RID11"),
    ("RID5681", "acute", "", "RID11"),
    ("RID5682", "chronic", "", "RID11"),
    ("RID5683", "diffuse", "", "RID11"),
    ("RID5684", "normal", "", "RID11"),
    // procedures and steps
    ("RID7001", "thoracentesis", "", "RID12"),
    ("RID7002", "craniotomy", "", "RID12"),
    ("RID7003", "lumbar puncture", "", "RID12"),
    ("RID7004", "median sternotomy", "", "RID12"),
    ("RID7101", "comparison", "", "RID13"),
    ("RID7102", "contrast administration", "", "RID13"),
    // processes
    ("RID7201", "ossification", "", "RID14"),
    ("RID7202", "blood flow", "", "RID14"),
    ("RID7203", "respiration", "breathing", "RID14"),
    // modalities
    ("RID10345", "radiography", "radiograph|x-ray", "RID15"),
    (
        "RID10312",
        "magnetic resonance imaging",
        "MR imaging",
        "RID15",
    ),
    ("RID10321", "computed tomography", "", "RID15"),
    ("RID10326", "ultrasound", "sonography", "RID15"),
    ("RID10346", "diffusion weighted imaging", "", "RID15"),
    (
        "RID10347",
        "fluid attenuated inversion recovery",
        "",
        "RID15",
    ),
    // properties
    ("RID7301", "position", "", "RID16"),
    ("RID7302", "size", "", "RID16"),
    ("RID7303", "alignment", "", "RID16"),
    ("RID7304", "contour", "", "RID16"),
    ("RID7305", "density", "", "RID16"),
    ("RID7306", "signal intensity", "", "RID16"),
    ("RID7307", "morphology", "", "RID16"),
];

/// Starter abbreviation list in the style of public radiology glossaries.
const ABBREVIATIONS: &[(&str, &str)] = &[
    ("ACA", "anterior cerebral artery"),
    ("AICD", "implantable cardioverter defibrillator"),
    ("ARDS", "acute respiratory distress syndrome"),
    ("ASD", "atrial septal defect"),
    ("BPD", "bronchopulmonary dysplasia"),
    ("CHF", "congestive heart failure"),
    ("COPD", "chronic obstructive pulmonary disease"),
    ("CT", "computed tomography"),
    ("CVC", "central venous catheter"),
    ("CXR", "chest radiograph"),
    ("DDH", "developmental dysplasia of the hip"),
    ("DWI", "diffusion weighted imaging"),
    ("EDH", "epidural hematoma"),
    ("ETT", "endotracheal tube"),
    ("FLAIR", "fluid attenuated inversion recovery"),
    ("GGO", "ground glass opacity"),
    ("ICA", "internal carotid artery"),
    ("ICH", "intracranial hemorrhage"),
    ("IVC", "inferior vena cava"),
    ("LLL", "left lower lobe"),
    ("LP", "lumbar puncture"),
    ("LUL", "left upper lobe"),
    ("MCA", "middle cerebral artery"),
    ("MR", "magnetic resonance"),
    ("MRI", "magnetic resonance imaging"),
    ("NEC", "necrotizing enterocolitis"),
    ("NGT", "nasogastric tube"),
    ("OGT", "orogastric tube"),
    ("PCA", "posterior cerebral artery"),
    ("PDA", "patent ductus arteriosus"),
    ("PE", "pulmonary embolism"),
    ("PICC", "peripherally inserted central catheter"),
    ("PTX", "pneumothorax"),
    ("RDS", "respiratory distress syndrome"),
    ("RLL", "right lower lobe"),
    ("RML", "right middle lobe"),
    ("RUL", "right upper lobe"),
    ("SAH", "subarachnoid hemorrhage"),
    ("SDH", "subdural hematoma"),
    ("SVC", "superior vena cava"),
    ("TTN", "transient tachypnea of the newborn"),
    ("UAC", "umbilical arterial catheter"),
    ("UVC", "umbilical venous catheter"),
    ("VPS", "ventriculoperitoneal shunt"),
    ("VSD", "ventricular septal defect"),
];

/// `(surface, gold preferred name or "" for unlinkable)`.
type Filler = (&'static str, &'static str);

struct Pools {
    finding: &'static [Filler],
    observation: &'static [Filler],
    anatomy: &'static [Filler],
    device: &'static [Filler],
    descriptor: &'static [Filler],
    modality: &'static [Filler],
    property: &'static [Filler],
    procedure: &'static [Filler],
    step: &'static [Filler],
    process: &'static [Filler],
    templates: &'static [&'static str],
}

const CHEST: Pools = Pools {
    finding: &[
        ("pleural effusion", "pleural effusion"),
        ("pneumothorax", "pneumothorax"),
        ("pulmonary edema", "pulmonary edema"),
        ("atelectasis", "atelectasis"),
        ("pneumonia", "pneumonia"),
        ("hydrothorax", "pleural effusion"),
        ("congestive heart failure", "congestive heart failure"),
        ("respiratory distress", ""),
        ("cardiomegaly", ""),
        ("hydropneumothorax", ""),
        ("pulmonary embolism", "pulmonary embolism"),
    ],
    observation: &[
        ("opacity", "opacity"),
        ("opacification", "opacity"),
        ("consolidation", "consolidation"),
        ("volume loss", "volume loss"),
        ("pleural thickening", "pleural thickening"),
        ("nodule", "nodule"),
        ("air bronchograms", ""),
    ],
    anatomy: &[
        ("left upper lobe", "upper lobe of left lung"),
        ("right upper lobe", "upper lobe of right lung"),
        ("right middle lobe", "middle lobe of right lung"),
        ("right lower lobe", "lower lobe of right lung"),
        ("left lower lobe", "lower lobe of left lung"),
        ("costophrenic angle", "costophrenic sulcus"),
        ("left lung", "left lung"),
        ("right lung", "right lung"),
        ("lung bases", ""),
        ("mediastinum", "mediastinum"),
        ("heart size", "cardiac silhouette"),
    ],
    device: &[
        ("endotracheal tube", "endotracheal tube"),
        ("nasogastric tube", "nasogastric tube"),
        ("chest tube", "thoracostomy tube"),
        ("central venous catheter", "central venous catheter"),
        ("pacemaker", "pacemaker"),
        ("sternotomy wires", "sternotomy wire"),
        ("tracheostomy tube", "tracheostomy tube"),
    ],
    descriptor: &[
        ("mild", "mild"),
        ("moderate", "moderate"),
        ("small", "small"),
        ("large", "large"),
        ("stable", "stable"),
        ("new", "new"),
        ("increased", "increased"),
        ("no", "absent"),
        ("unchanged", "stable"),
        ("marked", ""),
    ],
    modality: &[
        ("radiograph", "radiography"),
        ("radiography", "radiography"),
        ("portable film", ""),
    ],
    property: &[
        ("position", "position"),
        ("size", "size"),
        ("contour", "contour"),
    ],
    procedure: &[
        ("thoracentesis", "thoracentesis"),
        ("intubation", ""),
        ("median sternotomy", "median sternotomy"),
    ],
    step: &[("comparison", "comparison")],
    process: &[("aeration", ""), ("respiration", "respiration")],
    templates: &[
        "Frontal {modality} of the chest.",
        "{step} is made with the prior study.",
        "{descriptor} {finding} is seen.",
        "There is {descriptor} {observation} in the {anatomy}.",
        "The {device} is in satisfactory {property}.",
        "The {anatomy} is clear.",
        "{descriptor} {finding} at the {anatomy}.",
        "Status post {procedure}.",
        "Improved {process} of the {anatomy}.",
        "The {device} tip projects over the {anatomy}.",
    ],
};

const BRAIN: Pools = Pools {
    finding: &[
        ("hydrocephalus", "hydrocephalus"),
        ("cerebral infarction", "cerebral infarction"),
        ("stroke", "cerebral infarction"),
        ("subarachnoid hemorrhage", "subarachnoid hemorrhage"),
        ("subdural hematoma", "subdural hematoma"),
        ("intracranial hemorrhage", "intracranial hemorrhage"),
        ("mass effect", "mass effect"),
        ("midline shift", "midline shift"),
        ("altered mental status", ""),
        ("small vessel ischemic disease", ""),
    ],
    observation: &[
        ("restricted diffusion", "restricted diffusion"),
        ("enhancement", "enhancement"),
        ("hyperintensity", "hyperintensity"),
        ("vasogenic edema", "vasogenic edema"),
        ("lesion", "lesion"),
        ("ventricular prominence", ""),
        ("signal abnormality", ""),
    ],
    anatomy: &[
        ("lateral ventricle", "lateral ventricle"),
        ("lateral ventricles", "lateral ventricle"),
        ("cerebellum", "cerebellum"),
        ("frontal lobe", "frontal lobe"),
        ("basal ganglia", "basal ganglia"),
        ("corpus callosum", "corpus callosum"),
        ("white matter", "cerebral white matter"),
        ("brainstem", "brainstem"),
        ("pituitary gland", "pituitary gland"),
        ("posterior fossa", "posterior cranial fossa"),
    ],
    device: &[
        ("ventriculoperitoneal shunt", "ventriculoperitoneal shunt"),
        ("shunt catheter", "ventriculoperitoneal shunt"),
    ],
    descriptor: &[
        ("mild", "mild"),
        ("moderate", "moderate"),
        ("no", "absent"),
        ("new", "new"),
        ("stable", "stable"),
        ("acute", "acute"),
        ("chronic", "chronic"),
        ("bilateral", "bilateral"),
    ],
    modality: &[
        ("magnetic resonance imaging", "magnetic resonance imaging"),
        ("MR imaging", "magnetic resonance imaging"),
        ("diffusion weighted imaging", "diffusion weighted imaging"),
        ("contrast-enhanced images", ""),
    ],
    property: &[
        ("signal intensity", "signal intensity"),
        ("size", "size"),
        ("morphology", "morphology"),
    ],
    procedure: &[
        ("craniotomy", "craniotomy"),
        ("lumbar puncture", "lumbar puncture"),
    ],
    step: &[
        ("comparison", "comparison"),
        ("contrast administration", "contrast administration"),
    ],
    process: &[
        ("blood flow", "blood flow"),
        ("cerebrospinal fluid flow", ""),
    ],
    templates: &[
        "{modality} of the brain was performed.",
        "{step} is made with the prior examination.",
        "There is {descriptor} {finding}.",
        "{descriptor} {observation} in the {anatomy}.",
        "The {anatomy} is normal in {property}.",
        "The {device} terminates in the {anatomy}.",
        "Status post {procedure}.",
        "Normal {process} in the {anatomy}.",
        "{descriptor} {observation} along the {anatomy}.",
    ],
};

const BABYGRAM: Pools = Pools {
    finding: &[
        (
            "respiratory distress syndrome",
            "respiratory distress syndrome",
        ),
        (
            "transient tachypnea of the newborn",
            "transient tachypnea of the newborn",
        ),
        ("necrotizing enterocolitis", "necrotizing enterocolitis"),
        ("bronchopulmonary dysplasia", "bronchopulmonary dysplasia"),
        ("pneumoperitoneum", "pneumoperitoneum"),
        ("free intraperitoneal air", "pneumoperitoneum"),
        ("fracture", "fracture"),
        ("hyaline membrane disease", ""),
        ("neonatal pneumonia", ""),
        ("fetal lung liquid", ""),
    ],
    observation: &[
        ("dilatation", "dilation"),
        ("air-fluid level", "air-fluid level"),
        ("pneumatosis", "pneumatosis intestinalis"),
        ("opacity", "opacity"),
        ("bowel gas pattern", ""),
    ],
    anatomy: &[
        ("bowel", "bowel"),
        ("stomach", "stomach"),
        ("abdomen", "abdomen"),
        ("femur", "femur"),
        ("skull", "skull"),
        ("spine", "spine"),
        ("hip joint", "hip joint"),
        ("ribs", "rib"),
        ("lungs", "lung"),
        ("liver", "liver"),
    ],
    device: &[
        ("umbilical venous catheter", "umbilical venous catheter"),
        ("umbilical arterial catheter", "umbilical arterial catheter"),
        ("orogastric tube", "orogastric tube"),
        ("endotracheal tube", "endotracheal tube"),
        ("nasogastric tube", "nasogastric tube"),
    ],
    descriptor: &[
        ("mild", "mild"),
        ("normal", "normal"),
        ("no", "absent"),
        ("bilateral", "bilateral"),
        ("diffuse", "diffuse"),
        ("stable", "stable"),
    ],
    modality: &[
        ("radiograph", "radiography"),
        ("babygram", ""),
        ("ultrasound", "ultrasound"),
    ],
    property: &[
        ("position", "position"),
        ("alignment", "alignment"),
        ("density", "density"),
    ],
    procedure: &[("intubation", "")],
    step: &[("comparison", "comparison")],
    process: &[("ossification", "ossification"), ("aeration", "")],
    templates: &[
        "Single {modality} of the whole body.",
        "{step} is made with the prior study.",
        "Findings consistent with {finding}.",
        "{descriptor} {observation} of the {anatomy}.",
        "The {device} is in appropriate {property}.",
        "The {device} tip projects over the {anatomy}.",
        "{descriptor} {finding} is seen.",
        "Normal {process} of the {anatomy}.",
        "The {anatomy} is unremarkable.",
    ],
};

/// `(modality, abbreviation, entity class, sentence with `{}` for the abbreviation)`.
const ABBREVIATION_ITEMS: &[(ModalityGroup, &str, EntityClass, &str)] = &[
    (
        ModalityGroup::ChestXray,
        "ETT",
        EntityClass::MedicalDevice,
        "The {} tip is above the carina.",
    ),
    (
        ModalityGroup::ChestXray,
        "CVC",
        EntityClass::MedicalDevice,
        "Right internal jugular {} in place.",
    ),
    (
        ModalityGroup::ChestXray,
        "PICC",
        EntityClass::MedicalDevice,
        "The {} line ends in the upper chest.",
    ),
    (
        ModalityGroup::ChestXray,
        "AICD",
        EntityClass::MedicalDevice,
        "Left chest wall {} is again seen.",
    ),
    (
        ModalityGroup::ChestXray,
        "PTX",
        EntityClass::ClinicalFinding,
        "Small apical {} is suspected.",
    ),
    (
        ModalityGroup::ChestXray,
        "CHF",
        EntityClass::ClinicalFinding,
        "Findings suggest {} exacerbation.",
    ),
    (
        ModalityGroup::ChestXray,
        "ARDS",
        EntityClass::ClinicalFinding,
        "Pattern compatible with {} is present.",
    ),
    (
        ModalityGroup::ChestXray,
        "COPD",
        EntityClass::ClinicalFinding,
        "Hyperinflation from known {} persists.",
    ),
    (
        ModalityGroup::ChestXray,
        "PE",
        EntityClass::ClinicalFinding,
        "Clinical concern for {} is noted.",
    ),
    (
        ModalityGroup::ChestXray,
        "GGO",
        EntityClass::ImagingObservation,
        "Patchy {} is scattered peripherally.",
    ),
    (
        ModalityGroup::ChestXray,
        "SVC",
        EntityClass::AnatomicalEntity,
        "The catheter terminates in the {} region.",
    ),
    (
        ModalityGroup::ChestXray,
        "IVC",
        EntityClass::AnatomicalEntity,
        "The {} appears plump.",
    ),
    (
        ModalityGroup::BrainMri,
        "VPS",
        EntityClass::MedicalDevice,
        "Right frontal {} is in place.",
    ),
    (
        ModalityGroup::BrainMri,
        "SAH",
        EntityClass::ClinicalFinding,
        "Trace {} is seen in the sulci.",
    ),
    (
        ModalityGroup::BrainMri,
        "SDH",
        EntityClass::ClinicalFinding,
        "Thin left convexity {} is seen.",
    ),
    (
        ModalityGroup::BrainMri,
        "EDH",
        EntityClass::ClinicalFinding,
        "Lentiform {} lies beneath the fracture site.",
    ),
    (
        ModalityGroup::BrainMri,
        "ICH",
        EntityClass::ClinicalFinding,
        "Evolving {} is present.",
    ),
    (
        ModalityGroup::BrainMri,
        "MCA",
        EntityClass::AnatomicalEntity,
        "Flow void in the left {} is preserved.",
    ),
    (
        ModalityGroup::BrainMri,
        "ICA",
        EntityClass::AnatomicalEntity,
        "The right {} is patent.",
    ),
    (
        ModalityGroup::BrainMri,
        "ACA",
        EntityClass::AnatomicalEntity,
        "The {} territory is spared.",
    ),
    (
        ModalityGroup::BrainMri,
        "PCA",
        EntityClass::AnatomicalEntity,
        "The {} territory is spared.",
    ),
    (
        ModalityGroup::BrainMri,
        "DWI",
        EntityClass::ImagingModality,
        "On {} there is subtle signal change.",
    ),
    (
        ModalityGroup::BrainMri,
        "FLAIR",
        EntityClass::ImagingModality,
        "Periventricular signal on {} is similar.",
    ),
    (
        ModalityGroup::Babygram,
        "NGT",
        EntityClass::MedicalDevice,
        "The {} tip is in the stomach.",
    ),
    (
        ModalityGroup::Babygram,
        "OGT",
        EntityClass::MedicalDevice,
        "An {} is present.",
    ),
    (
        ModalityGroup::Babygram,
        "UAC",
        EntityClass::MedicalDevice,
        "The {} tip is at T8.",
    ),
    (
        ModalityGroup::Babygram,
        "UVC",
        EntityClass::MedicalDevice,
        "The {} tip is near the right atrium.",
    ),
    (
        ModalityGroup::Babygram,
        "RDS",
        EntityClass::ClinicalFinding,
        "Granular lungs suggest {}.",
    ),
    (
        ModalityGroup::Babygram,
        "NEC",
        EntityClass::ClinicalFinding,
        "Evaluate for {} as clinically indicated.",
    ),
    (
        ModalityGroup::Babygram,
        "PDA",
        EntityClass::ClinicalFinding,
        "Known {} is noted clinically.",
    ),
    (
        ModalityGroup::Babygram,
        "ASD",
        EntityClass::ClinicalFinding,
        "History of {} is given.",
    ),
    (
        ModalityGroup::Babygram,
        "VSD",
        EntityClass::ClinicalFinding,
        "History of {} is also given.",
    ),
    (
        ModalityGroup::Babygram,
        "DDH",
        EntityClass::ClinicalFinding,
        "Screening for {} is requested.",
    ),
    (
        ModalityGroup::Babygram,
        "TTN",
        EntityClass::ClinicalFinding,
        "Appearance favors {} over infection.",
    ),
    (
        ModalityGroup::Babygram,
        "BPD",
        EntityClass::ClinicalFinding,
        "Coarse markings reflect {}.",
    ),
];

const REPORT_COUNTS: [(ModalityGroup, &str, usize); 3] = [
    (ModalityGroup::ChestXray, "cxr", 17),
    (ModalityGroup::BrainMri, "mri", 16),
    (ModalityGroup::Babygram, "baby", 17),
];

/// Slot markers and the entity class each one produces.
const SLOTS: [(&str, EntityClass); 10] = [
    ("{finding}", EntityClass::ClinicalFinding),
    ("{observation}", EntityClass::ImagingObservation),
    ("{anatomy}", EntityClass::AnatomicalEntity),
    ("{device}", EntityClass::MedicalDevice),
    ("{descriptor}", EntityClass::RadLexDescriptor),
    ("{modality}", EntityClass::ImagingModality),
    ("{property}", EntityClass::Property),
    ("{procedure}", EntityClass::Procedure),
    ("{step}", EntityClass::ProcedureStep),
    ("{process}", EntityClass::Process),
];

impl Pools {
    fn fillers(&self, class: EntityClass) -> &'static [Filler] {
        match class {
            EntityClass::ClinicalFinding => self.finding,
            EntityClass::ImagingObservation => self.observation,
            EntityClass::AnatomicalEntity => self.anatomy,
            EntityClass::MedicalDevice => self.device,
            EntityClass::RadLexDescriptor => self.descriptor,
            EntityClass::ImagingModality => self.modality,
            EntityClass::Property => self.property,
            EntityClass::Procedure => self.procedure,
            EntityClass::ProcedureStep => self.step,
            EntityClass::Process => self.process,
        }
    }
}

fn pools(group: ModalityGroup) -> &'static Pools {
    match group {
        ModalityGroup::BrainMri => &BRAIN,
        ModalityGroup::Babygram => &BABYGRAM,
        _ => &CHEST,
    }
}

/// An abbreviation-only mention placed in the corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbbreviationItem {
    pub mention: MentionRef,
    pub abbreviation: String,
    pub expansion: String,
    pub gold: ConceptId,
}

#[derive(Debug, Clone)]
pub struct SyntheticBundle {
    pub lexicon: Lexicon,
    pub abbreviations: AbbreviationDict,
    pub corpus: Corpus,
    pub abbreviation_items: Vec<AbbreviationItem>,
}

pub fn lexicon() -> Lexicon {
    let concepts = CONCEPTS.iter().map(|&(rid, name, syns, parent)| Concept {
        id: ConceptId::parse(rid).expect("valid RID"),
        preferred_name: name.to_string(),
        synonyms: syns
            .split('|')
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect(),
        parents: (!parent.is_empty())
            .then(|| ConceptId::parse(parent).expect("valid RID"))
            .into_iter()
            .collect(),
        definition: None,
    });
    Lexicon::from_concepts(concepts).expect("synthetic lexicon is valid")
}

pub fn abbreviations() -> AbbreviationDict {
    ABBREVIATIONS.iter().copied().collect()
}

/// The abbreviation list as TSV, with header.
pub fn abbreviations_tsv() -> String {
    let mut out = format!("{ABBREVIATION_HEADER}\n");
    for (a, e) in ABBREVIATIONS {
        out.push_str(&format!("{a}\t{e}\n"));
    }
    out
}

fn gold_for(lexicon: &Lexicon, name: &str) -> ConceptId {
    if name.is_empty() {
        return ConceptId::unlinkable();
    }
    lexicon
        .find_by_name(name)
        .first()
        .cloned()
        .unwrap_or_else(|| panic!("synthetic filler targets unknown concept {name:?}"))
}

struct ReportBuilder {
    text: String,
    sentences: Vec<(usize, usize)>,
    mentions: Vec<(usize, usize, String, EntityClass, ConceptId)>,
}

impl ReportBuilder {
    fn new() -> Self {
        ReportBuilder {
            text: String::new(),
            sentences: Vec::new(),
            mentions: Vec::new(),
        }
    }

    /// Appends one sentence given as literal text and `(surface, class, gold)` pieces.
    fn sentence(&mut self, pieces: Vec<Piece>) {
        let start = char_len(&self.text);
        let mut first = true;
        for piece in pieces {
            let (raw, ann) = match piece {
                Piece::Text(t) => (t, None),
                Piece::Mention(s, class, gold) => (s, Some((class, gold))),
            };
            let s = if first { capitalize(&raw) } else { raw };
            first = false;
            let at = char_len(&self.text);
            self.text.push_str(&s);
            if let Some((class, gold)) = ann {
                self.mentions.push((at, at + char_len(&s), s, class, gold));
            }
        }
        self.sentences.push((start, char_len(&self.text)));
        self.text.push('\n');
    }

    fn finish(self, report_id: String, modality_group: ModalityGroup) -> Report {
        let mentions = self
            .mentions
            .into_iter()
            .enumerate()
            .map(|(i, (s, e, surface, entity_class, gold_concept))| Mention {
                id: format!("T{}", i + 1),
                span_start: s,
                span_end: e,
                surface,
                entity_class,
                gold_concept,
            })
            .collect();
        Report {
            report_id,
            modality_group,
            text: self.text,
            sentences: self.sentences,
            mentions,
        }
    }
}

enum Piece {
    Text(String),
    Mention(String, EntityClass, ConceptId),
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Splits a template into literal text and filled slots.
fn fill(template: &str, pools: &Pools, lexicon: &Lexicon, rng: &mut ChaCha8Rng) -> Vec<Piece> {
    let mut pieces = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        if open > 0 {
            pieces.push(Piece::Text(rest[..open].to_string()));
        }
        let close = open + rest[open..].find('}').expect("closed slot");
        let marker = &rest[open..=close];
        let class = SLOTS
            .iter()
            .find(|(m, _)| *m == marker)
            .map(|&(_, c)| c)
            .unwrap_or_else(|| panic!("unknown slot {marker}"));
        let &(surface, target) = pools.fillers(class).choose(rng).expect("non-empty pool");
        pieces.push(Piece::Mention(
            surface.to_string(),
            class,
            gold_for(lexicon, target),
        ));
        rest = &rest[close + 1..];
    }
    if !rest.is_empty() {
        pieces.push(Piece::Text(rest.to_string()));
    }
    pieces
}

pub fn generate(seed: u64) -> SyntheticBundle {
    let lexicon = lexicon();
    let abbreviations = abbreviations();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reports = Vec::new();
    let mut items = Vec::new();

    for (group, prefix, count) in REPORT_COUNTS {
        let pool = pools(group);
        let group_items: Vec<_> = ABBREVIATION_ITEMS.iter().filter(|i| i.0 == group).collect();
        for k in 0..count {
            let report_id = format!("{prefix}{:02}", k + 1);
            let mut templates: Vec<&str> = pool.templates.to_vec();
            templates.shuffle(&mut rng);
            let n = rng.gen_range(4..=6);
            let mut sentences: Vec<Vec<Piece>> = templates[..n]
                .iter()
                .map(|t| fill(t, pool, &lexicon, &mut rng))
                .collect();
            let mut abbreviation = None;
            if let Some(&&(_, abbr, class, sentence)) = group_items.get(k) {
                let expansion = abbreviations
                    .get(abbr)
                    .expect("item abbreviation is in the dictionary");
                let gold = gold_for(&lexicon, expansion);
                let (before, after) = sentence.split_once("{}").expect("sentence has a slot");
                let mut pieces = Vec::new();
                if !before.is_empty() {
                    pieces.push(Piece::Text(before.to_string()));
                }
                pieces.push(Piece::Mention(abbr.to_string(), class, gold.clone()));
                pieces.push(Piece::Text(after.to_string()));
                let at = rng.gen_range(1..=sentences.len());
                sentences.insert(at, pieces);
                abbreviation = Some((abbr, expansion.to_string(), gold));
            }
            let mut b = ReportBuilder::new();
            for s in sentences {
                b.sentence(s);
            }
            let report = b.finish(report_id, group);
            if let Some((abbr, expansion, gold)) = abbreviation {
                let m = report
                    .mentions
                    .iter()
                    .find(|m| m.surface == abbr)
                    .expect("abbreviation mention was placed");
                items.push(AbbreviationItem {
                    mention: MentionRef {
                        report_id: report.report_id.clone(),
                        mention_id: m.id.clone(),
                    },
                    abbreviation: abbr.to_string(),
                    expansion,
                    gold,
                });
            }
            reports.push(report);
        }
    }
    SyntheticBundle {
        lexicon,
        abbreviations,
        corpus: Corpus { reports },
        abbreviation_items: items,
    }
}

pub const ABBREVIATION_ITEMS_FILE: &str = "abbreviation_items.tsv";
pub const ABBREVIATION_ITEMS_HEADER: &str = "report_id\tmention_id\tabbreviation\texpansion\tgold";

impl SyntheticBundle {
    pub fn abbreviation_items_tsv(&self) -> String {
        let mut out = format!("{ABBREVIATION_ITEMS_HEADER}\n");
        for i in &self.abbreviation_items {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                i.mention.report_id, i.mention.mention_id, i.abbreviation, i.expansion, i.gold
            ));
        }
        out
    }

    /// Writes `lexicon.tsv`, `abbreviations.tsv` and the corpus under
    /// `synthetic/`, as bundled in the crate's `data` directory.
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("lexicon.tsv"), self.lexicon.to_tsv())?;
        std::fs::write(dir.join("abbreviations.tsv"), abbreviations_tsv())?;
        let corpus_dir = dir.join("synthetic");
        let names = |id: &ConceptId| {
            self.lexicon
                .lookup(id)
                .map(|c| c.preferred_name.clone())
                .unwrap_or_default()
        };
        self.corpus.write_dir(&corpus_dir, &names)?;
        std::fs::write(
            corpus_dir.join(ABBREVIATION_ITEMS_FILE),
            self.abbreviation_items_tsv(),
        )
    }
}
