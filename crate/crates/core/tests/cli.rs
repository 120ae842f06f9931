//! End-to-end runs of the `radnorm` binary.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use radnorm::lexicon::parse_lexicon_str;
use radnorm::ConceptId;

fn radnorm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_radnorm"))
        .args(args)
        .env_remove("CONCEPT_NORM_SCORER")
        .output()
        .expect("binary runs")
}

fn ok_stdout(args: &[&str]) -> String {
    let out = radnorm(args);
    assert!(
        out.status.success(),
        "radnorm {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> serde_json::Value {
    serde_json::from_str(&ok_stdout(args)).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn candidates_for_abbreviation_match_brute_force() {
    let data = common::data_dir();
    let (lex, corpus, abbrev) = (
        data.join("lexicon.tsv"),
        data.join("synthetic"),
        data.join("abbreviations.tsv"),
    );
    let v = json(&[
        "candidates",
        "--mention",
        "NGT",
        "--lexicon",
        path(&lex),
        "--corpus",
        path(&corpus),
        "--abbrev",
        path(&abbrev),
    ]);
    assert_eq!(v["expanded"], "nasogastric tube");
    assert_eq!(v["candidates"][0]["name"], "nasogastric tube");

    // Documents: every preferred name plus every annotated mention surface.
    let lexicon = parse_lexicon_str(&fs::read_to_string(&lex).unwrap()).unwrap();
    let mut docs: Vec<(String, ConceptId)> = lexicon
        .concepts()
        .map(|c| (c.preferred_name.clone(), c.id.clone()))
        .collect();
    for entry in fs::read_dir(&corpus).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "ann") {
            let ann = fs::read_to_string(&p).unwrap();
            let mut surfaces = BTreeMap::new();
            for line in ann.lines() {
                let cells: Vec<&str> = line.split('\t').collect();
                if line.starts_with('T') {
                    surfaces.insert(cells[0].to_string(), cells[2].to_string());
                } else if line.starts_with('N') {
                    let mut parts = cells[1].split(' ');
                    let (_, t, r) = (parts.next(), parts.next().unwrap(), parts.next().unwrap());
                    let rid = r.trim_start_matches("RadLex:");
                    docs.push((surfaces[t].clone(), ConceptId::parse(rid).unwrap()));
                }
            }
        }
    }
    let oracle = common::brute_force_bm25(&docs, "nasogastric tube", 1.2, 0.75);
    let got = v["candidates"].as_array().unwrap();
    assert_eq!(got.len(), 10.min(oracle.len()));
    for (g, (rid, score)) in got.iter().zip(&oracle) {
        assert_eq!(g["concept"], rid.as_str());
        assert!((g["score"].as_f64().unwrap() - score).abs() < 1e-9);
    }
}

#[test]
fn stats_table_matches_hand_count_of_bundled_files() {
    let corpus = common::data_dir().join("synthetic");
    let md = ok_stdout(&["stats", "--corpus", path(&corpus)]);
    let mut per_class: BTreeMap<String, usize> = BTreeMap::new();
    let (mut total, mut unlinkable) = (0, 0);
    for entry in fs::read_dir(&corpus).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "ann") {
            for line in fs::read_to_string(&p).unwrap().lines() {
                if line.starts_with('T') {
                    let class = line.split('\t').nth(1).unwrap().split(' ').next().unwrap();
                    *per_class.entry(class.to_string()).or_default() += 1;
                    total += 1;
                }
                if line.starts_with('N') && line.contains("RadLex:XXXXX") {
                    unlinkable += 1;
                }
            }
        }
    }
    let get = |k: &str| per_class.get(k).copied().unwrap_or(0);
    for (label, n) in [
        ("Clinical Finding", get("ClinicalFinding")),
        ("Anatomical Entity", get("AnatomicalEntity")),
        ("Procedure-Related", get("Procedure") + get("ProcedureStep")),
        ("Property", get("Property")),
        ("Total entity mentions", total),
        ("Unlinkable mentions", unlinkable),
    ] {
        assert!(
            md.contains(&format!("| {label} | {n} |")),
            "{label} {n}\n{md}"
        );
    }
}

#[test]
fn agreement_with_itself_is_perfect() {
    let corpus = common::data_dir().join("synthetic");
    let v = json(&["agreement", "--a", path(&corpus), "--b", path(&corpus)]);
    assert_eq!(v["span_f1"], 1.0);
    assert_eq!(v["normalization_agreement"], 1.0);
}

#[test]
fn config_errors_exit_2_and_name_the_flag() {
    for (args, flag) in [
        (vec!["evaluate", "--k1=-1"], "--k1"),
        (vec!["evaluate", "--b", "1.5"], "--b"),
        (vec!["evaluate", "--n-candidates", "0"], "--n-candidates"),
        (vec!["evaluate", "--ranker", "span"], "--scorer"),
        (vec!["evaluate", "--ranker", "magic"], "--ranker"),
        (vec!["evaluate", "--folds", "2"], "--folds"),
        (
            vec!["normalize", "--mention", "x", "--span-mode", "middle"],
            "--span-mode",
        ),
        (
            vec!["evaluate", "--ranker", "rerank", "--scorer", "telepathy"],
            "--scorer",
        ),
    ] {
        let out = radnorm(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(flag), "{args:?}: {err}");
    }
}

#[test]
fn data_errors_exit_1_with_context() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.tsv");
    let out = radnorm(&["stats", "--lexicon", path(&missing)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.tsv"));

    let bad = dir.path().join("bad.tsv");
    fs::write(
        &bad,
        "rid\tpreferred_name\tsynonyms\tparents\tdefinition\nRID1\tlung\t\t\t\nbogus\tx\t\t\t\n",
    )
    .unwrap();
    let out = radnorm(&["stats", "--lexicon", path(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.tsv") && err.contains("line 3"), "{err}");
}

#[test]
fn flags_override_config_file_which_overrides_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "n_candidates = 5\nfolds = 5\nk1 = 0.9\nsynonym_expansion = false\n",
    )
    .unwrap();
    let v = json(&["folds", "--config", path(&cfg), "--n-candidates", "7"]);
    let c = &v["config"];
    assert_eq!(c["bm25"]["n_candidates"], 7);
    assert_eq!(c["bm25"]["k1"], 0.9);
    assert_eq!(c["bm25"]["b"], 0.75);
    assert_eq!(c["folds"], 5);
    assert_eq!(c["expansion"]["synonyms"], false);
    assert_eq!(c["expansion"]["abbreviations"], true);
    assert_eq!(v["folds"].as_array().unwrap().len(), 5);

    fs::write(&cfg, "n_candidate = 5\n").unwrap();
    let out = radnorm(&["folds", "--config", path(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn scorer_can_come_from_the_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_radnorm"))
        .args(["evaluate", "--ranker", "rerank", "--folds", "5"])
        .env("CONCEPT_NORM_SCORER", "builtin-lexical")
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["config"]["scorer"], "builtin-lexical");
    assert!(v["averaged"]["accuracy"].as_f64().unwrap() > 0.5);
}

#[test]
fn output_does_not_depend_on_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok_stdout(&[
        "evaluate",
        "--recall-at",
        "25",
        "--jobs",
        "1",
        "--out",
        path(&a),
    ]);
    ok_stdout(&[
        "evaluate",
        "--recall-at",
        "25",
        "--jobs",
        "4",
        "--out",
        path(&b),
    ]);
    for f in ["report.json", "report.md", "predictions.tsv"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn every_machine_output_echoes_the_config() {
    for args in [
        vec!["expand", "--mention", "NGT"],
        vec!["candidates", "--mention", "NGT"],
        vec!["normalize", "--mention", "NGT"],
        vec!["folds"],
        vec!["stats", "--json"],
        vec!["evaluate", "--folds", "3"],
        vec!["tag", "--folds", "3"],
    ] {
        let v = json(&args);
        assert_eq!(v["config"]["bm25"]["k1"], 1.2, "{args:?}");
        assert_eq!(v["config"]["lexicon"], "builtin:synthetic", "{args:?}");
    }
}

#[test]
fn normalize_reports_requested_span_mode() {
    let v = json(&[
        "normalize",
        "--mention",
        "left lower lobe",
        "--ranker",
        "span",
        "--scorer",
        "builtin-lexical",
        "--span-mode",
        "last",
    ]);
    let r = &v["results"][0];
    assert_eq!(r["ranker"], "span_last");
    assert_eq!(r["predicted_name"], "lower lobe of left lung");
}

#[test]
fn normalize_through_stdio_stub() {
    let stub = format!(
        "stdio:{} stub-scorer --stub lexical",
        env!("CARGO_BIN_EXE_radnorm")
    );
    let v = json(&[
        "normalize",
        "--mention",
        "costophrenic angle",
        "--ranker",
        "rerank",
        "--scorer",
        &stub,
    ]);
    assert_eq!(v["results"][0]["predicted_name"], "costophrenic sulcus");
}

#[test]
fn synth_writes_the_bundled_files() {
    let dir = tempfile::tempdir().unwrap();
    ok_stdout(&["synth", "--out", path(dir.path())]);
    let a = fs::read(dir.path().join("lexicon.tsv")).unwrap();
    assert_eq!(a, fs::read(common::data_dir().join("lexicon.tsv")).unwrap());
}

#[test]
fn index_round_trips_through_candidates() {
    let dir = tempfile::tempdir().unwrap();
    let idx = dir.path().join("index.tsv");
    ok_stdout(&["index", "--out", path(&idx)]);
    let from_file = json(&[
        "candidates",
        "--mention",
        "chest tube",
        "--index",
        path(&idx),
    ]);
    let built = json(&["candidates", "--mention", "chest tube"]);
    assert_eq!(from_file["candidates"], built["candidates"]);
    assert_eq!(built["candidates"][0]["name"], "thoracostomy tube");
}

#[test]
fn import_radlex_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("radlex.csv");
    let out = dir.path().join("lexicon.tsv");
    fs::write(
        &csv,
        "Class ID,Preferred Label,Synonyms,Parents\n\
         http://radlex.org/RID/RID3,anatomical entity,,http://www.w3.org/2002/07/owl#Thing\n\
         http://radlex.org/RID/RID1301,lung,lungs,http://radlex.org/RID/RID3\n\
         http://example.org/other,not a rid,,\n",
    )
    .unwrap();
    let run = radnorm(&["import-radlex", "--input", path(&csv), "--out", path(&out)]);
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let lex = parse_lexicon_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(lex.len(), 2);
    assert_eq!(
        lex.class_of(&ConceptId::parse("RID1301").unwrap()),
        Some("anatomical entity")
    );
}

#[test]
fn instances_dump_is_json_lines() {
    let out = ok_stdout(&["instances", "--kind", "span"]);
    let first: serde_json::Value = serde_json::from_str(out.lines().next().unwrap()).unwrap();
    assert!(first["sequence"].as_str().unwrap().starts_with("[CLS] "));
}
