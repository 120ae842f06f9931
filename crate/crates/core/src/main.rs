//! `radnorm`: command-line pipelines over the normalization library.
//!
//! Exit status 0 on success, 2 for configuration errors (the message names
//! the offending flag), 1 for data errors.

use std::fs;
use std::io::{self, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use radnorm::corpus::{align_mentions, corpus_stats, normalization_agreement, span_agreement_f1};
use radnorm::evaluation::{
    evaluate_normalization, evaluate_tagging, normalization_markdown, plan_folds, predictions_tsv,
    tagging_markdown, NormalizationConfig, TaggerSource, TaggingConfig,
};
use radnorm::expansion::{expand_mention_with, ExpansionOptions};
use radnorm::lexicon::{import_radlex_csv, parse_lexicon};
use radnorm::ranking::instances::rendered_name;
use radnorm::ranking::stub::StubModel;
use radnorm::ranking::{
    build_rerank_instances, build_span_instance, predict, scorer_from_spec, EchoBm25Scorer,
    RankerConfig, RankerKind, Scorer, SpanMode,
};
use radnorm::retrieval::{Analyzer, Bm25Index, IndexBuilder, MentionRef};
use radnorm::span_detection::{write_conll, DictionaryTagger};
use radnorm::synthetic::{self, DEFAULT_SEED};
use radnorm::{AbbreviationDict, Bm25Params, Corpus, Lexicon};

#[derive(Parser)]
#[command(
    name = "radnorm",
    version,
    about = "Normalize radiology mentions to RadLex-style concepts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a BM25 index over the lexicon and all corpus mentions.
    Index {
        #[command(flatten)]
        run: RunFlags,
        #[arg(long)]
        out: PathBuf,
    },
    /// Show the expanded form of a mention.
    Expand {
        #[command(flatten)]
        run: RunFlags,
        #[arg(long)]
        mention: String,
    },
    /// Retrieve ranked candidate concepts for a mention.
    Candidates {
        #[command(flatten)]
        run: RunFlags,
        #[arg(long)]
        mention: String,
        /// Use a saved index instead of building one.
        #[arg(long)]
        index: Option<PathBuf>,
    },
    /// Pick one concept per mention with the configured ranker.
    Normalize {
        #[command(flatten)]
        run: RunFlags,
        #[arg(long, required = true)]
        mention: Vec<String>,
    },
    /// Dictionary-tag a text, or cross-validate a tagger when no text is given.
    Tag {
        #[command(flatten)]
        run: RunFlags,
        #[arg(long)]
        text: Option<String>,
        /// dictionary, gold, or a remote scorer address.
        #[arg(long, default_value = "dictionary")]
        tagger: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-validated normalization evaluation.
    Evaluate {
        #[command(flatten)]
        run: RunFlags,
        /// Directory for report.json, report.md and predictions.tsv; stdout gets the JSON otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the fold plan.
    Folds {
        #[command(flatten)]
        run: RunFlags,
    },
    /// Corpus statistics table.
    Stats {
        #[command(flatten)]
        run: RunFlags,
        #[arg(long)]
        json: bool,
    },
    /// Inter-annotator agreement between two annotated copies of a corpus.
    Agreement {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
    /// Convert an official RadLex CSV export to the lexicon TSV format.
    ImportRadlex {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the synthetic lexicon, abbreviation list and corpus.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Dump re-ranking and span instances for every corpus mention as JSON lines.
    Instances {
        #[command(flatten)]
        run: RunFlags,
        #[arg(long, value_enum, default_value_t = InstanceKind::Rerank)]
        kind: InstanceKind,
    },
    /// Serve a deterministic stand-in model over the scorer protocol.
    StubScorer {
        /// constant[:p] or lexical.
        #[arg(long, default_value = "lexical")]
        stub: String,
        /// Serve HTTP on this port instead of stdio.
        #[arg(long)]
        port: Option<u16>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum InstanceKind {
    Rerank,
    Span,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum OnOff {
    On,
    Off,
}

impl OnOff {
    fn on(self) -> bool {
        self == OnOff::On
    }
}

/// Run settings shared by the pipeline commands. Unset flags fall back to the
/// config file, then to the defaults.
#[derive(Args, Clone, Default)]
struct RunFlags {
    /// TOML file with any of the settings below (snake_case keys).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Lexicon TSV; the bundled synthetic lexicon when omitted.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Corpus directory; the bundled synthetic corpus when omitted.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Abbreviation TSV; the bundled list when omitted.
    #[arg(long)]
    abbrev: Option<PathBuf>,
    #[arg(long)]
    k1: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    n_candidates: Option<usize>,
    /// Extra recall cutoffs, comma separated.
    #[arg(long, value_delimiter = ',')]
    recall_at: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    stemming: Option<OnOff>,
    #[arg(long, value_enum)]
    stopwords: Option<OnOff>,
    #[arg(long)]
    no_synonym_expansion: bool,
    #[arg(long)]
    no_abbrev_expansion: bool,
    /// bm25_top1, lexical, rerank or span.
    #[arg(long)]
    ranker: Option<String>,
    /// Which span prediction `normalize` reports: original, first or last.
    #[arg(long)]
    span_mode: Option<String>,
    /// echo-bm25, builtin-lexical, oracle, constant[:p], stdio:<command> or an http(s) URL.
    #[arg(long, env = "CONCEPT_NORM_SCORER")]
    scorer: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    stratify_modality: bool,
    #[arg(long)]
    timeout_secs: Option<u64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    lexicon: Option<PathBuf>,
    corpus: Option<PathBuf>,
    abbrev: Option<PathBuf>,
    k1: Option<f64>,
    b: Option<f64>,
    n_candidates: Option<usize>,
    recall_at: Option<Vec<usize>>,
    stemming: Option<OnOff>,
    stopwords: Option<OnOff>,
    synonym_expansion: Option<bool>,
    abbrev_expansion: Option<bool>,
    ranker: Option<String>,
    span_mode: Option<String>,
    scorer: Option<String>,
    seed: Option<u64>,
    folds: Option<usize>,
    jobs: Option<usize>,
    stratify_modality: Option<bool>,
    timeout_secs: Option<u64>,
}

/// The resolved configuration, echoed into every machine-readable output.
#[derive(Serialize, Clone)]
struct RunConfig {
    lexicon: String,
    corpus: String,
    abbreviations: String,
    span_mode: SpanMode,
    timeout_secs: u64,
    #[serde(flatten)]
    normalization: NormalizationConfig,
    #[serde(skip)]
    jobs: usize,
    #[serde(skip)]
    paths: [Option<PathBuf>; 3],
}

const BUILTIN: &str = "builtin:synthetic";
const DEFAULT_FOLDS: usize = 10;

enum CliError {
    Config(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Data(e)
    }
}

fn config_err(flag: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{flag}: {msg}"))
}

type CliResult<T> = Result<T, CliError>;

impl RunFlags {
    fn resolve(&self) -> CliResult<RunConfig> {
        let file: FileConfig = match &self.config {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| config_err("--config", format!("{}: {e}", p.display())))?;
                toml::from_str(&text)
                    .map_err(|e| config_err("--config", format!("{}: {e}", p.display())))?
            }
            None => FileConfig::default(),
        };
        let mut bm25 = Bm25Params::default();
        if let Some(k1) = self.k1.or(file.k1) {
            bm25.k1 = k1;
        }
        if let Some(b) = self.b.or(file.b) {
            bm25.b = b;
        }
        if let Some(n) = self.n_candidates.or(file.n_candidates) {
            bm25.n_candidates = n;
        }
        bm25.analyzer = Analyzer {
            stemming: self
                .stemming
                .or(file.stemming)
                .map_or(bm25.analyzer.stemming, OnOff::on),
            stopwords: self
                .stopwords
                .or(file.stopwords)
                .map_or(bm25.analyzer.stopwords, OnOff::on),
        };
        if !(bm25.k1.is_finite() && bm25.k1 >= 0.0) {
            return Err(config_err("--k1", "must be a finite non-negative number"));
        }
        if !(0.0..=1.0).contains(&bm25.b) {
            return Err(config_err("--b", "must lie in [0, 1]"));
        }
        if bm25.n_candidates == 0 {
            return Err(config_err("--n-candidates", "must be at least 1"));
        }
        let expansion = ExpansionOptions {
            abbreviations: !self.no_abbrev_expansion && file.abbrev_expansion.unwrap_or(true),
            synonyms: !self.no_synonym_expansion && file.synonym_expansion.unwrap_or(true),
        };
        let kind: RankerKind = match self.ranker.clone().or(file.ranker) {
            Some(r) => r.parse().map_err(|e| config_err("--ranker", e))?,
            None => RankerKind::Bm25Top1,
        };
        let span_mode: SpanMode = match self.span_mode.clone().or(file.span_mode) {
            Some(m) => m.parse().map_err(|e| config_err("--span-mode", e))?,
            None => SpanMode::Original,
        };
        let scorer = match (kind, self.scorer.clone().or(file.scorer)) {
            (RankerKind::Rerank | RankerKind::Span, None) => {
                return Err(config_err(
                    "--scorer",
                    format!(
                        "ranker {} needs a scorer (or --scorer builtin-lexical)",
                        kind.as_str()
                    ),
                ))
            }
            (RankerKind::Rerank | RankerKind::Span, Some(s)) => s,
            (_, _) => "none".to_string(),
        };
        let seed = self.seed.or(file.seed).unwrap_or(0);
        let folds = self.folds.or(file.folds).unwrap_or(DEFAULT_FOLDS);
        if folds < 3 {
            return Err(config_err("--folds", "needs at least 3 folds"));
        }
        let jobs = self.jobs.or(file.jobs).unwrap_or(1);
        if jobs == 0 {
            return Err(config_err("--jobs", "must be at least 1"));
        }
        let mut recall_at = self
            .recall_at
            .clone()
            .or(file.recall_at)
            .unwrap_or_default();
        if recall_at.contains(&0) {
            return Err(config_err("--recall-at", "cutoffs must be at least 1"));
        }
        recall_at.sort_unstable();
        recall_at.dedup();
        let paths = [
            self.lexicon.clone().or(file.lexicon),
            self.corpus.clone().or(file.corpus),
            self.abbrev.clone().or(file.abbrev),
        ];
        let shown = |p: &Option<PathBuf>| {
            p.as_ref()
                .map_or(BUILTIN.to_string(), |p| p.display().to_string())
        };
        Ok(RunConfig {
            lexicon: shown(&paths[0]),
            corpus: shown(&paths[1]),
            abbreviations: shown(&paths[2]),
            span_mode,
            timeout_secs: self.timeout_secs.or(file.timeout_secs).unwrap_or(60),
            normalization: NormalizationConfig {
                bm25,
                expansion,
                ranker: RankerConfig {
                    kind,
                    synonym_order_seed: seed,
                    ..RankerConfig::default()
                },
                scorer,
                folds,
                seed,
                stratify_modality: self.stratify_modality
                    || file.stratify_modality.unwrap_or(false),
                recall_at,
            },
            jobs,
            paths,
        })
    }
}

/// Loaded lexicon, abbreviations and corpus.
struct Data {
    lexicon: Lexicon,
    dict: AbbreviationDict,
    corpus: Corpus,
}

impl RunConfig {
    fn load(&self) -> CliResult<Data> {
        let [lex, corpus, abbrev] = &self.paths;
        let builtin = (lex.is_none() || corpus.is_none() || abbrev.is_none())
            .then(|| synthetic::generate(DEFAULT_SEED));
        let lexicon = match lex {
            Some(p) => parse_lexicon(
                fs::File::open(p).with_context(|| format!("opening {}", p.display()))?,
            )
            .with_context(|| format!("reading lexicon {}", p.display()))?,
            None => builtin.as_ref().expect("generated").lexicon.clone(),
        };
        let dict = match abbrev {
            Some(p) => AbbreviationDict::parse(
                fs::File::open(p).with_context(|| format!("opening {}", p.display()))?,
            )
            .with_context(|| format!("reading abbreviations {}", p.display()))?,
            None => builtin.as_ref().expect("generated").abbreviations.clone(),
        };
        let corpus = match corpus {
            Some(p) => {
                Corpus::load_dir(p).with_context(|| format!("reading corpus {}", p.display()))?
            }
            None => builtin.expect("generated").corpus,
        };
        Ok(Data {
            lexicon,
            dict,
            corpus,
        })
    }

    fn scorer(&self) -> CliResult<Box<dyn Scorer>> {
        if self.normalization.scorer == "none" {
            return Ok(Box::new(EchoBm25Scorer));
        }
        scorer_from_spec(
            &self.normalization.scorer,
            Duration::from_secs(self.timeout_secs),
        )
        .map_err(|e| config_err("--scorer", e))
    }

    fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

fn full_index(data: &Data, params: Bm25Params) -> anyhow::Result<Bm25Index<f64>> {
    let mut builder = IndexBuilder::new();
    builder
        .add_lexicon(&data.lexicon)
        .add_reports(&data.corpus.reports);
    Ok(builder.build(params)?)
}

fn print_json(value: &impl Serialize) -> anyhow::Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn candidates_json(
    cfg: &RunConfig,
    data: &Data,
    index: &Bm25Index<f64>,
    mention: &str,
) -> (serde_json::Value, radnorm::CandidateList) {
    let expanded = expand_mention_with(
        mention,
        &data.lexicon,
        &data.dict,
        cfg.normalization.expansion,
    );
    let list = index.retrieve(&expanded, &cfg.normalization.bm25);
    let rows: Vec<_> = list
        .candidates
        .iter()
        .enumerate()
        .map(|(i, c)| {
            json!({
                "rank": i + 1,
                "concept": c.concept,
                "name": rendered_name(&data.lexicon, &c.concept),
                "score": c.score,
            })
        })
        .collect();
    (
        json!({"mention": mention, "expanded": expanded.expanded, "applied": expanded.applied, "candidates": rows}),
        list,
    )
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Index { run, out } => {
            let cfg = run.resolve()?;
            let data = cfg.load()?;
            let index = full_index(&data, cfg.normalization.bm25)?;
            write_file(&out, &index.to_tsv())?;
            eprintln!("indexed {} documents into {}", index.len(), out.display());
        }
        Command::Expand { run, mention } => {
            let cfg = run.resolve()?;
            let data = cfg.load()?;
            let e = expand_mention_with(
                &mention,
                &data.lexicon,
                &data.dict,
                cfg.normalization.expansion,
            );
            print_json(
                &json!({"config": cfg.echo(), "mention": e.original, "expanded": e.expanded, "applied": e.applied}),
            )?;
        }
        Command::Candidates {
            run,
            mention,
            index,
        } => {
            let cfg = run.resolve()?;
            let data = cfg.load()?;
            let index = match index {
                Some(p) => Bm25Index::<f64>::read_tsv(
                    fs::File::open(&p).with_context(|| format!("opening {}", p.display()))?,
                )
                .with_context(|| format!("reading index {}", p.display()))?,
                None => full_index(&data, cfg.normalization.bm25)?,
            };
            let (mut value, _) = candidates_json(&cfg, &data, &index, &mention);
            value["config"] = cfg.echo();
            print_json(&value)?;
        }
        Command::Normalize { run, mention } => {
            let cfg = run.resolve()?;
            let data = cfg.load()?;
            let scorer = cfg.scorer()?;
            let index = full_index(&data, cfg.normalization.bm25)?;
            let mut results = Vec::new();
            for (i, m) in mention.iter().enumerate() {
                let (mut value, list) = candidates_json(&cfg, &data, &index, m);
                let mref = MentionRef {
                    report_id: "cli".into(),
                    mention_id: format!("M{}", i + 1),
                };
                let preds = predict(
                    &cfg.normalization.ranker,
                    scorer.as_ref(),
                    &mref,
                    &list,
                    &data.lexicon,
                    None,
                )
                .map_err(|e| CliError::Data(e.into()))?;
                let wanted = cfg.span_mode.tag();
                let pick = preds
                    .iter()
                    .find(|p| {
                        cfg.normalization.ranker.kind != RankerKind::Span || p.ranker == wanted
                    })
                    .expect("a ranker always predicts");
                value["predicted"] = json!(pick.predicted);
                value["predicted_name"] = json!(pick
                    .predicted
                    .concept()
                    .map(|c| rendered_name(&data.lexicon, c)));
                value["score"] = json!(pick.score);
                value["ranker"] = json!(pick.ranker);
                results.push(value);
            }
            print_json(&json!({"config": cfg.echo(), "results": results}))?;
        }
        Command::Tag {
            run,
            text,
            tagger,
            out,
        } => {
            let cfg = run.resolve()?;
            let data = cfg.load()?;
            if let Some(text) = text {
                let dict = DictionaryTagger::new(
                    &data.lexicon,
                    data.corpus
                        .reports
                        .iter()
                        .flat_map(|r| r.mentions.iter().map(|m| m.surface.as_str())),
                );
                print!("{}", write_conll(&[dict.tag(&text, 0)]));
                return Ok(());
            }
            let remote;
            let source = match tagger.as_str() {
                "dictionary" => TaggerSource::Dictionary,
                "gold" => TaggerSource::Gold,
                spec => {
                    remote = scorer_from_spec(spec, Duration::from_secs(cfg.timeout_secs))
                        .map_err(|e| config_err("--tagger", e))?;
                    TaggerSource::Remote(remote.as_ref())
                }
            };
            let n = &cfg.normalization;
            let plans = plan_folds(&data.corpus, n.folds, n.seed, n.stratify_modality)
                .map_err(|e| CliError::Data(e.into()))?;
            let tcfg = TaggingConfig {
                tagger: source.name(),
                folds: n.folds,
                seed: n.seed,
                stratify_modality: n.stratify_modality,
            };
            let mut report =
                evaluate_tagging(&data.corpus, &data.lexicon, source, &tcfg, &plans, cfg.jobs)
                    .map_err(|e| CliError::Data(e.into()))?;
            let mut echo = cfg.echo();
            echo["tagger"] = json!(tcfg.tagger);
            report.config = echo;
            match out {
                Some(dir) => {
                    write_file(&dir.join("tagging.json"), &report.to_json())?;
                    write_file(
                        &dir.join("tagging.md"),
                        &tagging_markdown(&report, &tcfg.tagger),
                    )?;
                }
                None => print!("{}", report.to_json()),
            }
        }
        Command::Evaluate { run, out } => {
            let cfg = run.resolve()?;
            let data = cfg.load()?;
            let scorer = cfg.scorer()?;
            let plans = cfg
                .normalization
                .plan(&data.corpus)
                .map_err(|e| CliError::Data(e.into()))?;
            let mut result = evaluate_normalization(
                &data.corpus,
                &data.lexicon,
                &data.dict,
                &cfg.normalization,
                &plans,
                scorer.as_ref(),
                cfg.jobs,
            )
            .map_err(|e| CliError::Data(e.into()))?;
            result.report.config = cfg.echo();
            match out {
                Some(dir) => {
                    write_file(&dir.join("report.json"), &result.report.to_json())?;
                    write_file(
                        &dir.join("report.md"),
                        &normalization_markdown(&result.report),
                    )?;
                    write_file(
                        &dir.join("predictions.tsv"),
                        &predictions_tsv(&result.predictions),
                    )?;
                    print!("{}", normalization_markdown(&result.report));
                }
                None => print!("{}", result.report.to_json()),
            }
        }
        Command::Folds { run } => {
            let cfg = run.resolve()?;
            let data = cfg.load()?;
            let plans = cfg
                .normalization
                .plan(&data.corpus)
                .map_err(|e| CliError::Data(e.into()))?;
            print_json(&json!({"config": cfg.echo(), "folds": plans}))?;
        }
        Command::Stats { run, json } => {
            let cfg = run.resolve()?;
            let data = cfg.load()?;
            let stats = corpus_stats(&data.corpus.reports);
            if json {
                print_json(&json!({"config": cfg.echo(), "stats": stats}))?;
            } else {
                print!("{}", stats.to_markdown());
            }
        }
        Command::Agreement { a, b } => {
            let ca =
                Corpus::load_dir(&a).with_context(|| format!("reading corpus {}", a.display()))?;
            let cb =
                Corpus::load_dir(&b).with_context(|| format!("reading corpus {}", b.display()))?;
            let span_f1: f64 =
                span_agreement_f1(&ca.reports, &cb.reports).map_err(anyhow::Error::from)?;
            let (ma, mb) = align_mentions(&ca.reports, &cb.reports).map_err(anyhow::Error::from)?;
            let norm: f64 = normalization_agreement(&ma, &mb).map_err(anyhow::Error::from)?;
            print_json(&json!({
                "a": a.display().to_string(),
                "b": b.display().to_string(),
                "span_f1": span_f1,
                "aligned_mentions": ma.len(),
                "normalization_agreement": norm,
            }))?;
        }
        Command::ImportRadlex { input, out } => {
            let file =
                fs::File::open(&input).with_context(|| format!("opening {}", input.display()))?;
            let (lexicon, summary) =
                import_radlex_csv(file).with_context(|| format!("reading {}", input.display()))?;
            write_file(&out, &lexicon.to_tsv())?;
            eprintln!(
                "imported {} concepts ({} non-RID rows skipped, {} parents dropped)",
                summary.imported, summary.skipped_non_rid, summary.dropped_parents
            );
        }
        Command::Synth { out, seed } => {
            synthetic::generate(seed)
                .write(&out)
                .with_context(|| format!("writing {}", out.display()))?;
        }
        Command::Instances { run, kind } => {
            let cfg = run.resolve()?;
            let data = cfg.load()?;
            let index = full_index(&data, cfg.normalization.bm25)?;
            let mut out = io::stdout().lock();
            let cfg_n = &cfg.normalization;
            for r in &data.corpus.reports {
                for m in &r.mentions {
                    let expanded =
                        expand_mention_with(&m.surface, &data.lexicon, &data.dict, cfg_n.expansion);
                    let list = index.retrieve(&expanded, &cfg_n.bm25);
                    let line = match kind {
                        InstanceKind::Rerank => build_rerank_instances(
                            &expanded,
                            &list,
                            &data.lexicon,
                            Some(&m.gold_concept),
                            cfg_n.ranker.synonym_order_seed,
                        )
                        .iter()
                        .map(serde_json::to_string)
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(anyhow::Error::from)?,
                        InstanceKind::Span => {
                            if list.is_empty() {
                                continue;
                            }
                            let inst = build_span_instance(
                                &expanded,
                                &list,
                                &data.lexicon,
                                cfg_n.ranker.candidate_order,
                                Some(&m.gold_concept),
                            );
                            vec![serde_json::to_string(&inst).map_err(anyhow::Error::from)?]
                        }
                    };
                    for l in line {
                        writeln!(out, "{l}").map_err(anyhow::Error::from)?;
                    }
                }
            }
        }
        Command::StubScorer { stub, port } => {
            let model = match stub.as_str() {
                "lexical" => StubModel::Lexical,
                "constant" => StubModel::Constant(0.5),
                s => match s.strip_prefix("constant:").and_then(|p| p.parse().ok()) {
                    Some(p) => StubModel::Constant(p),
                    None => {
                        return Err(config_err(
                            "--stub",
                            format!("unknown stub {s:?}; expected lexical or constant[:p]"),
                        ))
                    }
                },
            };
            match port {
                Some(port) => {
                    let listener = TcpListener::bind(("127.0.0.1", port))
                        .map_err(|e| config_err("--port", e))?;
                    eprintln!(
                        "stub scorer listening on http://{}",
                        listener.local_addr().map_err(anyhow::Error::from)?
                    );
                    model
                        .serve_http(listener, None)
                        .map_err(anyhow::Error::from)?;
                }
                None => model
                    .serve(io::stdin().lock(), io::stdout().lock())
                    .map_err(anyhow::Error::from)?,
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
