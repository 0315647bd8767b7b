use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sewtree_core::extract::AttachmentPolicy;
use sewtree_core::grammar::{count_derivations, parse_grammar, DEFAULT_CAP};
use sewtree_core::perturb::ErrorPlan;
use sewtree_core::pipeline::build_forest;

use sewtree::commands::{self, Scorer};
use sewtree::corpus::{load_docs, load_grammars, load_references, load_specs};
use sewtree::error::{Error, Result};
use sewtree::extractor::{AdapterConfig, Extractor, Fallback, Gated, HttpAdapter, RuleBased};
use sewtree::formats::{
    self, csv_bytes, emit, read_csv, read_json, to_json_pretty, BuildJson, DocJson, ErrorRow, ExtractionJson,
    ERROR_HEADER, SCORE_HEADER,
};

#[derive(Parser)]
#[command(name = "sewtree", version, about = "Tree-based evaluation of sewing assembly instructions")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Experiment seed; all randomness is derived from it and the doc id.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for per-document work.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    #[arg(long, global = true, value_enum, default_value_t = ExtractorKind::RuleBased)]
    extractor: ExtractorKind,
    #[arg(long, global = true)]
    adapter_url: Option<String>,
    #[arg(long, global = true, default_value_t = 30_000)]
    adapter_timeout_ms: u64,
    #[arg(long, global = true, default_value_t = 2)]
    adapter_retries: u32,
    /// Use the rule-based extractor when the adapter fails.
    #[arg(long, global = true)]
    adapter_fallback: bool,
    /// Send adapter requests one at a time.
    #[arg(long, global = true)]
    adapter_serial: bool,
    /// Maximum number of gold trees per grammar.
    #[arg(long, global = true, default_value_t = DEFAULT_CAP)]
    cap: u128,
    /// Output file (stdout when omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExtractorKind {
    RuleBased,
    Adapter,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate the gold trees of a grammar as JSON.
    GenGold { grammar: PathBuf },
    /// Check grammar files; exits 1 if any is invalid.
    ValidateGrammar {
        #[arg(required = true)]
        grammars: Vec<PathBuf>,
    },
    /// Per-step piece extraction as JSON.
    Extract {
        docs: PathBuf,
        #[arg(long)]
        spec: PathBuf,
    },
    /// Build the predicted forest of each document.
    Build {
        docs: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        /// Precomputed extraction JSON instead of running an extractor.
        #[arg(long)]
        extraction: Option<PathBuf>,
    },
    /// Score a corpus; writes the scores CSV.
    Score {
        corpus: PathBuf,
        #[arg(long)]
        grammars: PathBuf,
        #[arg(long)]
        specs: PathBuf,
        /// Reference texts for BLEU and ROUGE-L.
        #[arg(long)]
        references: Option<PathBuf>,
        /// Directory for per-document JSON reports.
        #[arg(long)]
        reports: Option<PathBuf>,
    },
    /// Seeded step permutations of each document.
    Permute {
        docs: PathBuf,
        #[arg(short, long, default_value_t = 20)]
        k: usize,
    },
    /// Seeded synthetic errors; writes corrupted docs and an errors CSV.
    InjectErrors {
        docs: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 0)]
        swap: usize,
        #[arg(long, default_value_t = 0)]
        drop: usize,
        #[arg(long, default_value_t = 0)]
        wrong_piece: usize,
        /// Appended to every output doc id.
        #[arg(long, default_value = "")]
        suffix: String,
        /// Where to write `doc_id,errors` (default: `<out>.errors.csv`, or
        /// stderr without `--out`).
        #[arg(long)]
        errors_csv: Option<PathBuf>,
    },
    /// Pearson correlation of score columns against errors per step.
    Correlate {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        errors: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "tree_f1,bleu,rouge_l")]
        columns: Vec<String>,
    },
    /// Linearize, rebuild, and rescore every gold tree.
    Roundtrip {
        grammars: PathBuf,
        #[arg(long)]
        specs: Option<PathBuf>,
    },
    /// Per-document summaries of step-level ratings.
    AggregateRatings { ratings: PathBuf },
}

fn extractor(g: &Global) -> Result<Box<dyn Extractor>> {
    Ok(match g.extractor {
        ExtractorKind::RuleBased => Box::new(RuleBased),
        ExtractorKind::Adapter => {
            let url = g
                .adapter_url
                .clone()
                .ok_or_else(|| Error::Config("--extractor adapter needs --adapter-url".into()))?;
            let mut cfg = AdapterConfig::new(url);
            cfg.timeout = Duration::from_millis(g.adapter_timeout_ms);
            cfg.retries = g.adapter_retries;
            cfg.fallback = if g.adapter_fallback { Fallback::RuleBased } else { Fallback::Fail };
            cfg.concurrent = !g.adapter_serial;
            Box::new(HttpAdapter::new(cfg))
        }
    })
}

fn spec_for<'a>(
    specs: &'a BTreeMap<String, sewtree_core::PatternSpec>,
    doc: &sewtree_core::InstructionDoc,
) -> Result<&'a sewtree_core::PatternSpec> {
    specs
        .get(&doc.pattern_id)
        .ok_or_else(|| Error::Invalid(format!("{}: no spec for pattern {:?}", doc.doc_id, doc.pattern_id)))
}

/// A single item is written bare; several become a JSON array.
fn json_one_or_many<T: serde::Serialize>(items: &[T]) -> Vec<u8> {
    match items {
        [one] => to_json_pretty(one),
        many => to_json_pretty(many),
    }
}

fn run(cli: Cli) -> Result<bool> {
    let g = &cli.global;
    let out = g.out.as_deref();
    match cli.command {
        Command::GenGold { grammar } => {
            let gr = formats::read_grammar(&grammar)?;
            emit(out, &to_json_pretty(&commands::gen_gold(&gr, g.cap)?))?;
        }
        Command::ValidateGrammar { grammars } => {
            let mut ok = true;
            let mut report = String::new();
            for path in &grammars {
                match parse_grammar(&formats::read_text(path)?) {
                    Ok(gr) => {
                        let counts = count_derivations(&gr);
                        let trees = gr
                            .roots()
                            .iter()
                            .fold(0u128, |acc, r| acc.saturating_add(counts.get(r).copied().unwrap_or(0)));
                        report.push_str(&format!(
                            "{}: ok (pattern {}, {} rules, {trees} trees)\n",
                            path.display(),
                            gr.pattern_id(),
                            gr.rules().len()
                        ));
                    }
                    Err(e) => {
                        ok = false;
                        report.push_str(&format!("{}: invalid: {e}\n", path.display()));
                    }
                }
            }
            emit(out, report.as_bytes())?;
            return Ok(ok);
        }
        Command::Extract { docs, spec } => {
            let docs = load_docs(&docs)?;
            let specs = load_specs(&spec)?;
            let ex = Gated::new(extractor(g)?);
            let mut rows = Vec::with_capacity(docs.len());
            for d in &docs {
                let (xs, diags) = ex.extract_document(d, spec_for(&specs, d)?).map_err(|source| Error::Extract {
                    doc_id: d.doc_id.clone(),
                    source,
                })?;
                for diag in diags {
                    eprintln!("{}: step {}: {}: {}", d.doc_id, diag.step_index, diag.kind, diag.message);
                }
                rows.push(ExtractionJson::from_steps(&d.doc_id, &xs));
            }
            emit(out, &json_one_or_many(&rows))?;
        }
        Command::Build { docs, spec, extraction } => {
            let docs = load_docs(&docs)?;
            let specs = load_specs(&spec)?;
            let policy = AttachmentPolicy::default();
            let mut reports = Vec::with_capacity(docs.len());
            match extraction {
                Some(path) => {
                    let xs: Vec<ExtractionJson> = match read_json::<serde_json::Value>(&path)? {
                        v @ serde_json::Value::Array(_) => serde_json::from_value(v),
                        v => serde_json::from_value(v).map(|x| vec![x]),
                    }
                    .map_err(|e| Error::format(&path, e))?;
                    let by_id: BTreeMap<&str, &ExtractionJson> = xs.iter().map(|x| (x.doc_id.as_str(), x)).collect();
                    for d in &docs {
                        let x = by_id
                            .get(d.doc_id.as_str())
                            .ok_or_else(|| Error::Invalid(format!("{}: no extraction for this doc", d.doc_id)))?;
                        let steps = x.to_steps().map_err(|m| Error::format(&path, m))?;
                        reports.push(BuildJson::from(&build_forest(d, &steps, spec_for(&specs, d)?, &policy)));
                    }
                }
                None => {
                    let ex = Gated::new(extractor(g)?);
                    for d in &docs {
                        let r = commands::build_doc(d, spec_for(&specs, d)?, &ex, &policy)?;
                        reports.push(BuildJson::from(&r));
                    }
                }
            }
            emit(out, &json_one_or_many(&reports))?;
        }
        Command::Score {
            corpus,
            grammars,
            specs,
            references,
            reports,
        } => {
            let docs = load_docs(&corpus)?;
            let grammars = load_grammars(&grammars)?;
            let specs = load_specs(&specs)?;
            let references = match references {
                Some(p) => load_references(&p)?,
                None => BTreeMap::new(),
            };
            let scorer = Scorer::new(&grammars, specs, references, extractor(g)?, g.cap);
            let mut rows = Vec::new();
            let mut ok = true;
            for r in scorer.score_all(&docs, g.workers)? {
                match r {
                    Ok(s) => {
                        if let Some(dir) = &reports {
                            let path = dir.join(format!("{}.json", s.row.doc_id));
                            formats::write_bytes(&path, &to_json_pretty(&s.report))?;
                        }
                        rows.push(s.row);
                    }
                    Err(f) => {
                        ok = false;
                        eprintln!("error: {}: {}", f.doc_id, f.message);
                    }
                }
            }
            emit(out, &csv_bytes(&SCORE_HEADER, &rows)?)?;
            return Ok(ok);
        }
        Command::Permute { docs, k } => {
            let docs = load_docs(&docs)?;
            let permuted = commands::permute_all(&docs, g.seed, k, g.workers)?;
            let json: Vec<DocJson> = permuted.iter().map(DocJson::from).collect();
            emit(out, &to_json_pretty(&json))?;
        }
        Command::InjectErrors {
            docs,
            spec,
            swap,
            drop,
            wrong_piece,
            suffix,
            errors_csv,
        } => {
            let docs = load_docs(&docs)?;
            let specs = load_specs(&spec)?;
            let plan = ErrorPlan {
                swap_adjacent: swap,
                drop_step: drop,
                wrong_piece,
            };
            let injected = commands::inject_all(&docs, &specs, &plan, g.seed, &suffix, g.workers)?;
            let json: Vec<DocJson> = injected.iter().map(|i| DocJson::from(&i.doc)).collect();
            emit(out, &to_json_pretty(&json))?;
            let rows: Vec<ErrorRow> = injected
                .iter()
                .map(|i| ErrorRow {
                    doc_id: i.doc.doc_id.clone(),
                    errors: i.applied,
                })
                .collect();
            let csv = csv_bytes(&ERROR_HEADER, &rows)?;
            let target = errors_csv.or_else(|| {
                out.map(|p| {
                    let mut s = p.as_os_str().to_owned();
                    s.push(".errors.csv");
                    PathBuf::from(s)
                })
            });
            match target {
                Some(p) => formats::write_bytes(&p, &csv)?,
                None => eprint!("{}", String::from_utf8_lossy(&csv)),
            }
        }
        Command::Correlate { scores, errors, columns } => {
            let text = formats::read_text(&scores)?;
            let errors: Vec<ErrorRow> = read_csv(&errors)?;
            let rows = commands::correlate(&text, &errors, &columns)?;
            emit(out, &csv_bytes(&["metric", "n", "r", "t", "p"], &rows)?)?;
        }
        Command::Roundtrip { grammars, specs } => {
            let grammars = load_grammars(&grammars)?;
            let specs = match specs {
                Some(p) => load_specs(&p)?,
                None => BTreeMap::new(),
            };
            let results = commands::roundtrip(&grammars, &specs, g.cap)?;
            emit(out, commands::roundtrip_text(&results).as_bytes())?;
            return Ok(results.iter().all(|r| r.failures.is_empty()));
        }
        Command::AggregateRatings { ratings } => {
            let text = formats::read_text(&ratings)?;
            emit(out, &commands::aggregate_ratings_csv(&text)?)?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

