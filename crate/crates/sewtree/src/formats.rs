//! JSON and CSV file formats.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sewtree_core::extract::{InstructionDoc, PatternSpec, StepExtraction};
use sewtree_core::grammar::{parse_grammar, GoldGrammar};
use sewtree_core::metrics::ScoreBreakdown;
use sewtree_core::pipeline::BuildReport;
use sewtree_core::piece::PieceLabel;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocJson {
    pub pattern_id: String,
    pub doc_id: String,
    pub steps: Vec<String>,
}

impl From<DocJson> for InstructionDoc {
    fn from(d: DocJson) -> Self {
        InstructionDoc {
            pattern_id: d.pattern_id,
            doc_id: d.doc_id,
            steps: d.steps,
        }
    }
}

impl From<&InstructionDoc> for DocJson {
    fn from(d: &InstructionDoc) -> Self {
        DocJson {
            pattern_id: d.pattern_id.clone(),
            doc_id: d.doc_id.clone(),
            steps: d.steps.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpecJson {
    pub pattern_id: String,
    pub pieces: BTreeMap<String, String>,
}

impl SpecJson {
    pub fn into_spec(self) -> std::result::Result<PatternSpec, String> {
        let mut pieces = Vec::with_capacity(self.pieces.len());
        for (label, name) in self.pieces {
            let p = PieceLabel::parse(&label).map_err(|e| format!("piece {label:?}: {e}"))?;
            pieces.push((p, name));
        }
        PatternSpec::new(self.pattern_id, pieces).map_err(|e| e.to_string())
    }
}

impl From<&PatternSpec> for SpecJson {
    fn from(s: &PatternSpec) -> Self {
        SpecJson {
            pattern_id: s.pattern_id().to_string(),
            pieces: s.pieces().iter().map(|(p, n)| (p.to_string(), n.clone())).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionJson {
    pub doc_id: String,
    pub pieces_per_step: Vec<Vec<String>>,
}

impl ExtractionJson {
    pub fn from_steps(doc_id: &str, xs: &[StepExtraction]) -> Self {
        ExtractionJson {
            doc_id: doc_id.to_string(),
            pieces_per_step: xs
                .iter()
                .map(|x| x.mentions.iter().map(ToString::to_string).collect())
                .collect(),
        }
    }

    /// Labels that fail to parse are an error; labels outside the inventory
    /// are kept so the build can diagnose them.
    pub fn to_steps(&self) -> std::result::Result<Vec<StepExtraction>, String> {
        self.pieces_per_step
            .iter()
            .enumerate()
            .map(|(i, ps)| {
                let labels = ps
                    .iter()
                    .map(|s| PieceLabel::parse(s).map_err(|e| format!("step {i}: piece {s:?}: {e}")))
                    .collect::<std::result::Result<Vec<_>, _>>()?;
                Ok(StepExtraction::new(i, labels))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticJson {
    pub step_index: usize,
    pub kind: &'static str,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct StepJson {
    pub step_index: usize,
    pub mentions: Vec<String>,
    pub effective: Vec<String>,
    pub resolved: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceJson {
    pub step_index: usize,
    pub subtree: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ForestJson {
    /// Assembled trees in bracket form.
    pub trees: Vec<String>,
    pub isolated_leaves: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BuildJson {
    pub doc_id: String,
    pub forest: ForestJson,
    pub steps: Vec<StepJson>,
    pub subtree_trace: Vec<TraceJson>,
    pub diagnostics: Vec<DiagnosticJson>,
}

fn strings<T: ToString>(xs: &[T]) -> Vec<String> {
    xs.iter().map(ToString::to_string).collect()
}

impl From<&BuildReport> for BuildJson {
    fn from(r: &BuildReport) -> Self {
        BuildJson {
            doc_id: r.doc_id.clone(),
            forest: ForestJson {
                trees: r.forest.assembled().map(|t| t.serialize()).collect(),
                isolated_leaves: r.forest.isolated_leaves().map(|p| p.to_string()).collect(),
            },
            steps: r
                .steps
                .iter()
                .map(|s| StepJson {
                    step_index: s.step_index,
                    mentions: strings(&s.mentions),
                    effective: strings(&s.effective),
                    resolved: strings(&s.resolved),
                })
                .collect(),
            subtree_trace: r
                .subtree_trace
                .iter()
                .map(|(i, st)| TraceJson {
                    step_index: *i,
                    subtree: st.to_string(),
                })
                .collect(),
            diagnostics: r
                .diagnostics
                .iter()
                .map(|d| DiagnosticJson {
                    step_index: d.step_index,
                    kind: d.kind.as_str(),
                    message: d.message.clone(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TreeScoreJson {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub best_gold_index: Option<usize>,
    pub best_gold: Option<String>,
    pub matched: Vec<String>,
}

/// Per-document detail written next to the scores CSV.
#[derive(Debug, Clone, Serialize)]
pub struct ReportJson {
    pub doc_id: String,
    pub pattern_id: String,
    pub n_steps: usize,
    pub build: BuildJson,
    pub tree_score: TreeScoreJson,
    pub bleu: Option<f64>,
    pub rouge_l: Option<f64>,
}

impl TreeScoreJson {
    pub fn new(s: &ScoreBreakdown, gold: &[sewtree_core::AssemblyNode]) -> Self {
        TreeScoreJson {
            precision: s.precision,
            recall: s.recall,
            f1: s.f1,
            best_gold_index: s.best_gold_index,
            best_gold: s.best_gold_index.map(|i| gold[i].serialize()),
            matched: s.matched.iter().map(ToString::to_string).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GoldJson {
    pub pattern_id: String,
    pub counts: BTreeMap<String, u128>,
    pub trees: Vec<String>,
}

/// One row of the scores CSV. `bert_score` is always empty; it exists so
/// externally computed values can be joined in by doc id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub doc_id: String,
    pub pattern_id: String,
    pub n_steps: usize,
    pub tree_f1: f64,
    pub tree_precision: f64,
    pub tree_recall: f64,
    pub best_gold_index: Option<usize>,
    pub bleu: Option<f64>,
    pub rouge_l: Option<f64>,
    pub diagnostics_count: usize,
    pub bert_score: Option<f64>,
}

pub const SCORE_HEADER: [&str; 11] = [
    "doc_id",
    "pattern_id",
    "n_steps",
    "tree_f1",
    "tree_precision",
    "tree_recall",
    "best_gold_index",
    "bleu",
    "rouge_l",
    "diagnostics_count",
    "bert_score",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub doc_id: String,
    pub errors: usize,
}

pub const ERROR_HEADER: [&str; 2] = ["doc_id", "errors"];

#[derive(Debug, Deserialize)]
pub struct RatingRow {
    pub doc_id: String,
    pub step_index: usize,
    pub question: String,
    pub rating: i64,
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes to `path`, or to stdout when `path` is `None`.
pub fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => write_bytes(p, bytes),
        None => std::io::stdout()
            .lock()
            .write_all(bytes)
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn to_json_pretty<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("plain data serializes");
    out.push(b'\n');
    out
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(DocJson),
    Many(Vec<DocJson>),
}

/// A file holding either one document object or an array of them.
pub fn read_docs(path: &Path) -> Result<Vec<InstructionDoc>> {
    Ok(match read_json::<OneOrMany>(path)? {
        OneOrMany::One(d) => vec![d.into()],
        OneOrMany::Many(ds) => ds.into_iter().map(Into::into).collect(),
    })
}

pub fn read_spec(path: &Path) -> Result<PatternSpec> {
    read_json::<SpecJson>(path)?
        .into_spec()
        .map_err(|m| Error::format(path, m))
}

pub fn read_grammar(path: &Path) -> Result<GoldGrammar> {
    parse_grammar(&read_text(path)?).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))
}

/// Header is written even when there are no rows.
pub fn csv_bytes<T: Serialize>(header: &[&str], rows: &[T]) -> Result<Vec<u8>> {
    let csv_err = |source| Error::Csv {
        path: "<output>".into(),
        source,
    };
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Config(e.to_string()))
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })?;
    r.deserialize()
        .map(|row| {
            row.map_err(|source| Error::Csv {
                path: path.to_path_buf(),
                source,
            })
        })
        .collect()
}
