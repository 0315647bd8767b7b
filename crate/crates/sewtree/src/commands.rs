//! The work behind each CLI subcommand, independent of argument parsing.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use sewtree_core::extract::{AttachmentPolicy, InstructionDoc, PatternSpec};
use sewtree_core::grammar::{count_derivations, enumerate_gold_trees, GoldGrammar};
use sewtree_core::metrics::{bleu, pearson, rouge_l, tree_score, Correlation, MetricConfig};
use sewtree_core::perturb::{doc_rng, inject_errors, permute_doc, Edit, ErrorPlan};
use sewtree_core::pipeline::{build_forest, linearize_gold_tree, BuildReport};
use sewtree_core::ratings::{aggregate_ratings, Question, RatingRecord};
use sewtree_core::synth::synthetic_spec;
use sewtree_core::tree::AssemblyNode;

use crate::error::{Error, Result};
use crate::extractor::{Extractor, Gated};
use crate::formats::{BuildJson, ErrorRow, GoldJson, RatingRow, ReportJson, ScoreRow, TreeScoreJson};

/// Runs `f` on a pool of `workers` threads (at least one).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

pub fn gen_gold(g: &GoldGrammar, cap: u128) -> Result<GoldJson> {
    let trees = enumerate_gold_trees(g, cap).map_err(|e| Error::Invalid(format!("{}: {e}", g.pattern_id())))?;
    let counts = count_derivations(g);
    Ok(GoldJson {
        pattern_id: g.pattern_id().to_string(),
        counts: g.roots().iter().map(|r| (r.to_string(), counts.get(r).copied().unwrap_or(0))).collect(),
        trees: trees.iter().map(|t| t.serialize()).collect(),
    })
}

/// Extraction plus build for one document.
pub fn build_doc<E: Extractor>(
    doc: &InstructionDoc,
    spec: &PatternSpec,
    extractor: &Gated<E>,
    policy: &AttachmentPolicy,
) -> Result<BuildReport> {
    let (xs, mut diags) = extractor.extract_document(doc, spec).map_err(|source| Error::Extract {
        doc_id: doc.doc_id.clone(),
        source,
    })?;
    let mut report = build_forest(doc, &xs, spec, policy);
    diags.append(&mut report.diagnostics);
    diags.sort_by_key(|d| d.step_index);
    report.diagnostics = diags;
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct DocScore {
    pub row: ScoreRow,
    pub report: ReportJson,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocFailure {
    pub doc_id: String,
    pub message: String,
}

/// Everything needed to score documents of known patterns.
pub struct Scorer<E> {
    specs: BTreeMap<String, PatternSpec>,
    gold: BTreeMap<String, std::result::Result<Vec<AssemblyNode>, String>>,
    references: BTreeMap<String, String>,
    extractor: Gated<E>,
    pub policy: AttachmentPolicy,
    pub metrics: MetricConfig,
}

impl<E: Extractor> Scorer<E> {
    /// Enumerates every grammar up front. A grammar over the cap only fails
    /// the documents that need it.
    pub fn new(
        grammars: &BTreeMap<String, GoldGrammar>,
        specs: BTreeMap<String, PatternSpec>,
        references: BTreeMap<String, String>,
        extractor: E,
        cap: u128,
    ) -> Self {
        let gold = grammars
            .iter()
            .map(|(k, g)| (k.clone(), enumerate_gold_trees(g, cap).map_err(|e| e.to_string())))
            .collect();
        Scorer {
            specs,
            gold,
            references,
            extractor: Gated::new(extractor),
            policy: AttachmentPolicy::default(),
            metrics: MetricConfig::default(),
        }
    }

    /// Scorer with gold trees supplied directly.
    pub fn from_gold(
        gold: BTreeMap<String, Vec<AssemblyNode>>,
        specs: BTreeMap<String, PatternSpec>,
        references: BTreeMap<String, String>,
        extractor: E,
    ) -> Self {
        Scorer {
            specs,
            gold: gold.into_iter().map(|(k, v)| (k, Ok(v))).collect(),
            references,
            extractor: Gated::new(extractor),
            policy: AttachmentPolicy::default(),
            metrics: MetricConfig::default(),
        }
    }

    pub fn score_doc(&self, doc: &InstructionDoc) -> std::result::Result<DocScore, DocFailure> {
        let fail = |message: String| DocFailure {
            doc_id: doc.doc_id.clone(),
            message,
        };
        let pid = &doc.pattern_id;
        let spec = self
            .specs
            .get(pid)
            .ok_or_else(|| fail(format!("no spec for pattern {pid:?}")))?;
        let gold = match self.gold.get(pid) {
            None => return Err(fail(format!("no grammar for pattern {pid:?}"))),
            Some(Err(e)) => return Err(fail(format!("pattern {pid:?}: {e}"))),
            Some(Ok(g)) => g,
        };
        let report = build_doc(doc, spec, &self.extractor, &self.policy).map_err(|e| fail(e.to_string()))?;
        let score = tree_score(&report.forest, gold).map_err(|e| fail(format!("pattern {pid:?}: {e}")))?;
        let (b, r) = match self.references.get(pid) {
            Some(reference) => {
                let candidate = doc.steps.join("\n");
                (
                    Some(bleu(&candidate, reference, &self.metrics)),
                    Some(rouge_l(&candidate, reference, &self.metrics)),
                )
            }
            None => (None, None),
        };
        let row = ScoreRow {
            doc_id: doc.doc_id.clone(),
            pattern_id: pid.clone(),
            n_steps: doc.steps.len(),
            tree_f1: score.f1,
            tree_precision: score.precision,
            tree_recall: score.recall,
            best_gold_index: score.best_gold_index,
            bleu: b,
            rouge_l: r,
            diagnostics_count: report.diagnostics.len(),
            bert_score: None,
        };
        let report = ReportJson {
            doc_id: doc.doc_id.clone(),
            pattern_id: pid.clone(),
            n_steps: doc.steps.len(),
            build: BuildJson::from(&report),
            tree_score: TreeScoreJson::new(&score, gold),
            bleu: b,
            rouge_l: r,
        };
        Ok(DocScore { row, report })
    }

    /// Scores in parallel; output order follows `docs`.
    pub fn score_all(&self, docs: &[InstructionDoc], workers: usize) -> Result<Vec<std::result::Result<DocScore, DocFailure>>>
    where
        E: Sync,
    {
        with_workers(workers, || docs.par_iter().map(|d| self.score_doc(d)).collect())
    }
}

pub fn permute_all(docs: &[InstructionDoc], seed: u64, k: usize, workers: usize) -> Result<Vec<InstructionDoc>> {
    if k == 0 {
        return Err(Error::Config("permutation count must be at least 1".into()));
    }
    let nested: Vec<Vec<InstructionDoc>> =
        with_workers(workers, || docs.par_iter().map(|d| permute_doc(d, seed, k)).collect())?;
    Ok(nested.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InjectedDoc {
    pub doc: InstructionDoc,
    pub applied: usize,
    pub edits: Vec<Edit>,
}

/// Corrupts every document with the same plan. Randomness is keyed by the
/// original doc id; `suffix` is appended to the output ids.
pub fn inject_all(
    docs: &[InstructionDoc],
    specs: &BTreeMap<String, PatternSpec>,
    plan: &ErrorPlan,
    seed: u64,
    suffix: &str,
    workers: usize,
) -> Result<Vec<InjectedDoc>> {
    let out: Vec<Result<InjectedDoc>> = with_workers(workers, || {
        docs.par_iter()
            .map(|d| {
                let spec = specs
                    .get(&d.pattern_id)
                    .ok_or_else(|| Error::Invalid(format!("{}: no spec for pattern {:?}", d.doc_id, d.pattern_id)))?;
                let mut rng = doc_rng(seed, &d.doc_id);
                let r = inject_errors(d, plan, spec, &mut rng)
                    .map_err(|e| Error::Invalid(format!("{}: {e}", d.doc_id)))?;
                let mut doc = r.doc;
                doc.doc_id.push_str(suffix);
                Ok(InjectedDoc {
                    doc,
                    applied: r.applied,
                    edits: r.edits,
                })
            })
            .collect()
    })?;
    out.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CorrelationRow {
    pub metric: String,
    pub n: usize,
    pub r: f64,
    pub t: f64,
    pub p: f64,
}

/// Pearson correlation of each score column against errors per step.
///
/// `scores_csv` must have `doc_id` and `n_steps` columns. Rows with an
/// empty value in a requested column are skipped for that column.
pub fn correlate(scores_csv: &str, errors: &[ErrorRow], columns: &[String]) -> Result<Vec<CorrelationRow>> {
    let mut rdr = csv::Reader::from_reader(scores_csv.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| Error::Invalid(format!("scores: {e}")))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Invalid(format!("scores: no column {name:?}")))
    };
    let id_col = col("doc_id")?;
    let steps_col = col("n_steps")?;
    let metric_cols = columns.iter().map(|c| col(c)).collect::<Result<Vec<_>>>()?;

    let mut error_of: BTreeMap<&str, usize> = BTreeMap::new();
    for e in errors {
        if error_of.insert(e.doc_id.as_str(), e.errors).is_some() {
            return Err(Error::Invalid(format!("errors: duplicate doc_id {:?}", e.doc_id)));
        }
    }

    let mut xs: Vec<Vec<f64>> = vec![Vec::new(); columns.len()];
    let mut ys: Vec<Vec<f64>> = vec![Vec::new(); columns.len()];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Invalid(format!("scores: {e}")))?;
        let id = &rec[id_col];
        let Some(&errs) = error_of.get(id) else { continue };
        let steps: f64 = rec[steps_col]
            .parse::<usize>()
            .map_err(|e| Error::Invalid(format!("scores: {id}: n_steps: {e}")))? as f64;
        let per_step = if steps > 0.0 { errs as f64 / steps } else { 0.0 };
        for (k, &c) in metric_cols.iter().enumerate() {
            let v = rec[c].trim();
            if v.is_empty() {
                continue;
            }
            let v: f64 = v
                .parse()
                .map_err(|e| Error::Invalid(format!("scores: {id}: {}: {e}", columns[k])))?;
            xs[k].push(v);
            ys[k].push(per_step);
        }
    }
    columns
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let Correlation { n, r, t, p } =
                pearson(&xs[k], &ys[k]).map_err(|e| Error::Invalid(format!("{name}: {e}")))?;
            Ok(CorrelationRow {
                metric: name.clone(),
                n,
                r,
                t,
                p,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundtripFailure {
    pub tree_index: usize,
    pub tree: String,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundtripResult {
    pub pattern_id: String,
    pub trees: usize,
    pub failures: Vec<RoundtripFailure>,
}

/// For every gold tree: linearize, rebuild with the rule-based extractor,
/// and score against the full gold set. `linearize` is normally
/// [`linearize_gold_tree`]; tests swap in a faulty one.
pub fn roundtrip_with<F>(
    grammars: &BTreeMap<String, GoldGrammar>,
    specs: &BTreeMap<String, PatternSpec>,
    cap: u128,
    linearize: F,
) -> Result<Vec<RoundtripResult>>
where
    F: Fn(&AssemblyNode, &PatternSpec) -> InstructionDoc,
{
    let policy = AttachmentPolicy::default();
    let extractor = Gated::new(crate::extractor::RuleBased);
    let mut out = Vec::new();
    for (pid, g) in grammars {
        let trees = enumerate_gold_trees(g, cap).map_err(|e| Error::Invalid(format!("{pid}: {e}")))?;
        let spec = match specs.get(pid) {
            Some(s) => s.clone(),
            None => synthetic_spec(pid, g.inventory().iter().copied()),
        };
        let mut failures = Vec::new();
        for (i, t) in trees.iter().enumerate() {
            let doc = linearize(t, &spec);
            let report = build_doc(&doc, &spec, &extractor, &policy)?;
            let f1 = tree_score(&report.forest, &trees).map(|s| s.f1).unwrap_or(0.0);
            let exact = report.forest.trees() == std::slice::from_ref(t);
            if f1 != 1.0 || !exact {
                failures.push(RoundtripFailure {
                    tree_index: i,
                    tree: t.serialize(),
                    f1,
                });
            }
        }
        out.push(RoundtripResult {
            pattern_id: pid.clone(),
            trees: trees.len(),
            failures,
        });
    }
    Ok(out)
}

pub fn roundtrip(
    grammars: &BTreeMap<String, GoldGrammar>,
    specs: &BTreeMap<String, PatternSpec>,
    cap: u128,
) -> Result<Vec<RoundtripResult>> {
    roundtrip_with(grammars, specs, cap, linearize_gold_tree)
}

pub fn roundtrip_text(results: &[RoundtripResult]) -> String {
    let mut s = String::new();
    for r in results {
        let ok = r.trees - r.failures.len();
        let _ = writeln!(s, "{}: {ok}/{} trees round-trip", r.pattern_id, r.trees);
        for f in &r.failures {
            let _ = writeln!(s, "  FAIL tree {} {} (f1 = {})", f.tree_index, f.tree, f.f1);
        }
    }
    s
}

pub const RATINGS_HEADER: [&str; 16] = [
    "doc_id", "S1_mean", "S1_above3", "S1_below3", "S2_mean", "S2_above3", "S2_below3", "S3_mean",
    "S3_above3", "S3_below3", "S4_mean", "S4_above3", "S4_below3", "S5_mean", "S5_above3", "S5_below3",
];

/// Ratings CSV (`doc_id,step_index,question,rating`) to the per-document
/// summary table. Unrated questions leave their three cells empty.
pub fn aggregate_ratings_csv(input: &str) -> Result<Vec<u8>> {
    let mut rdr = csv::Reader::from_reader(input.as_bytes());
    let mut records = Vec::new();
    for (i, row) in rdr.deserialize::<RatingRow>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::Invalid(format!("ratings line {line}: {e}")))?;
        let q: Question = row
            .question
            .parse()
            .map_err(|e| Error::Invalid(format!("ratings line {line}: {e}")))?;
        let rec = RatingRecord::new(row.doc_id, row.step_index, q, row.rating)
            .map_err(|e| Error::Invalid(format!("ratings line {line}: {e}")))?;
        records.push(rec);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Config(e.to_string());
    w.write_record(RATINGS_HEADER).map_err(csv_err)?;
    for s in aggregate_ratings(&records) {
        let mut rec = vec![s.doc_id.clone()];
        for q in &s.questions {
            match q {
                Some(q) => rec.extend([q.mean.to_string(), q.above.to_string(), q.below.to_string()]),
                None => rec.extend([String::new(), String::new(), String::new()]),
            }
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Config(e.to_string()))
}
