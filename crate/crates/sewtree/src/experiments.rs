//! The permutation-robustness and error-correlation experiments, run on
//! linearized gold trees of real or synthetic grammars.

use rand::Rng;
use rayon::prelude::*;
use sewtree_core::extract::{AttachmentPolicy, InstructionDoc, PatternSpec};
use sewtree_core::grammar::{enumerate_gold_trees, GoldGrammar, DEFAULT_CAP};
use sewtree_core::metrics::{bleu, ngram_precision, pearson, rouge_l, tokenize, tree_score, Correlation, MetricConfig};
use sewtree_core::perturb::{doc_rng, inject_errors, permute_doc, ErrorPlan};
use sewtree_core::pipeline::{build_rule_based, linearize_gold_tree};
use sewtree_core::synth::{random_grammar, synthetic_spec, SynthConfig};
use sewtree_core::tree::AssemblyNode;

use crate::commands::with_workers;
use crate::error::Result;

#[derive(Debug, Clone)]
pub struct Pattern {
    pub grammar: GoldGrammar,
    pub spec: PatternSpec,
    pub gold: Vec<AssemblyNode>,
}

impl Pattern {
    pub fn new(grammar: GoldGrammar, spec: PatternSpec) -> Result<Self> {
        let gold = enumerate_gold_trees(&grammar, DEFAULT_CAP)
            .map_err(|e| crate::error::Error::Invalid(format!("{}: {e}", grammar.pattern_id())))?;
        Ok(Pattern { grammar, spec, gold })
    }

    pub fn id(&self) -> &str {
        self.grammar.pattern_id()
    }

    /// Linearization of gold tree `i`, doc id `{pattern}-t{i}`.
    pub fn gold_doc(&self, i: usize) -> InstructionDoc {
        let mut d = linearize_gold_tree(&self.gold[i], &self.spec);
        d.doc_id = format!("{}-t{i}", self.id());
        d
    }

    fn score(&self, doc: &InstructionDoc) -> f64 {
        let report = build_rule_based(doc, &self.spec, &AttachmentPolicy::default());
        tree_score(&report.forest, &self.gold).map(|s| s.f1).unwrap_or(0.0)
    }
}

/// `n` random grammars, pattern ids `syn{i:02}`, each drawn from its own
/// stream so the set for a smaller `n` is a prefix of the set for a larger.
pub fn synthetic_patterns(seed: u64, n: usize, cfg: &SynthConfig) -> Vec<Pattern> {
    (0..n)
        .map(|i| {
            let id = format!("syn{i:02}");
            let mut rng = doc_rng(seed, &id);
            let g = random_grammar(&mut rng, &id, cfg);
            let spec = synthetic_spec(&id, g.inventory().iter().copied());
            Pattern::new(g, spec).expect("generated grammars are valid and small")
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PermutationOutcome {
    pub doc_id: String,
    pub n_steps: usize,
    pub original_score: f64,
    pub permuted_scores: Vec<f64>,
    /// Unigram (matches, total) against the unpermuted text: the original
    /// first, then one entry per permutation.
    pub unigram: Vec<(usize, usize)>,
    pub original_bleu: f64,
    pub permuted_bleu: Vec<f64>,
}

impl PermutationOutcome {
    pub fn mean_permuted(&self) -> f64 {
        self.permuted_scores.iter().sum::<f64>() / self.permuted_scores.len() as f64
    }

    pub fn unigram_precision(&self) -> Vec<f64> {
        self.unigram.iter().map(|&(m, t)| m as f64 / t as f64).collect()
    }
}

/// Scores `k` seeded step permutations of each gold document.
pub fn permutation_experiment(
    items: &[(&Pattern, InstructionDoc)],
    seed: u64,
    k: usize,
    workers: usize,
) -> Result<Vec<PermutationOutcome>> {
    let cfg = MetricConfig::default();
    with_workers(workers, || {
        items
            .par_iter()
            .map(|(pat, doc)| {
                let reference = doc.steps.join("\n");
                let ref_tokens = tokenize(&reference);
                let mut unigram = vec![ngram_precision(&ref_tokens, &ref_tokens, 1)];
                let mut permuted_scores = Vec::with_capacity(k);
                let mut permuted_bleu = Vec::with_capacity(k);
                for p in permute_doc(doc, seed, k) {
                    let text = p.steps.join("\n");
                    unigram.push(ngram_precision(&tokenize(&text), &ref_tokens, 1));
                    permuted_bleu.push(bleu(&text, &reference, &cfg));
                    permuted_scores.push(pat.score(&p));
                }
                PermutationOutcome {
                    doc_id: doc.doc_id.clone(),
                    n_steps: doc.steps.len(),
                    original_score: pat.score(doc),
                    permuted_scores,
                    unigram,
                    original_bleu: bleu(&reference, &reference, &cfg),
                    permuted_bleu,
                }
            })
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorOutcome {
    pub doc_id: String,
    pub pattern_id: String,
    pub errors: usize,
    pub n_steps: usize,
    pub tree_f1: f64,
    pub bleu: f64,
    pub rouge_l: f64,
}

impl ErrorOutcome {
    pub fn errors_per_step(&self) -> f64 {
        self.errors as f64 / self.n_steps.max(1) as f64
    }
}

/// Splits `total` errors over the three kinds at random, keeping the plan
/// feasible for a linearized document of `n` steps (every such step names
/// at least one piece). Returns `None` when no feasible split exists.
pub fn random_plan<R: Rng + ?Sized>(rng: &mut R, total: usize, n: usize, pieces: usize) -> Option<ErrorPlan> {
    let mut plan = ErrorPlan::default();
    for _ in 0..total {
        let mut kinds = Vec::with_capacity(3);
        if n >= 2 {
            kinds.push(0);
        }
        if plan.drop_step + 1 < n && plan.wrong_piece + plan.drop_step < n {
            kinds.push(1);
        }
        if pieces >= 2 && plan.wrong_piece + plan.drop_step < n {
            kinds.push(2);
        }
        if kinds.is_empty() {
            return None;
        }
        match kinds[rng.gen_range(0..kinds.len() as u64) as usize] {
            0 => plan.swap_adjacent += 1,
            1 => plan.drop_step += 1,
            _ => plan.wrong_piece += 1,
        }
    }
    Some(plan)
}

/// For each pattern's first gold tree, each error count in `0..=max_errors`,
/// and each of `replicates` independent draws, injects that many random
/// errors into the linearized document and scores the result. Infeasible
/// combinations are skipped.
pub fn error_experiment(
    patterns: &[Pattern],
    seed: u64,
    max_errors: usize,
    replicates: usize,
    workers: usize,
) -> Result<Vec<ErrorOutcome>> {
    let cfg = MetricConfig::default();
    let jobs: Vec<(&Pattern, usize, usize)> = patterns
        .iter()
        .flat_map(|p| (0..=max_errors).flat_map(move |e| (0..replicates).map(move |r| (p, e, r))))
        .collect();
    let out: Vec<Option<ErrorOutcome>> = with_workers(workers, || {
        jobs.par_iter()
            .map(|&(pat, e, r)| {
                let gold = pat.gold_doc(0);
                let doc_id = format!("{}-e{e}-r{r}", gold.doc_id);
                let mut rng = doc_rng(seed, &doc_id);
                let plan = random_plan(&mut rng, e, gold.steps.len(), pat.spec.pieces().len())?;
                let mut doc = inject_errors(&gold, &plan, &pat.spec, &mut rng).ok()?.doc;
                doc.doc_id = doc_id;
                let reference = gold.steps.join("\n");
                let text = doc.steps.join("\n");
                Some(ErrorOutcome {
                    pattern_id: pat.id().to_string(),
                    errors: e,
                    n_steps: doc.steps.len(),
                    tree_f1: pat.score(&doc),
                    bleu: bleu(&text, &reference, &cfg),
                    rouge_l: rouge_l(&text, &reference, &cfg),
                    doc_id: doc.doc_id,
                })
            })
            .collect()
    })?;
    Ok(out.into_iter().flatten().collect())
}

/// Pearson r of tree score against errors per step.
pub fn error_correlation(outcomes: &[ErrorOutcome]) -> Option<Correlation> {
    let xs: Vec<f64> = outcomes.iter().map(|o| o.tree_f1).collect();
    let ys: Vec<f64> = outcomes.iter().map(ErrorOutcome::errors_per_step).collect();
    pearson(&xs, &ys).ok()
}
