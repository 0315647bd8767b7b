use alloc::collections::BTreeSet;
use core::fmt;

use crate::tree::{depth_one_subtrees, AssemblyNode, DepthOneSubtree, Forest};

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreBreakdown {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub best_gold_index: Option<usize>,
    pub matched: BTreeSet<DepthOneSubtree>,
}

/// Exact-match F1 between two depth-1 subtree sets.
///
/// Precision is 0 when `predicted` is empty and recall is 0 when `gold` is
/// empty; two empty sets are equal and score 1.
pub fn subtree_set_f1(
    predicted: &BTreeSet<DepthOneSubtree>,
    gold: &BTreeSet<DepthOneSubtree>,
) -> ScoreBreakdown {
    if predicted.is_empty() && gold.is_empty() {
        return ScoreBreakdown {
            precision: 1.0,
            recall: 1.0,
            f1: 1.0,
            best_gold_index: None,
            matched: BTreeSet::new(),
        };
    }
    let matched: BTreeSet<DepthOneSubtree> = predicted.intersection(gold).cloned().collect();
    let hits = matched.len() as f64;
    let precision = if predicted.is_empty() { 0.0 } else { hits / predicted.len() as f64 };
    let recall = if gold.is_empty() { 0.0 } else { hits / gold.len() as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    ScoreBreakdown {
        precision,
        recall,
        f1,
        best_gold_index: None,
        matched,
    }
}

pub fn subtree_f1(predicted: &Forest, gold: &AssemblyNode) -> ScoreBreakdown {
    subtree_set_f1(&depth_one_subtrees(predicted), &gold.subtrees())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmptyGoldSet;

impl fmt::Display for EmptyGoldSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("gold tree set is empty")
    }
}

/// Best F1 of `predicted` against any gold tree; ties go to the lowest index.
pub fn tree_score(predicted: &Forest, gold_set: &[AssemblyNode]) -> Result<ScoreBreakdown, EmptyGoldSet> {
    let pred = depth_one_subtrees(predicted);
    let mut best: Option<ScoreBreakdown> = None;
    for (i, g) in gold_set.iter().enumerate() {
        let mut s = subtree_set_f1(&pred, &g.subtrees());
        s.best_gold_index = Some(i);
        if best.as_ref().is_none_or(|b| s.f1 > b.f1) {
            best = Some(s);
        }
    }
    best.ok_or(EmptyGoldSet)
}

impl core::error::Error for EmptyGoldSet {}
