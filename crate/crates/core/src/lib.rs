//! Tree-based evaluation of step-by-step assembly instructions.
//!
//! Instructions are turned into a forest of unary/binary assembly trees and
//! compared, by exact-match F1 over depth-1 subtrees, against the gold trees
//! a per-pattern grammar generates. BLEU, ROUGE-L, and Pearson correlation
//! are included as baselines and analysis tools, along with seeded
//! perturbations for robustness experiments.
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]

extern crate alloc;

pub mod extract;
pub mod grammar;
pub mod metrics;
pub mod perturb;
pub mod piece;
pub mod pipeline;
pub mod ratings;
pub mod synth;
pub mod tree;

pub use extract::{AttachmentPolicy, InstructionDoc, PatternSpec, StepExtraction};
pub use grammar::{
    count_derivations, enumerate_gold_trees, parse_grammar, validate_grammar, GoldGrammar, GrammarRule,
};
pub use metrics::{tree_score, ScoreBreakdown};
pub use piece::{NodeLabel, PieceLabel, Variant};
pub use pipeline::{build_forest, build_rule_based, linearize_gold_tree, BuildReport};
pub use tree::{AssemblyNode, AssemblyTree, DepthOneSubtree, Forest};
