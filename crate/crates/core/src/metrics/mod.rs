//! Tree score plus baseline text metrics and correlation statistics.

mod stats;
mod text;
mod tree_score;

pub use stats::{pearson, Correlation, StatsError};
pub use text::{bleu, ngram_precision, rouge_l, tokenize, MetricConfig, BLEU_EPSILON};
pub use tree_score::{subtree_f1, subtree_set_f1, tree_score, EmptyGoldSet, ScoreBreakdown};
