//! Seeded document perturbations: step permutation and error injection.
//!
//! All randomness comes from a ChaCha8 stream keyed by `(seed, doc_id)`, so
//! results do not depend on processing order or thread count.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::extract::{mention_spans, InstructionDoc, PatternSpec};
use crate::piece::PieceLabel;

pub type DocRng = ChaCha8Rng;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-document generator derived from the experiment seed and the doc id.
pub fn doc_rng(seed: u64, doc_id: &str) -> DocRng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ fnv1a(doc_id.as_bytes())))
}

/// Uniform index in `0..=max`, drawn through `u64` so the stream is the
/// same on every pointer width.
fn index_upto<R: Rng + ?Sized>(rng: &mut R, max: usize) -> usize {
    rng.gen_range(0..=max as u64) as usize
}

/// In-place Fisher-Yates shuffle: for i = n-1 down to 1, swap i with a
/// uniform j in 0..=i.
pub fn fisher_yates<T, R: Rng + ?Sized>(items: &mut [T], rng: &mut R) {
    for i in (1..items.len()).rev() {
        let j = index_upto(rng, i);
        items.swap(i, j);
    }
}

/// `k` independently shuffled copies of `doc`, ids suffixed `-perm{i}`.
pub fn permute_doc(doc: &InstructionDoc, seed: u64, k: usize) -> Vec<InstructionDoc> {
    let mut rng = doc_rng(seed, &doc.doc_id);
    (0..k)
        .map(|i| {
            let mut steps = doc.steps.clone();
            fisher_yates(&mut steps, &mut rng);
            InstructionDoc {
                pattern_id: doc.pattern_id.clone(),
                doc_id: format!("{}-perm{i}", doc.doc_id),
                steps,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ErrorPlan {
    pub swap_adjacent: usize,
    pub drop_step: usize,
    pub wrong_piece: usize,
}

impl ErrorPlan {
    pub fn total(&self) -> usize {
        self.swap_adjacent + self.drop_step + self.wrong_piece
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Edit {
    /// Steps `at` and `at + 1` exchanged.
    Swap { at: usize },
    /// Step removed (index in the document at the time of removal).
    Drop { at: usize, text: String },
    Relabel { step: usize, from: PieceLabel, to: PieceLabel },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Injected {
    pub doc: InstructionDoc,
    pub applied: usize,
    pub edits: Vec<Edit>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InjectError {
    TooFewStepsToSwap { steps: usize },
    TooManyDrops { requested: usize, steps: usize },
    TooFewMentions { requested: usize, available: usize },
    SinglePieceInventory,
}

impl fmt::Display for InjectError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InjectError::TooFewStepsToSwap { steps } => {
                write!(f, "cannot swap adjacent steps in a {steps}-step document")
            }
            InjectError::TooManyDrops { requested, steps } => write!(
                f,
                "cannot drop {requested} step(s) from a {steps}-step document (one must remain)"
            ),
            InjectError::TooFewMentions { requested, available } => write!(
                f,
                "cannot relabel {requested} mention(s); only {available} available"
            ),
            InjectError::SinglePieceInventory => {
                f.write_str("cannot substitute pieces in a one-piece pattern")
            }
        }
    }
}

/// Applies the plan in kind order: swaps, then drops, then relabels.
///
/// Each relabel targets a distinct parenthesised mention of an inventory
/// piece and replaces it with a different inventory piece.
pub fn inject_errors<R: Rng + ?Sized>(
    doc: &InstructionDoc,
    plan: &ErrorPlan,
    spec: &PatternSpec,
    rng: &mut R,
) -> Result<Injected, InjectError> {
    let n = doc.steps.len();
    if plan.swap_adjacent > 0 && n < 2 {
        return Err(InjectError::TooFewStepsToSwap { steps: n });
    }
    if plan.drop_step > 0 && plan.drop_step >= n {
        return Err(InjectError::TooManyDrops {
            requested: plan.drop_step,
            steps: n,
        });
    }
    let inventory: Vec<PieceLabel> = spec.inventory().collect();
    if plan.wrong_piece > 0 && inventory.len() < 2 {
        return Err(InjectError::SinglePieceInventory);
    }

    let mut steps = doc.steps.clone();
    let mut edits = Vec::with_capacity(plan.total());
    for _ in 0..plan.swap_adjacent {
        let at = index_upto(rng, steps.len() - 2);
        steps.swap(at, at + 1);
        edits.push(Edit::Swap { at });
    }
    for _ in 0..plan.drop_step {
        let at = index_upto(rng, steps.len() - 1);
        let text = steps.remove(at);
        edits.push(Edit::Drop { at, text });
    }
    if plan.wrong_piece > 0 {
        let mut slots: Vec<(usize, usize)> = Vec::new();
        for (si, s) in steps.iter().enumerate() {
            for (mi, span) in mention_spans(s).iter().enumerate() {
                if spec.contains(&span.piece) {
                    slots.push((si, mi));
                }
            }
        }
        if slots.len() < plan.wrong_piece {
            return Err(InjectError::TooFewMentions {
                requested: plan.wrong_piece,
                available: slots.len(),
            });
        }
        for _ in 0..plan.wrong_piece {
            let (si, mi) = slots.swap_remove(index_upto(rng, slots.len() - 1));
            // Spans are recomputed since earlier relabels may shift offsets.
            let span = mention_spans(&steps[si])[mi];
            let choices: Vec<PieceLabel> = inventory.iter().copied().filter(|p| *p != span.piece).collect();
            let to = choices[index_upto(rng, choices.len() - 1)];
            let mut s = String::with_capacity(steps[si].len() + 4);
            s.push_str(&steps[si][..span.start]);
            s.push_str(&format!("({to})"));
            s.push_str(&steps[si][span.end..]);
            steps[si] = s;
            edits.push(Edit::Relabel {
                step: si,
                from: span.piece,
                to,
            });
        }
    }
    Ok(Injected {
        doc: InstructionDoc {
            pattern_id: doc.pattern_id.clone(),
            doc_id: doc.doc_id.clone(),
            steps,
        },
        applied: edits.len(),
        edits,
    })
}

impl core::error::Error for InjectError {}
