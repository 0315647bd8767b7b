//! Random patterns, assembly trees, and gold grammars for experiments and
//! property tests.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use crate::extract::PatternSpec;
use crate::grammar::{GoldGrammar, GrammarRule};
use crate::piece::{PieceLabel, Variant};
use crate::tree::AssemblyNode;

const NAMES: [&str; 26] = [
    "Front", "Back", "Sleeve", "Collar", "Cuff", "Pocket", "Waistband", "Yoke", "Facing",
    "Placket", "Hood", "Lining", "Bodice", "Skirt Panel", "Strap", "Belt Loop", "Gusset",
    "Godet", "Ruffle", "Tie", "Binding", "Flap", "Insert", "Band", "Peplum", "Hem Band",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub pieces: usize,
    /// Number of random trees whose rules are merged into one grammar.
    pub trees: usize,
    /// Chance, per assembly step, of a self-attachment instead of a join.
    pub self_attach_prob: f64,
    pub max_self_attach: u32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            pieces: 5,
            trees: 2,
            self_attach_prob: 0.25,
            max_self_attach: 2,
        }
    }
}

/// `n` distinct pieces; some letters become mirrored pairs or numbered copies.
pub fn random_inventory<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<PieceLabel> {
    let n = n.max(1);
    let mut out: BTreeSet<PieceLabel> = BTreeSet::new();
    let mut letters: Vec<u8> = (b'A'..=b'Z').collect();
    while out.len() < n && !letters.is_empty() {
        let idx = rng.gen_range(0..letters.len() as u64) as usize;
        let base = letters.swap_remove(idx) as char;
        let room = n - out.len();
        let roll: f64 = rng.gen();
        let mut add = |v| {
            out.insert(PieceLabel::new(base, v).expect("uppercase base"));
        };
        if room >= 2 && roll < 0.3 {
            add(Variant::Left);
            add(Variant::Right);
        } else if room >= 2 && roll < 0.4 {
            add(Variant::Copy(1));
            add(Variant::Copy(2));
        } else {
            add(Variant::Plain);
        }
    }
    out.into_iter().collect()
}

/// A uniformly shaped random assembly of `inventory`.
pub fn random_tree<R: Rng + ?Sized>(rng: &mut R, inventory: &[PieceLabel], cfg: &SynthConfig) -> AssemblyNode {
    let mut parts: Vec<AssemblyNode> = inventory.iter().map(|p| AssemblyNode::leaf(*p)).collect();
    loop {
        let can_bump: Vec<usize> = (0..parts.len())
            .filter(|&i| parts[i].label().self_attach() < cfg.max_self_attach)
            .collect();
        let bump = !can_bump.is_empty() && rng.gen_bool(cfg.self_attach_prob.clamp(0.0, 1.0));
        if parts.len() == 1 && !bump {
            break;
        }
        if bump {
            let i = can_bump[rng.gen_range(0..can_bump.len() as u64) as usize];
            let node = parts.swap_remove(i);
            parts.push(AssemblyNode::unary(node));
            if parts.len() == 1 {
                break;
            }
            continue;
        }
        let i = rng.gen_range(0..parts.len() as u64) as usize;
        let a = parts.swap_remove(i);
        let j = rng.gen_range(0..parts.len() as u64) as usize;
        let b = parts.swap_remove(j);
        parts.push(AssemblyNode::binary(a, b).expect("components are disjoint"));
    }
    parts.pop().expect("inventory is non-empty")
}

/// Grammar whose rules are exactly the depth-1 subtrees of `trees`.
pub fn grammar_from_trees(pattern_id: &str, inventory: &[PieceLabel], trees: &[AssemblyNode]) -> GoldGrammar {
    let mut rules = Vec::new();
    let mut roots = Vec::new();
    for t in trees {
        roots.push(t.label().clone());
        for st in t.subtrees() {
            rules.push(GrammarRule::new(st.parent().clone(), st.children().to_vec()));
        }
    }
    rules.sort();
    roots.sort();
    GoldGrammar::new(pattern_id, inventory.iter().copied(), roots, rules)
}

pub fn random_grammar<R: Rng + ?Sized>(rng: &mut R, pattern_id: &str, cfg: &SynthConfig) -> GoldGrammar {
    let inventory = random_inventory(rng, cfg.pieces);
    let trees: Vec<AssemblyNode> = (0..cfg.trees.max(1)).map(|_| random_tree(rng, &inventory, cfg)).collect();
    grammar_from_trees(pattern_id, &inventory, &trees)
}

/// Human-readable piece names for a synthetic inventory.
pub fn synthetic_spec(pattern_id: &str, inventory: impl IntoIterator<Item = PieceLabel>) -> PatternSpec {
    let named: Vec<(PieceLabel, String)> = inventory
        .into_iter()
        .map(|p| {
            let base = NAMES[(p.base() as u8 - b'A') as usize];
            let name = match p.variant() {
                Variant::Plain => String::from(base),
                Variant::Left => format!("Left {base}"),
                Variant::Right => format!("Right {base}"),
                Variant::Copy(k) => format!("{base} {k}"),
            };
            (p, name)
        })
        .collect();
    PatternSpec::new(pattern_id, named).expect("inventory is non-empty and unique")
}
