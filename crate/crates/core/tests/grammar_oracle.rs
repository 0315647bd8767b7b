//! Gold enumeration checked against brute force: every assembly tree of the
//! inventory (up to a self-attach bound) is generated independently and
//! kept if all its depth-1 subtrees are grammar rules. Partial trees that
//! already use a non-rule are dropped early; validity is closed under
//! taking subtrees, so this loses nothing.

use std::collections::BTreeSet;

use sewtree_core::grammar::{count_derivations, enumerate_gold_trees, parse_grammar, GoldGrammar, DEFAULT_CAP};
use sewtree_core::perturb::doc_rng;
use sewtree_core::piece::PieceLabel;
use sewtree_core::synth::{random_grammar, SynthConfig};
use sewtree_core::tree::AssemblyNode;

type Rules = BTreeSet<(String, Vec<String>)>;

fn uses_rules(t: &AssemblyNode, rules: &Rules) -> bool {
    t.subtree().is_none_or(|st| {
        rules.contains(&(st.parent().to_string(), st.children().iter().map(|c| c.to_string()).collect()))
    })
}

/// Every rule-conforming tree over exactly `pieces`, with node counters at
/// most `bound`.
fn all_trees(pieces: &[PieceLabel], bound: u32, rules: &Rules) -> Vec<AssemblyNode> {
    let mut bases = Vec::new();
    if pieces.len() == 1 {
        bases.push(AssemblyNode::leaf(pieces[0]));
    } else {
        // Unordered splits: the first piece always goes left.
        let rest = &pieces[1..];
        for mask in 0..(1u32 << rest.len()) {
            if mask == (1 << rest.len()) - 1 {
                continue;
            }
            let mut left = vec![pieces[0]];
            let mut right = Vec::new();
            for (i, p) in rest.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    left.push(*p);
                } else {
                    right.push(*p);
                }
            }
            let rights = all_trees(&right, bound, rules);
            for a in all_trees(&left, bound, rules) {
                for b in &rights {
                    let t = AssemblyNode::binary(a.clone(), b.clone()).unwrap();
                    if uses_rules(&t, rules) {
                        bases.push(t);
                    }
                }
            }
        }
    }
    let mut out = Vec::new();
    for mut t in bases {
        loop {
            let c = t.label().self_attach();
            out.push(t.clone());
            if c >= bound {
                break;
            }
            t = AssemblyNode::unary(t);
            if !uses_rules(&t, rules) {
                break;
            }
        }
    }
    out
}

fn brute_force(g: &GoldGrammar) -> Vec<String> {
    let inventory: Vec<PieceLabel> = g.inventory().iter().copied().collect();
    let rules: Rules = g
        .rules()
        .iter()
        .map(|r| (r.parent().to_string(), r.children().iter().map(|c| c.to_string()).collect()))
        .collect();
    let roots: BTreeSet<String> = g.roots().iter().map(|r| r.to_string()).collect();
    let bound = g
        .rules()
        .iter()
        .map(|r| r.parent().self_attach())
        .max()
        .unwrap_or(0);
    let mut out: Vec<String> = all_trees(&inventory, bound, &rules)
        .into_iter()
        .filter(|t| roots.contains(&t.label().to_string()))
        .filter(|t| {
            t.subtrees().iter().all(|st| {
                let key = (st.parent().to_string(), st.children().iter().map(|c| c.to_string()).collect());
                rules.contains(&key)
            })
        })
        .map(|t| t.serialize())
        .collect();
    out.sort();
    out.dedup();
    out
}

fn check(g: &GoldGrammar) {
    let expected = brute_force(g);
    let got: Vec<String> = enumerate_gold_trees(g, DEFAULT_CAP)
        .unwrap()
        .iter()
        .map(|t| t.serialize())
        .collect();
    assert_eq!(got, expected, "{}", g.to_text());
    let counts = count_derivations(g);
    let total: u128 = g.roots().iter().map(|r| counts[r]).sum();
    assert_eq!(total, expected.len() as u128);
}

#[test]
fn random_small_grammars_match_brute_force() {
    let mut rng = doc_rng(11, "oracle");
    for i in 0..300 {
        let cfg = SynthConfig {
            pieces: 1 + i % 4,
            trees: 1 + i % 4,
            ..SynthConfig::default()
        };
        check(&random_grammar(&mut rng, &format!("g{i}"), &cfg));
    }
}

#[test]
fn fixture_grammars_match_brute_force() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/grammars");
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let g = parse_grammar(&std::fs::read_to_string(&path).unwrap()).unwrap();
        check(&g);
    }
}

#[test]
fn ambiguous_grammar_counts_all_trees() {
    // Every binary tree over three pieces: three shapes.
    let g = parse_grammar(
        "pattern: t\npieces: A B C\nroots: ABC\n\
         AB -> A B\nAC -> A C\nBC -> B C\n\
         ABC -> AB C\nABC -> AC B\nABC -> BC A\n",
    )
    .unwrap();
    check(&g);
    assert_eq!(enumerate_gold_trees(&g, DEFAULT_CAP).unwrap().len(), 3);
}
