use proptest::prelude::*;
use sewtree_core::extract::AttachmentPolicy;
use sewtree_core::grammar::{enumerate_gold_trees, GoldGrammar, DEFAULT_CAP};
use sewtree_core::metrics::{ngram_precision, pearson, tokenize};
use sewtree_core::perturb::{doc_rng, fisher_yates};
use sewtree_core::piece::{merge_labels, NodeLabel, PieceLabel, Variant};
use sewtree_core::pipeline::{build_rule_based, linearize_gold_tree};
use sewtree_core::synth::{random_inventory, random_tree, synthetic_spec, SynthConfig};
use sewtree_core::tree::{parse_serialized, validate_tree, Forest};

fn piece() -> impl Strategy<Value = PieceLabel> {
    let variant = prop_oneof![
        Just(Variant::Plain),
        Just(Variant::Left),
        Just(Variant::Right),
        (1u32..30).prop_map(Variant::Copy),
    ];
    (0u8..26, variant).prop_map(|(b, v)| PieceLabel::new((b'A' + b) as char, v).unwrap())
}

fn node_label() -> impl Strategy<Value = NodeLabel> {
    (prop::collection::btree_set(piece(), 1..6), 0u32..4)
        .prop_map(|(ps, n)| NodeLabel::new(ps.into_iter().collect(), n).unwrap())
}

fn tree_seed() -> impl Strategy<Value = (u64, usize)> {
    (any::<u64>(), 1usize..8)
}

proptest! {
    #[test]
    fn label_text_round_trips(l in node_label()) {
        prop_assert_eq!(NodeLabel::parse(&l.to_string()).unwrap(), l);
    }

    #[test]
    fn piece_text_round_trips(p in piece()) {
        prop_assert_eq!(PieceLabel::parse(&p.to_string()).unwrap(), p);
    }

    #[test]
    fn piece_order_is_base_then_variant(a in piece(), b in piece()) {
        let rank = |p: &PieceLabel| match p.variant() {
            Variant::Plain => (0, 0),
            Variant::Left => (1, 0),
            Variant::Right => (2, 0),
            Variant::Copy(k) => (3, k),
        };
        prop_assert_eq!(a.cmp(&b), (a.base(), rank(&a)).cmp(&(b.base(), rank(&b))));
    }

    #[test]
    fn merge_is_commutative(a in node_label(), b in node_label()) {
        let ab = merge_labels(&a, &b);
        prop_assert_eq!(&ab, &merge_labels(&b, &a));
        if let Ok(m) = ab {
            prop_assert_eq!(m.self_attach(), a.self_attach().max(b.self_attach()));
            prop_assert_eq!(m.pieces().len(), a.pieces().len() + b.pieces().len());
        } else {
            prop_assert!(!a.is_disjoint(&b));
        }
    }

    #[test]
    fn random_trees_survive_serialization((seed, n) in tree_seed()) {
        let mut rng = doc_rng(seed, "prop");
        let inv = random_inventory(&mut rng, n);
        let t = random_tree(&mut rng, &inv, &SynthConfig::default());
        prop_assert!(validate_tree(&t).is_empty());
        prop_assert_eq!(parse_serialized(&t.serialize()).unwrap(), t.clone());
        // The depth-1 subtree set determines the tree.
        let glued = Forest::glue(t.subtrees(), &inv).unwrap();
        prop_assert_eq!(glued.trees(), std::slice::from_ref(&t));
    }

    #[test]
    fn state_threaded_build_equals_glue((seed, n) in tree_seed()) {
        let mut rng = doc_rng(seed, "glue");
        let inv = random_inventory(&mut rng, n);
        let t = random_tree(&mut rng, &inv, &SynthConfig::default());
        let spec = synthetic_spec("p", inv.iter().copied());
        let report = build_rule_based(&linearize_gold_tree(&t, &spec), &spec, &AttachmentPolicy::default());
        let glued = Forest::glue(report.subtrees().cloned(), &inv).unwrap();
        prop_assert_eq!(&glued, &report.forest);
        prop_assert_eq!(report.forest.trees(), std::slice::from_ref(&t));
    }

    #[test]
    fn enumeration_ignores_rule_order(seed in any::<u64>(), n in 1usize..6) {
        let mut rng = doc_rng(seed, "order");
        let inv = random_inventory(&mut rng, n);
        let trees: Vec<_> = (0..3).map(|_| random_tree(&mut rng, &inv, &SynthConfig::default())).collect();
        let g = sewtree_core::synth::grammar_from_trees("p", &inv, &trees);
        let mut rules = g.rules().to_vec();
        fisher_yates(&mut rules, &mut rng);
        let mut roots = g.roots().to_vec();
        roots.reverse();
        let h = GoldGrammar::new("p", inv.iter().copied(), roots, rules);
        let a = enumerate_gold_trees(&g, DEFAULT_CAP).unwrap();
        prop_assert_eq!(&a, &enumerate_gold_trees(&h, DEFAULT_CAP).unwrap());
        for t in &trees {
            prop_assert!(a.contains(t));
        }
    }

    #[test]
    fn pearson_is_affine_invariant(
        xs in prop::collection::vec(-100.0f64..100.0, 3..30),
        scale in 0.1f64..10.0,
        shift in -50.0f64..50.0,
        seed in any::<u64>(),
    ) {
        let mut ys = xs.clone();
        fisher_yates(&mut ys, &mut doc_rng(seed, "ys"));
        let (Ok(a), Ok(b)) = (
            pearson(&xs, &ys),
            pearson(&xs.iter().map(|x| scale * x + shift).collect::<Vec<_>>(), &ys),
        ) else {
            return Ok(());
        };
        prop_assert!((a.r - b.r).abs() < 1e-9);
        let neg = pearson(&xs.iter().map(|x| -x).collect::<Vec<_>>(), &ys).unwrap();
        prop_assert!((a.r + neg.r).abs() < 1e-9);
        prop_assert!(a.r.abs() <= 1.0 + 1e-12);
    }

    #[test]
    fn unigram_precision_ignores_order(words in prop::collection::vec("[a-e]{1,3}", 1..20), seed in any::<u64>()) {
        let text = words.join(" ");
        let mut shuffled = words.clone();
        fisher_yates(&mut shuffled, &mut doc_rng(seed, "bleu"));
        let reference = tokenize(&text);
        let (m, t) = ngram_precision(&tokenize(&shuffled.join(" ")), &reference, 1);
        prop_assert_eq!((m, t), (reference.len(), reference.len()));
    }
}
