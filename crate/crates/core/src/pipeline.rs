//! Turns per-step piece extractions into the predicted assembly forest.
//!
//! Each step's mentions are first resolved to the components that currently
//! contain them; the resolved components then yield one depth-1 subtree
//! (binary join or unary self-attachment). Threading the state through the
//! steps produces the same forest as gluing the per-step subtrees by label.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::extract::{
    extract_pieces_rule_based, AttachmentPolicy, InstructionDoc, PatternSpec, StepExtraction,
};
use crate::piece::{NodeLabel, PieceLabel};
use crate::tree::{AssemblyNode, DepthOneSubtree, Forest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DiagnosticKind {
    UnknownLabel,
    /// More than two components in one step; they were folded left.
    ExtraComponents,
    /// A single component was mentioned without an attachment action.
    SoloMentionIgnored,
    MissingExtraction,
    ExtraExtraction,
    /// An extraction adapter failed and the rule-based result was used.
    ExtractorFallback,
}

impl DiagnosticKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DiagnosticKind::UnknownLabel => "unknown_label",
            DiagnosticKind::ExtraComponents => "extra_components",
            DiagnosticKind::SoloMentionIgnored => "solo_mention_ignored",
            DiagnosticKind::MissingExtraction => "missing_extraction",
            DiagnosticKind::ExtraExtraction => "extra_extraction",
            DiagnosticKind::ExtractorFallback => "extractor_fallback",
        }
    }
}

impl fmt::Display for DiagnosticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub step_index: usize,
    pub kind: DiagnosticKind,
    pub message: String,
}

/// Current intermediate components during a build.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AssemblyState {
    component_of: BTreeMap<PieceLabel, NodeLabel>,
    built: BTreeMap<NodeLabel, AssemblyNode>,
}

impl AssemblyState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Current component holding `piece`; the bare leaf if untouched.
    pub fn component_of(&self, piece: &PieceLabel) -> NodeLabel {
        self.component_of
            .get(piece)
            .cloned()
            .unwrap_or_else(|| NodeLabel::leaf(*piece))
    }

    fn node(&self, label: &NodeLabel) -> AssemblyNode {
        match self.built.get(label) {
            Some(n) => n.clone(),
            None => AssemblyNode::leaf(label.first_piece()),
        }
    }

    /// The current top-level components.
    pub fn components(&self) -> impl Iterator<Item = &AssemblyNode> {
        self.built.values()
    }

    fn install(&mut self, node: AssemblyNode, replaced: &[NodeLabel]) {
        for old in replaced {
            self.built.remove(old);
        }
        for p in node.label().pieces() {
            self.component_of.insert(*p, node.label().clone());
        }
        self.built.insert(node.label().clone(), node);
    }
}

/// Maps each mentioned piece to its current component, dropping repeats.
pub fn resolve_components(x: &StepExtraction, state: &AssemblyState) -> Vec<NodeLabel> {
    let mut out: Vec<NodeLabel> = Vec::new();
    for p in &x.mentions {
        let c = state.component_of(p);
        if !out.contains(&c) {
            out.push(c);
        }
    }
    out
}

/// Applies one step's resolved components to the state. Returns the
/// emitted subtrees (none, one, or a left-folded chain) in order.
pub fn apply_step(
    state: &mut AssemblyState,
    resolved: &[NodeLabel],
    step_index: usize,
    diagnostics: &mut Vec<Diagnostic>,
) -> Vec<DepthOneSubtree> {
    match resolved {
        [] => Vec::new(),
        [only] => {
            let child = state.node(only);
            let node = AssemblyNode::unary(child);
            let st = node.subtree().expect("unary node has a subtree");
            state.install(node, core::slice::from_ref(only));
            alloc::vec![st]
        }
        [first, rest @ ..] => {
            if rest.len() > 1 {
                let names: Vec<String> = resolved.iter().map(|l| format!("{l}")).collect();
                diagnostics.push(Diagnostic {
                    step_index,
                    kind: DiagnosticKind::ExtraComponents,
                    message: format!(
                        "{} components in one step ({}); joined left to right",
                        resolved.len(),
                        names.join(", ")
                    ),
                });
            }
            let mut acc = first.clone();
            let mut out = Vec::new();
            for next in rest {
                let a = state.node(&acc);
                let b = state.node(next);
                // Resolved components are distinct current components, so
                // their piece sets never overlap.
                let node = AssemblyNode::binary(a, b).expect("current components are disjoint");
                out.push(node.subtree().expect("binary node has a subtree"));
                let label = node.label().clone();
                state.install(node, &[acc.clone(), next.clone()]);
                acc = label;
            }
            out
        }
    }
}

/// Per-step record kept in a [`BuildReport`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepRecord {
    pub step_index: usize,
    /// Pieces the extractor found.
    pub mentions: Vec<PieceLabel>,
    /// Pieces that took part in an assembly operation (empty when the step
    /// was a finishing step).
    pub effective: Vec<PieceLabel>,
    pub resolved: Vec<NodeLabel>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuildReport {
    pub doc_id: String,
    pub forest: Forest,
    pub subtree_trace: Vec<(usize, DepthOneSubtree)>,
    pub steps: Vec<StepRecord>,
    pub diagnostics: Vec<Diagnostic>,
}

impl BuildReport {
    pub fn subtrees(&self) -> impl Iterator<Item = &DepthOneSubtree> {
        self.subtree_trace.iter().map(|(_, s)| s)
    }
}

/// Folds the steps of `doc` into a forest. `extractions` should hold one
/// entry per step; gaps and extras are diagnosed. Pieces never mentioned
/// become isolated leaves.
pub fn build_forest(
    doc: &InstructionDoc,
    extractions: &[StepExtraction],
    spec: &PatternSpec,
    policy: &AttachmentPolicy,
) -> BuildReport {
    let mut diagnostics = Vec::new();
    let mut by_step: BTreeMap<usize, &StepExtraction> = BTreeMap::new();
    for x in extractions {
        if x.step_index < doc.steps.len() && !by_step.contains_key(&x.step_index) {
            by_step.insert(x.step_index, x);
        } else {
            diagnostics.push(Diagnostic {
                step_index: x.step_index,
                kind: DiagnosticKind::ExtraExtraction,
                message: format!("extraction for step {} ignored", x.step_index),
            });
        }
    }

    let mut state = AssemblyState::new();
    let mut trace = Vec::new();
    let mut steps = Vec::new();
    for (i, text) in doc.steps.iter().enumerate() {
        let Some(x) = by_step.get(&i) else {
            diagnostics.push(Diagnostic {
                step_index: i,
                kind: DiagnosticKind::MissingExtraction,
                message: String::from("no extraction for this step"),
            });
            steps.push(StepRecord {
                step_index: i,
                mentions: Vec::new(),
                effective: Vec::new(),
                resolved: Vec::new(),
            });
            continue;
        };
        let mut mentions = Vec::new();
        for p in &x.mentions {
            if spec.contains(p) {
                if !mentions.contains(p) {
                    mentions.push(*p);
                }
            } else {
                diagnostics.push(Diagnostic {
                    step_index: i,
                    kind: DiagnosticKind::UnknownLabel,
                    message: format!("piece {p} is not in the pattern inventory"),
                });
            }
        }
        let x = StepExtraction {
            step_index: i,
            mentions,
        };
        let mut resolved = resolve_components(&x, &state);
        let mut effective = x.mentions.clone();
        if resolved.len() == 1 && !policy.is_self_attachment(text, &x.mentions) {
            diagnostics.push(Diagnostic {
                step_index: i,
                kind: DiagnosticKind::SoloMentionIgnored,
                message: format!("{} mentioned without an attachment action", resolved[0]),
            });
            resolved.clear();
            effective.clear();
        }
        for st in apply_step(&mut state, &resolved, i, &mut diagnostics) {
            trace.push((i, st));
        }
        steps.push(StepRecord {
            step_index: i,
            mentions: x.mentions,
            effective,
            resolved,
        });
    }

    let mut trees: Vec<AssemblyNode> = state.built.values().cloned().collect();
    for p in spec.inventory() {
        if !state.component_of.contains_key(&p) {
            trees.push(AssemblyNode::leaf(p));
        }
    }
    let forest = Forest::new(trees).expect("state-threaded construction yields unique labels");
    BuildReport {
        doc_id: doc.doc_id.clone(),
        forest,
        subtree_trace: trace,
        steps,
        diagnostics,
    }
}

/// Rule-based extraction of every step.
pub fn extract_document(
    doc: &InstructionDoc,
    spec: &PatternSpec,
) -> (Vec<StepExtraction>, Vec<Diagnostic>) {
    let mut xs = Vec::with_capacity(doc.steps.len());
    let mut diags = Vec::new();
    for (i, s) in doc.steps.iter().enumerate() {
        let (x, unknown) = extract_pieces_rule_based(i, s, spec);
        xs.push(x);
        diags.extend(unknown.into_iter().map(|u| Diagnostic {
            step_index: u.step_index,
            kind: DiagnosticKind::UnknownLabel,
            message: format!("({}) is not in the pattern inventory", u.text),
        }));
    }
    (xs, diags)
}

/// Extraction and build in one go.
pub fn build_rule_based(doc: &InstructionDoc, spec: &PatternSpec, policy: &AttachmentPolicy) -> BuildReport {
    let (xs, mut diags) = extract_document(doc, spec);
    let mut report = build_forest(doc, &xs, spec, policy);
    diags.append(&mut report.diagnostics);
    diags.sort_by_key(|d| d.step_index);
    report.diagnostics = diags;
    report
}

fn describe(label: &NodeLabel, spec: &PatternSpec) -> String {
    let p = label.first_piece();
    let name = spec.name(&p).unwrap_or("piece");
    if label.is_atomic() && label.self_attach() == 0 {
        format!("the {name} ({p})")
    } else {
        format!("the component containing the {name} ({p})")
    }
}

/// Writes one templated step per non-leaf node, bottom-up, such that
/// rule-based extraction and [`build_forest`] rebuild `tree` exactly.
pub fn linearize_gold_tree(tree: &AssemblyNode, spec: &PatternSpec) -> InstructionDoc {
    let mut steps = Vec::new();
    for node in tree.post_order() {
        match node.children() {
            [] => {}
            [only] => steps.push(format!("Sew {} to itself.", describe(only.label(), spec))),
            [a, b] => steps.push(format!(
                "Sew {} to {}.",
                describe(a.label(), spec),
                describe(b.label(), spec)
            )),
            _ => {}
        }
    }
    InstructionDoc {
        pattern_id: String::from(spec.pattern_id()),
        doc_id: format!("{}-linearized", spec.pattern_id()),
        steps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::depth_one_subtrees;
    use alloc::string::ToString;
    use alloc::vec;

    fn p(s: &str) -> PieceLabel {
        PieceLabel::parse(s).unwrap()
    }

    fn n(s: &str) -> NodeLabel {
        NodeLabel::parse(s).unwrap()
    }

    fn spec() -> PatternSpec {
        PatternSpec::new("skirt", [(p("A"), "Over Skirt"), (p("B"), "Under Skirt"), (p("C"), "Waistband")]).unwrap()
    }

    #[test]
    fn resolution() {
        let mut state = AssemblyState::new();
        let x = StepExtraction::new(0, [p("A"), p("B")]);
        assert_eq!(resolve_components(&x, &state), vec![n("A"), n("B")]);
        let mut d = Vec::new();
        apply_step(&mut state, &[n("A"), n("B")], 0, &mut d);
        assert_eq!(resolve_components(&x, &state), vec![n("AB")]);
        apply_step(&mut state, &[n("AB")], 1, &mut d);
        let x3 = StepExtraction::new(2, [p("C"), p("A"), p("B")]);
        assert_eq!(resolve_components(&x3, &state), vec![n("C"), n("AB_1")]);
        assert!(d.is_empty());
    }

    #[test]
    fn apply_step_shapes() {
        let mut state = AssemblyState::new();
        let mut d = Vec::new();
        let st = apply_step(&mut state, &[n("A"), n("B")], 0, &mut d);
        assert_eq!(st[0].to_string(), "AB -> A B");
        let st = apply_step(&mut state, &[n("AB")], 1, &mut d);
        assert_eq!(st[0].to_string(), "AB_1 -> AB");
        let before = state.clone();
        assert!(apply_step(&mut state, &[], 2, &mut d).is_empty());
        assert_eq!(state, before);
    }

    #[test]
    fn left_fold_for_many_components() {
        let mut state = AssemblyState::new();
        let mut d = Vec::new();
        let st = apply_step(&mut state, &[n("C"), n("A"), n("B")], 0, &mut d);
        let got: Vec<String> = st.iter().map(|s| s.to_string()).collect();
        assert_eq!(got, vec!["AC -> A C", "ABC -> AC B"]);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].kind, DiagnosticKind::ExtraComponents);
    }

    #[test]
    fn partial_document_leaves_isolated_piece() {
        let doc = InstructionDoc {
            pattern_id: "skirt".into(),
            doc_id: "d".into(),
            steps: vec!["Sew the Over Skirt (A) to the Under Skirt (B).".into()],
        };
        let r = build_rule_based(&doc, &spec(), &AttachmentPolicy::default());
        assert_eq!(r.forest.trees().len(), 2);
        assert_eq!(r.forest.isolated_leaves().collect::<Vec<_>>(), vec![p("C")]);
    }

    #[test]
    fn empty_mentions_give_leaves_only() {
        let doc = InstructionDoc {
            pattern_id: "skirt".into(),
            doc_id: "d".into(),
            steps: vec!["Press everything.".into(), "Admire.".into()],
        };
        let r = build_rule_based(&doc, &spec(), &AttachmentPolicy::default());
        assert_eq!(r.forest.trees().len(), 3);
        assert!(depth_one_subtrees(&r.forest).is_empty());
    }

    #[test]
    fn missing_and_extra_extractions() {
        let doc = InstructionDoc {
            pattern_id: "skirt".into(),
            doc_id: "d".into(),
            steps: vec!["Sew (A) to (B).".into(), "Sew (C) on.".into()],
        };
        let xs = vec![StepExtraction::new(0, [p("A"), p("B"), p("Q")]), StepExtraction::new(7, [p("C")])];
        let r = build_forest(&doc, &xs, &spec(), &AttachmentPolicy::default());
        let kinds: Vec<DiagnosticKind> = r.diagnostics.iter().map(|d| d.kind).collect();
        assert!(kinds.contains(&DiagnosticKind::ExtraExtraction));
        assert!(kinds.contains(&DiagnosticKind::MissingExtraction));
        assert!(kinds.contains(&DiagnosticKind::UnknownLabel));
        assert_eq!(r.subtree_trace.len(), 1);
    }

    #[test]
    fn linearize_leaf_is_empty() {
        let d = linearize_gold_tree(&AssemblyNode::leaf(p("A")), &spec());
        assert!(d.steps.is_empty());
    }

    #[test]
    fn linearize_round_trips() {
        let t: AssemblyNode = "(ABC_1 (AB_1 (AB A B)) C)".parse().unwrap();
        let doc = linearize_gold_tree(&t, &spec());
        assert_eq!(doc.steps.len(), 3);
        assert_eq!(doc.steps[0], "Sew the Over Skirt (A) to the Under Skirt (B).");
        assert_eq!(doc.steps[1], "Sew the component containing the Over Skirt (A) to itself.");
        let r = build_rule_based(&doc, &spec(), &AttachmentPolicy::default());
        assert_eq!(r.forest, Forest::single(t));
    }
}
