//! Gold grammars: per-pattern rule sets whose derivations are the valid
//! assembly trees for that pattern.
//!
//! File format (UTF-8, line based):
//!
//! ```text
//! # skirt, one assembly order
//! pattern: skirt
//! pieces: A B C
//! roots: S_1
//! ABC_1 -> AB_1 C
//! AB_1 -> AB
//! AB -> A B
//! ```
//!
//! `S_n` in roots and rules stands for the label holding every piece of
//! the inventory with counter `n`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::piece::{LabelError, NodeLabel, PieceLabel};
use crate::tree::{check_local, AssemblyNode, Rule};

pub const DEFAULT_CAP: u128 = 100_000;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GrammarRule {
    parent: NodeLabel,
    children: Vec<NodeLabel>,
}

impl GrammarRule {
    /// Children are sorted into canonical order. Arity is not checked here.
    pub fn new(parent: NodeLabel, mut children: Vec<NodeLabel>) -> Self {
        children.sort();
        GrammarRule { parent, children }
    }

    pub fn parent(&self) -> &NodeLabel {
        &self.parent
    }

    pub fn children(&self) -> &[NodeLabel] {
        &self.children
    }
}

impl fmt::Display for GrammarRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ->", self.parent)?;
        for c in &self.children {
            write!(f, " {c}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldGrammar {
    pattern_id: String,
    inventory: BTreeSet<PieceLabel>,
    roots: Vec<NodeLabel>,
    rules: Vec<GrammarRule>,
}

impl GoldGrammar {
    /// Assembles a grammar without validating it. Duplicate rules and roots
    /// are dropped, keeping first occurrences.
    pub fn new(
        pattern_id: impl Into<String>,
        inventory: impl IntoIterator<Item = PieceLabel>,
        roots: Vec<NodeLabel>,
        rules: Vec<GrammarRule>,
    ) -> Self {
        let mut seen = BTreeSet::new();
        let rules = rules.into_iter().filter(|r| seen.insert(r.clone())).collect();
        let mut seen_roots = BTreeSet::new();
        let roots = roots.into_iter().filter(|r| seen_roots.insert(r.clone())).collect();
        GoldGrammar {
            pattern_id: pattern_id.into(),
            inventory: inventory.into_iter().collect(),
            roots,
            rules,
        }
    }

    pub fn pattern_id(&self) -> &str {
        &self.pattern_id
    }

    pub fn inventory(&self) -> &BTreeSet<PieceLabel> {
        &self.inventory
    }

    pub fn roots(&self) -> &[NodeLabel] {
        &self.roots
    }

    pub fn rules(&self) -> &[GrammarRule] {
        &self.rules
    }

    /// The label covering the whole inventory with counter `n`.
    pub fn full_label(&self, n: u32) -> Option<NodeLabel> {
        NodeLabel::new(self.inventory.iter().copied().collect(), n).ok()
    }

    fn expansions(&self) -> BTreeMap<&NodeLabel, Vec<&GrammarRule>> {
        let mut map: BTreeMap<&NodeLabel, Vec<&GrammarRule>> = BTreeMap::new();
        for r in &self.rules {
            map.entry(&r.parent).or_default().push(r);
        }
        map
    }

    /// Renders the grammar in file format; `parse_grammar` reads it back.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str("pattern: ");
        s.push_str(&self.pattern_id);
        s.push_str("\npieces:");
        for p in &self.inventory {
            s.push(' ');
            s.push_str(&p.to_string());
        }
        s.push_str("\nroots:");
        for r in &self.roots {
            s.push(' ');
            s.push_str(&r.to_string());
        }
        s.push('\n');
        for r in &self.rules {
            s.push_str(&r.to_string());
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GrammarViolation {
    Rule { rule: GrammarRule, problem: Rule },
    UnknownPiece { label: NodeLabel, piece: PieceLabel },
    /// A label with no rule that is not an inventory leaf.
    DeadEnd(NodeLabel),
    RootCoverage(NodeLabel),
    /// A root from which no complete tree can be derived.
    Unproductive(NodeLabel),
    NoRoots,
    EmptyInventory,
}

impl fmt::Display for GrammarViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GrammarViolation::Rule { rule, problem } => write!(f, "rule `{rule}`: {problem}"),
            GrammarViolation::UnknownPiece { label, piece } => {
                write!(f, "{label} uses piece {piece}, which is not in the inventory")
            }
            GrammarViolation::DeadEnd(l) => {
                write!(f, "{l} has no rule and is not a single inventory piece")
            }
            GrammarViolation::RootCoverage(l) => write!(f, "root {l} does not cover the full inventory"),
            GrammarViolation::Unproductive(l) => write!(f, "root {l} derives no complete tree"),
            GrammarViolation::NoRoots => f.write_str("grammar declares no roots"),
            GrammarViolation::EmptyInventory => f.write_str("grammar declares no pieces"),
        }
    }
}

pub fn validate_grammar(g: &GoldGrammar) -> Vec<GrammarViolation> {
    let mut out = Vec::new();
    if g.inventory.is_empty() {
        out.push(GrammarViolation::EmptyInventory);
    }
    if g.roots.is_empty() {
        out.push(GrammarViolation::NoRoots);
    }

    let mut labels: BTreeSet<&NodeLabel> = BTreeSet::new();
    for r in &g.rules {
        for problem in check_local(&r.parent, &r.children) {
            out.push(GrammarViolation::Rule {
                rule: r.clone(),
                problem,
            });
        }
        labels.insert(&r.parent);
        labels.extend(r.children.iter());
    }
    labels.extend(g.roots.iter());

    for l in &labels {
        if let Some(&piece) = l.pieces().iter().find(|p| !g.inventory.contains(p)) {
            out.push(GrammarViolation::UnknownPiece {
                label: (*l).clone(),
                piece,
            });
        }
    }

    let expansions = g.expansions();
    for l in &labels {
        if !expansions.contains_key(*l) && !(l.is_atomic() && l.self_attach() == 0) {
            out.push(GrammarViolation::DeadEnd((*l).clone()));
        }
    }

    let counts = count_labels(g);
    for root in &g.roots {
        if root.pieces().len() != g.inventory.len()
            || !root.pieces().iter().all(|p| g.inventory.contains(p))
        {
            out.push(GrammarViolation::RootCoverage(root.clone()));
        }
        if counts.get(root).copied().unwrap_or(0) == 0 {
            out.push(GrammarViolation::Unproductive(root.clone()));
        }
    }
    out
}

/// Derivation counts for every label reachable from a root.
fn count_labels(g: &GoldGrammar) -> BTreeMap<NodeLabel, u128> {
    let expansions = g.expansions();
    let mut memo: BTreeMap<NodeLabel, u128> = BTreeMap::new();
    let mut in_progress: BTreeSet<NodeLabel> = BTreeSet::new();

    fn count(
        label: &NodeLabel,
        g: &GoldGrammar,
        expansions: &BTreeMap<&NodeLabel, Vec<&GrammarRule>>,
        memo: &mut BTreeMap<NodeLabel, u128>,
        in_progress: &mut BTreeSet<NodeLabel>,
    ) -> u128 {
        if let Some(&c) = memo.get(label) {
            return c;
        }
        let c = match expansions.get(label) {
            None => {
                let terminal = label.is_atomic()
                    && label.self_attach() == 0
                    && g.inventory.contains(&label.first_piece());
                u128::from(terminal)
            }
            Some(rules) => {
                // Cycles only appear in malformed grammars; they derive nothing.
                if !in_progress.insert(label.clone()) {
                    return 0;
                }
                let mut total: u128 = 0;
                for r in rules {
                    let mut prod: u128 = 1;
                    for c in &r.children {
                        prod = prod.saturating_mul(count(c, g, expansions, memo, in_progress));
                        if prod == 0 {
                            break;
                        }
                    }
                    total = total.saturating_add(prod);
                }
                in_progress.remove(label);
                total
            }
        };
        memo.insert(label.clone(), c);
        c
    }

    for root in &g.roots {
        count(root, g, &expansions, &mut memo, &mut in_progress);
    }
    memo
}

/// Number of derivation trees per root, without enumerating them.
/// Saturates at `u128::MAX`.
pub fn count_derivations(g: &GoldGrammar) -> BTreeMap<NodeLabel, u128> {
    let all = count_labels(g);
    g.roots
        .iter()
        .map(|r| (r.clone(), all.get(r).copied().unwrap_or(0)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EnumerationError {
    CapExceeded { count: u128, cap: u128 },
    Invalid(Vec<GrammarViolation>),
}

impl fmt::Display for EnumerationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnumerationError::CapExceeded { count, cap } => {
                write!(f, "grammar derives {count} trees, more than the cap of {cap}")
            }
            EnumerationError::Invalid(vs) => {
                write!(f, "grammar is invalid ({} violation(s))", vs.len())?;
                if let Some(v) = vs.first() {
                    write!(f, ": {v}")?;
                }
                Ok(())
            }
        }
    }
}

/// Every distinct gold tree derivable from any root, sorted by bracket
/// serialization.
pub fn enumerate_gold_trees(g: &GoldGrammar, cap: u128) -> Result<Vec<AssemblyNode>, EnumerationError> {
    let violations = validate_grammar(g);
    if !violations.is_empty() {
        return Err(EnumerationError::Invalid(violations));
    }
    let total = count_derivations(g)
        .values()
        .fold(0u128, |acc, c| acc.saturating_add(*c));
    if total > cap {
        return Err(EnumerationError::CapExceeded { count: total, cap });
    }

    let expansions = g.expansions();
    let mut memo: BTreeMap<NodeLabel, Vec<AssemblyNode>> = BTreeMap::new();

    fn expand(
        label: &NodeLabel,
        expansions: &BTreeMap<&NodeLabel, Vec<&GrammarRule>>,
        memo: &mut BTreeMap<NodeLabel, Vec<AssemblyNode>>,
    ) -> Vec<AssemblyNode> {
        if let Some(v) = memo.get(label) {
            return v.clone();
        }
        let out = match expansions.get(label) {
            None => alloc::vec![AssemblyNode::from_parts(label.clone(), Vec::new())],
            Some(rules) => {
                let mut out = Vec::new();
                for r in rules {
                    let options: Vec<Vec<AssemblyNode>> =
                        r.children.iter().map(|c| expand(c, expansions, memo)).collect();
                    match options.as_slice() {
                        [only] => {
                            for c in only {
                                out.push(AssemblyNode::from_parts(label.clone(), alloc::vec![c.clone()]));
                            }
                        }
                        [left, right] => {
                            for a in left {
                                for b in right {
                                    out.push(AssemblyNode::from_parts(
                                        label.clone(),
                                        alloc::vec![a.clone(), b.clone()],
                                    ));
                                }
                            }
                        }
                        _ => {}
                    }
                }
                out
            }
        };
        memo.insert(label.clone(), out.clone());
        out
    }

    let mut by_text: BTreeMap<String, AssemblyNode> = BTreeMap::new();
    for root in &g.roots {
        for t in expand(root, &expansions, &mut memo) {
            by_text.entry(t.serialize()).or_insert(t);
        }
    }
    Ok(by_text.into_values().collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GrammarErrorKind {
    Syntax(String),
    Label { text: String, error: LabelError },
    MissingHeader(&'static str),
    ConflictingHeader(&'static str),
    UnknownPiece(PieceLabel),
    Arity(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GrammarError {
    /// `line` is 1-based; 0 for whole-file problems.
    Parse { line: usize, kind: GrammarErrorKind },
    Invalid(Vec<GrammarViolation>),
}

impl fmt::Display for GrammarError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GrammarError::Parse { line, kind } => {
                if *line > 0 {
                    write!(f, "line {line}: ")?;
                }
                match kind {
                    GrammarErrorKind::Syntax(m) => f.write_str(m),
                    GrammarErrorKind::Label { text, error } => write!(f, "bad label {text:?}: {error}"),
                    GrammarErrorKind::MissingHeader(h) => write!(f, "missing `{h}:` header"),
                    GrammarErrorKind::ConflictingHeader(h) => write!(f, "conflicting `{h}:` headers"),
                    GrammarErrorKind::UnknownPiece(p) => write!(f, "piece {p} is not in the inventory"),
                    GrammarErrorKind::Arity(n) => write!(f, "rule has {n} children (1 or 2 allowed)"),
                }
            }
            GrammarError::Invalid(vs) => {
                f.write_str("grammar is invalid:")?;
                for v in vs {
                    write!(f, "\n  {v}")?;
                }
                Ok(())
            }
        }
    }
}

enum LabelToken {
    Label(NodeLabel),
    /// `S` / `S_n` shorthand for the full-inventory label.
    Full(u32),
}

fn parse_label_token(text: &str, allow_alias: bool) -> Result<LabelToken, LabelError> {
    if allow_alias {
        let counter = match text.strip_prefix('S') {
            Some("") => Some(0),
            Some(rest) => rest.strip_prefix('_').and_then(|d| {
                (!d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
                    .then(|| d.parse::<u32>().ok())
                    .flatten()
            }),
            None => None,
        };
        if let Some(n) = counter {
            return Ok(LabelToken::Full(n));
        }
    }
    NodeLabel::parse(text).map(LabelToken::Label)
}

struct Pending {
    line: usize,
    parent: LabelToken,
    parent_text: String,
    children: Vec<(String, LabelToken)>,
}

pub fn parse_grammar(text: &str) -> Result<GoldGrammar, GrammarError> {
    let err = |line: usize, kind| GrammarError::Parse { line, kind };
    let mut pattern: Option<String> = None;
    let mut pieces: Option<(usize, Vec<PieceLabel>)> = None;
    let mut roots_raw: Option<(usize, Vec<String>)> = None;
    let mut pending: Vec<Pending> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some((lhs, rhs)) = line.split_once("->") {
            let lhs = lhs.trim();
            if lhs.is_empty() || lhs.contains(char::is_whitespace) {
                return Err(err(line_no, GrammarErrorKind::Syntax("expected a single parent label before `->`".into())));
            }
            // Alias resolution needs the inventory, so it is deferred.
            let parent = parse_label_token(lhs, true).map_err(|error| {
                err(line_no, GrammarErrorKind::Label { text: lhs.into(), error })
            })?;
            let mut children = Vec::new();
            for tok in rhs.split_whitespace() {
                let l = parse_label_token(tok, true).map_err(|error| {
                    err(line_no, GrammarErrorKind::Label { text: tok.into(), error })
                })?;
                children.push((tok.to_string(), l));
            }
            if children.is_empty() || children.len() > 2 {
                return Err(err(line_no, GrammarErrorKind::Arity(children.len())));
            }
            pending.push(Pending {
                line: line_no,
                parent,
                parent_text: lhs.to_string(),
                children,
            });
            continue;
        }
        let Some((key, value)) = line.split_once(':') else {
            return Err(err(line_no, GrammarErrorKind::Syntax(alloc::format!("unrecognised line {line:?}"))));
        };
        let value = value.trim();
        match key.trim() {
            "pattern" => {
                if value.is_empty() || value.contains(char::is_whitespace) {
                    return Err(err(line_no, GrammarErrorKind::Syntax("pattern id must be a single token".into())));
                }
                match &pattern {
                    Some(p) if p != value => {
                        return Err(err(line_no, GrammarErrorKind::ConflictingHeader("pattern")))
                    }
                    _ => pattern = Some(value.to_string()),
                }
            }
            "pieces" => {
                let mut list = Vec::new();
                for tok in value.split_whitespace() {
                    let p = PieceLabel::parse(tok).map_err(|error| {
                        err(line_no, GrammarErrorKind::Label { text: tok.into(), error })
                    })?;
                    list.push(p);
                }
                list.sort();
                list.dedup();
                match &pieces {
                    Some((_, existing)) if *existing != list => {
                        return Err(err(line_no, GrammarErrorKind::ConflictingHeader("pieces")))
                    }
                    _ => pieces = Some((line_no, list)),
                }
            }
            "roots" => {
                let list: Vec<String> = value.split_whitespace().map(String::from).collect();
                match &roots_raw {
                    Some((_, existing)) if *existing != list => {
                        return Err(err(line_no, GrammarErrorKind::ConflictingHeader("roots")))
                    }
                    _ => roots_raw = Some((line_no, list)),
                }
            }
            other => {
                return Err(err(line_no, GrammarErrorKind::Syntax(alloc::format!("unknown header `{other}`"))));
            }
        }
    }

    let pattern = pattern.ok_or(err(0, GrammarErrorKind::MissingHeader("pattern")))?;
    let (_, inventory) = pieces.ok_or(err(0, GrammarErrorKind::MissingHeader("pieces")))?;
    let (roots_line, roots_raw) = roots_raw.ok_or(err(0, GrammarErrorKind::MissingHeader("roots")))?;
    let inventory_set: BTreeSet<PieceLabel> = inventory.iter().copied().collect();

    // A pattern made of the single piece S makes `S` a real label.
    let alias_enabled = !(inventory.len() == 1 && inventory[0] == PieceLabel::plain('S').unwrap());
    let full = |n: u32| NodeLabel::new(inventory.clone(), n);
    let resolve = |tok: LabelToken, text: &str, line: usize| -> Result<NodeLabel, GrammarError> {
        let label = match tok {
            LabelToken::Label(l) => l,
            LabelToken::Full(n) if alias_enabled => full(n).map_err(|error| {
                err(line, GrammarErrorKind::Label { text: text.into(), error })
            })?,
            LabelToken::Full(_) => NodeLabel::parse(text).map_err(|error| {
                err(line, GrammarErrorKind::Label { text: text.into(), error })
            })?,
        };
        if let Some(p) = label.pieces().iter().find(|p| !inventory_set.contains(p)) {
            return Err(err(line, GrammarErrorKind::UnknownPiece(*p)));
        }
        Ok(label)
    };

    let mut roots = Vec::new();
    for tok in &roots_raw {
        let t = parse_label_token(tok, true).map_err(|error| {
            err(roots_line, GrammarErrorKind::Label { text: tok.clone(), error })
        })?;
        roots.push(resolve(t, tok, roots_line)?);
    }

    let mut rules = Vec::new();
    for p in pending {
        let parent = resolve(p.parent, &p.parent_text, p.line)?;
        let mut children = Vec::new();
        for (text, l) in p.children {
            children.push(resolve(l, &text, p.line)?);
        }
        let rule = GrammarRule::new(parent, children);
        let problems = check_local(&rule.parent, &rule.children);
        if let Some(problem) = problems.into_iter().next() {
            return Err(GrammarError::Invalid(alloc::vec![GrammarViolation::Rule { rule, problem }]));
        }
        rules.push(rule);
    }

    let g = GoldGrammar::new(pattern, inventory, roots, rules);
    let violations = validate_grammar(&g);
    if !violations.is_empty() {
        return Err(GrammarError::Invalid(violations));
    }
    Ok(g)
}

impl core::error::Error for EnumerationError {}

impl core::error::Error for GrammarError {}
