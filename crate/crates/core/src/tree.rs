//! Unary/binary assembly trees, forests of them, and depth-1 subtrees.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::piece::{bump_self_attach, merge_labels, LabelError, NodeLabel, PieceLabel};

/// One node of an assembly tree. Leaves are single pieces; a binary node
/// joins two components; a unary node is a self-attachment.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AssemblyNode {
    label: NodeLabel,
    children: Vec<AssemblyNode>,
}

impl AssemblyNode {
    pub fn leaf(piece: PieceLabel) -> Self {
        AssemblyNode {
            label: NodeLabel::leaf(piece),
            children: Vec::new(),
        }
    }

    /// Self-attachment of `child`.
    pub fn unary(child: AssemblyNode) -> Self {
        AssemblyNode {
            label: bump_self_attach(&child.label),
            children: alloc::vec![child],
        }
    }

    /// Joins two components; children are stored in canonical order.
    pub fn binary(a: AssemblyNode, b: AssemblyNode) -> Result<Self, LabelError> {
        let label = merge_labels(&a.label, &b.label)?;
        let children = if a.label <= b.label {
            alloc::vec![a, b]
        } else {
            alloc::vec![b, a]
        };
        Ok(AssemblyNode { label, children })
    }

    /// Builds a node without checking any constraint; pair with
    /// [`validate_tree`]. Children are sorted.
    pub fn from_parts(label: NodeLabel, mut children: Vec<AssemblyNode>) -> Self {
        children.sort_by(|a, b| a.label.cmp(&b.label));
        AssemblyNode { label, children }
    }

    pub fn label(&self) -> &NodeLabel {
        &self.label
    }

    pub fn children(&self) -> &[AssemblyNode] {
        &self.children
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// Pre-order traversal.
    pub fn nodes(&self) -> Nodes<'_> {
        Nodes { stack: alloc::vec![self] }
    }

    /// Post-order traversal (children before parents, in canonical order).
    pub fn post_order(&self) -> Vec<&AssemblyNode> {
        let mut out = Vec::new();
        fn walk<'a>(n: &'a AssemblyNode, out: &mut Vec<&'a AssemblyNode>) {
            for c in &n.children {
                walk(c, out);
            }
            out.push(n);
        }
        walk(self, &mut out);
        out
    }

    pub fn leaf_pieces(&self) -> Vec<PieceLabel> {
        let mut v: Vec<PieceLabel> = self
            .nodes()
            .filter(|n| n.is_leaf())
            .flat_map(|n| n.label.pieces().iter().copied())
            .collect();
        v.sort();
        v
    }

    pub fn non_leaf_count(&self) -> usize {
        self.nodes().filter(|n| !n.is_leaf()).count()
    }

    pub fn subtree(&self) -> Option<DepthOneSubtree> {
        if self.is_leaf() {
            return None;
        }
        Some(DepthOneSubtree {
            parent: self.label.clone(),
            children: self.children.iter().map(|c| c.label.clone()).collect(),
        })
    }

    /// Depth-1 subtrees of this tree alone.
    pub fn subtrees(&self) -> BTreeSet<DepthOneSubtree> {
        self.nodes().filter_map(AssemblyNode::subtree).collect()
    }

    /// Bracket notation, e.g. `(ABC_1 (AB_1 (AB A B)) C)`.
    pub fn serialize(&self) -> String {
        self.to_string()
    }
}

pub struct Nodes<'a> {
    stack: Vec<&'a AssemblyNode>,
}

impl<'a> Iterator for Nodes<'a> {
    type Item = &'a AssemblyNode;

    fn next(&mut self) -> Option<Self::Item> {
        let n = self.stack.pop()?;
        self.stack.extend(n.children.iter().rev());
        Some(n)
    }
}

impl fmt::Display for AssemblyNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.children.is_empty() {
            return write!(f, "{}", self.label);
        }
        write!(f, "({}", self.label)?;
        for c in &self.children {
            write!(f, " {c}")?;
        }
        f.write_str(")")
    }
}

/// Assembly trees are represented by their root node.
pub type AssemblyTree = AssemblyNode;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    TooManyChildren(usize),
    LeafNotAtomic,
    LeafCounterNonZero,
    ChildrenOverlap,
    PieceUnionMismatch,
    /// Binary parent counter must be the larger child counter.
    BinaryCounter { expected: u32, found: u32 },
    UnaryPiecesChanged,
    /// Unary parent counter must be the child counter plus one.
    UnaryCounter { expected: u32, found: u32 },
    ChildOrder,
    DuplicateLabel,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::TooManyChildren(n) => write!(f, "node has {n} children (at most 2 allowed)"),
            Rule::LeafNotAtomic => f.write_str("leaf must hold exactly one piece"),
            Rule::LeafCounterNonZero => f.write_str("leaf self-attachment counter must be 0"),
            Rule::ChildrenOverlap => f.write_str("children share pieces"),
            Rule::PieceUnionMismatch => f.write_str("children's pieces do not add up to the parent's"),
            Rule::BinaryCounter { expected, found } => write!(
                f,
                "parent counter is {found}, expected max of children = {expected}"
            ),
            Rule::UnaryPiecesChanged => f.write_str("self-attachment changes the piece set"),
            Rule::UnaryCounter { expected, found } => write!(
                f,
                "self-attachment counter is {found}, expected child counter + 1 = {expected}"
            ),
            Rule::ChildOrder => f.write_str("children are not in canonical order"),
            Rule::DuplicateLabel => f.write_str("label occurs more than once"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub node: NodeLabel,
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.node, self.rule)
    }
}

/// Checks one parent/children label combination against the branching
/// arithmetic. Shared by tree and grammar validation.
pub(crate) fn check_local(parent: &NodeLabel, children: &[NodeLabel]) -> Vec<Rule> {
    let mut out = Vec::new();
    match children {
        [] => {
            if !parent.is_atomic() {
                out.push(Rule::LeafNotAtomic);
            }
            if parent.self_attach() != 0 {
                out.push(Rule::LeafCounterNonZero);
            }
        }
        [child] => {
            if child.pieces() != parent.pieces() {
                out.push(Rule::UnaryPiecesChanged);
            }
            let expected = child.self_attach().saturating_add(1);
            if parent.self_attach() != expected {
                out.push(Rule::UnaryCounter {
                    expected,
                    found: parent.self_attach(),
                });
            }
        }
        [a, b] => {
            if a > b {
                out.push(Rule::ChildOrder);
            }
            match merge_labels(a, b) {
                Err(_) => out.push(Rule::ChildrenOverlap),
                Ok(m) => {
                    if m.pieces() != parent.pieces() {
                        out.push(Rule::PieceUnionMismatch);
                    }
                    if m.self_attach() != parent.self_attach() {
                        out.push(Rule::BinaryCounter {
                            expected: m.self_attach(),
                            found: parent.self_attach(),
                        });
                    }
                }
            }
        }
        more => out.push(Rule::TooManyChildren(more.len())),
    }
    out
}

/// Returns every structural violation in the tree; empty means valid.
pub fn validate_tree(root: &AssemblyNode) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for node in root.nodes() {
        if !seen.insert(&node.label) {
            out.push(Violation {
                node: node.label.clone(),
                rule: Rule::DuplicateLabel,
            });
        }
        let child_labels: Vec<NodeLabel> = node.children.iter().map(|c| c.label.clone()).collect();
        out.extend(check_local(&node.label, &child_labels).into_iter().map(|rule| Violation {
            node: node.label.clone(),
            rule,
        }));
    }
    out
}

/// A parent label together with its immediate children's labels.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DepthOneSubtree {
    parent: NodeLabel,
    children: Vec<NodeLabel>,
}

impl DepthOneSubtree {
    /// Sorts the children; checks arity only.
    pub fn new(parent: NodeLabel, mut children: Vec<NodeLabel>) -> Option<Self> {
        if children.is_empty() || children.len() > 2 {
            return None;
        }
        children.sort();
        Some(DepthOneSubtree { parent, children })
    }

    pub fn parent(&self) -> &NodeLabel {
        &self.parent
    }

    pub fn children(&self) -> &[NodeLabel] {
        &self.children
    }

    pub fn is_well_formed(&self) -> bool {
        check_local(&self.parent, &self.children).is_empty()
    }
}

impl fmt::Display for DepthOneSubtree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ->", self.parent)?;
        for c in &self.children {
            write!(f, " {c}")?;
        }
        Ok(())
    }
}

/// A set of assembly trees whose node labels are unique across the whole
/// forest. Isolated leaves (pieces never attached) are trees of one node.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Forest {
    trees: Vec<AssemblyNode>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ForestError {
    DuplicateLabel(NodeLabel),
    /// The same parent label was given two different child lists.
    ConflictingSubtrees(NodeLabel),
    /// A label is reachable from two different parents.
    SharedChild(NodeLabel),
    /// The subtrees form a cycle or otherwise fail to resolve to trees.
    Unresolvable(NodeLabel),
}

impl fmt::Display for ForestError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ForestError::DuplicateLabel(l) => write!(f, "label {l} occurs more than once in the forest"),
            ForestError::ConflictingSubtrees(l) => write!(f, "conflicting subtrees for {l}"),
            ForestError::SharedChild(l) => write!(f, "{l} has more than one parent"),
            ForestError::Unresolvable(l) => write!(f, "subtrees under {l} do not form a tree"),
        }
    }
}

impl Forest {
    /// Trees are kept sorted by root label.
    pub fn new(mut trees: Vec<AssemblyNode>) -> Result<Self, ForestError> {
        let mut seen = BTreeSet::new();
        for t in &trees {
            for n in t.nodes() {
                if !seen.insert(n.label.clone()) {
                    return Err(ForestError::DuplicateLabel(n.label.clone()));
                }
            }
        }
        trees.sort_by(|a, b| a.label.cmp(&b.label));
        Ok(Forest { trees })
    }

    pub fn single(tree: AssemblyNode) -> Self {
        Forest { trees: alloc::vec![tree] }
    }

    pub fn trees(&self) -> &[AssemblyNode] {
        &self.trees
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    /// Roots with children.
    pub fn assembled(&self) -> impl Iterator<Item = &AssemblyNode> {
        self.trees.iter().filter(|t| !t.is_leaf())
    }

    pub fn isolated_leaves(&self) -> impl Iterator<Item = PieceLabel> + '_ {
        self.trees
            .iter()
            .filter(|t| t.is_leaf())
            .map(|t| t.label.first_piece())
    }

    /// Rebuilds a forest by gluing together nodes with equal labels.
    /// `leaves` adds isolated leaves for pieces that no subtree mentions.
    pub fn glue<I>(subtrees: I, leaves: &[PieceLabel]) -> Result<Self, ForestError>
    where
        I: IntoIterator<Item = DepthOneSubtree>,
    {
        let mut expansion: BTreeMap<NodeLabel, Vec<NodeLabel>> = BTreeMap::new();
        for st in subtrees {
            match expansion.get(&st.parent) {
                Some(existing) if *existing != st.children => {
                    return Err(ForestError::ConflictingSubtrees(st.parent));
                }
                Some(_) => {}
                None => {
                    expansion.insert(st.parent, st.children);
                }
            }
        }
        let mut parent_of: BTreeMap<&NodeLabel, &NodeLabel> = BTreeMap::new();
        for (parent, children) in &expansion {
            for c in children {
                if parent_of.insert(c, parent).is_some() {
                    return Err(ForestError::SharedChild(c.clone()));
                }
            }
        }
        let roots: Vec<&NodeLabel> = expansion
            .keys()
            .filter(|l| !parent_of.contains_key(l))
            .collect();

        fn build(
            label: &NodeLabel,
            expansion: &BTreeMap<NodeLabel, Vec<NodeLabel>>,
            depth: usize,
        ) -> Result<AssemblyNode, ForestError> {
            if depth > expansion.len() {
                return Err(ForestError::Unresolvable(label.clone()));
            }
            let children = match expansion.get(label) {
                None => Vec::new(),
                Some(cs) => cs
                    .iter()
                    .map(|c| build(c, expansion, depth + 1))
                    .collect::<Result<Vec<_>, _>>()?,
            };
            Ok(AssemblyNode::from_parts(label.clone(), children))
        }

        let mut trees = Vec::new();
        let mut placed = 0usize;
        for r in roots {
            let t = build(r, &expansion, 0)?;
            placed += t.non_leaf_count();
            trees.push(t);
        }
        if placed != expansion.len() {
            // Some parents were never reached from a root: a cycle.
            let stray = expansion
                .keys()
                .find(|l| !trees.iter().any(|t| t.nodes().any(|n| &n.label == *l)))
                .cloned()
                .unwrap_or_else(|| expansion.keys().next().cloned().unwrap());
            return Err(ForestError::Unresolvable(stray));
        }
        let covered: BTreeSet<PieceLabel> = trees.iter().flat_map(|t| t.leaf_pieces()).collect();
        for &leaf in leaves {
            if !covered.contains(&leaf) {
                trees.push(AssemblyNode::leaf(leaf));
            }
        }
        Forest::new(trees)
    }
}

/// Depth-1 subtrees of every non-leaf node in the forest.
pub fn depth_one_subtrees(forest: &Forest) -> BTreeSet<DepthOneSubtree> {
    forest
        .trees
        .iter()
        .flat_map(|t| t.nodes().filter_map(AssemblyNode::subtree))
        .collect()
}

pub fn canonical_serialize(root: &AssemblyNode) -> String {
    root.serialize()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TreeParseError {
    Syntax { offset: usize, message: &'static str },
    Label { offset: usize, error: LabelError },
    Invalid(Vec<Violation>),
}

impl fmt::Display for TreeParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreeParseError::Syntax { offset, message } => write!(f, "{message} at offset {offset}"),
            TreeParseError::Label { offset, error } => write!(f, "bad label at offset {offset}: {error}"),
            TreeParseError::Invalid(vs) => {
                f.write_str("tree violates assembly constraints:")?;
                for v in vs {
                    write!(f, " [{v}]")?;
                }
                Ok(())
            }
        }
    }
}

/// Parses bracket notation and validates the result.
pub fn parse_serialized(text: &str) -> Result<AssemblyNode, TreeParseError> {
    let mut p = BracketParser {
        src: text,
        pos: 0,
    };
    p.skip_ws();
    let node = p.node()?;
    p.skip_ws();
    if p.pos != text.len() {
        return Err(TreeParseError::Syntax {
            offset: p.pos,
            message: "trailing input",
        });
    }
    let violations = validate_tree(&node);
    if !violations.is_empty() {
        return Err(TreeParseError::Invalid(violations));
    }
    Ok(node)
}

impl FromStr for AssemblyNode {
    type Err = TreeParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_serialized(s)
    }
}

struct BracketParser<'a> {
    src: &'a str,
    pos: usize,
}

impl BracketParser<'_> {
    fn skip_ws(&mut self) {
        while self.src[self.pos..].starts_with(char::is_whitespace) {
            self.pos += self.src[self.pos..].chars().next().map_or(1, char::len_utf8);
        }
    }

    fn label(&mut self) -> Result<NodeLabel, TreeParseError> {
        let start = self.pos;
        let rest = &self.src[start..];
        let len = rest
            .find(|c: char| c.is_whitespace() || c == '(' || c == ')')
            .unwrap_or(rest.len());
        if len == 0 {
            return Err(TreeParseError::Syntax {
                offset: start,
                message: "expected a label",
            });
        }
        self.pos += len;
        NodeLabel::parse(&rest[..len]).map_err(|error| TreeParseError::Label {
            offset: start,
            error,
        })
    }

    fn node(&mut self) -> Result<AssemblyNode, TreeParseError> {
        if !self.src[self.pos..].starts_with('(') {
            let label = self.label()?;
            return Ok(AssemblyNode::from_parts(label, Vec::new()));
        }
        self.pos += 1;
        self.skip_ws();
        let label = self.label()?;
        let mut children = Vec::new();
        loop {
            self.skip_ws();
            if self.src[self.pos..].starts_with(')') {
                self.pos += 1;
                break;
            }
            if self.pos >= self.src.len() {
                return Err(TreeParseError::Syntax {
                    offset: self.pos,
                    message: "unclosed parenthesis",
                });
            }
            children.push(self.node()?);
        }
        if children.is_empty() {
            return Err(TreeParseError::Syntax {
                offset: self.pos,
                message: "bracketed node without children",
            });
        }
        Ok(AssemblyNode::from_parts(label, children))
    }
}

impl core::error::Error for ForestError {}

impl core::error::Error for TreeParseError {}
