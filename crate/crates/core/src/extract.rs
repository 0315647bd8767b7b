//! Pattern inventories, instruction documents, and the rule-based piece
//! extractor.
//!
//! The extractor reads parenthesised label tokens such as `(A)`, `(Bl)` or
//! `(C2)`. Instruction texts are written to name every piece they touch this
//! way, which is what makes plain label spotting sufficient.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::piece::PieceLabel;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternSpec {
    pattern_id: String,
    pieces: BTreeMap<PieceLabel, String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SpecError {
    NoPieces,
    DuplicatePiece(PieceLabel),
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpecError::NoPieces => f.write_str("pattern spec lists no pieces"),
            SpecError::DuplicatePiece(p) => write!(f, "piece {p} listed twice"),
        }
    }
}

impl PatternSpec {
    pub fn new<I, S>(pattern_id: impl Into<String>, pieces: I) -> Result<Self, SpecError>
    where
        I: IntoIterator<Item = (PieceLabel, S)>,
        S: Into<String>,
    {
        let mut map = BTreeMap::new();
        for (p, name) in pieces {
            if map.insert(p, name.into()).is_some() {
                return Err(SpecError::DuplicatePiece(p));
            }
        }
        if map.is_empty() {
            return Err(SpecError::NoPieces);
        }
        Ok(PatternSpec {
            pattern_id: pattern_id.into(),
            pieces: map,
        })
    }

    pub fn pattern_id(&self) -> &str {
        &self.pattern_id
    }

    pub fn pieces(&self) -> &BTreeMap<PieceLabel, String> {
        &self.pieces
    }

    pub fn contains(&self, p: &PieceLabel) -> bool {
        self.pieces.contains_key(p)
    }

    pub fn name(&self, p: &PieceLabel) -> Option<&str> {
        self.pieces.get(p).map(String::as_str)
    }

    pub fn inventory(&self) -> impl Iterator<Item = PieceLabel> + '_ {
        self.pieces.keys().copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstructionDoc {
    pub pattern_id: String,
    pub doc_id: String,
    pub steps: Vec<String>,
}

/// Pieces mentioned in one step, in first-mention order without repeats.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepExtraction {
    pub step_index: usize,
    pub mentions: Vec<PieceLabel>,
}

impl StepExtraction {
    pub fn new(step_index: usize, mentions: impl IntoIterator<Item = PieceLabel>) -> Self {
        let mut out: Vec<PieceLabel> = Vec::new();
        for m in mentions {
            if !out.contains(&m) {
                out.push(m);
            }
        }
        StepExtraction {
            step_index,
            mentions: out,
        }
    }
}

/// A parenthesised label-like token that is not in the inventory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownMention {
    pub step_index: usize,
    pub text: String,
}

/// Byte span of a parenthesised mention inside a step, parentheses included.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MentionSpan {
    pub start: usize,
    pub end: usize,
    pub piece: PieceLabel,
}

/// Every `(X)` token whose content parses as a piece label, known or not.
pub fn mention_spans(step: &str) -> Vec<MentionSpan> {
    let mut out = Vec::new();
    let mut search = 0;
    while let Some(rel) = step[search..].find('(') {
        let open = search + rel;
        let Some(close_rel) = step[open + 1..].find(')') else {
            break;
        };
        let close = open + 1 + close_rel;
        if let Ok(piece) = PieceLabel::parse(&step[open + 1..close]) {
            out.push(MentionSpan {
                start: open,
                end: close + 1,
                piece,
            });
            search = close + 1;
        } else {
            search = open + 1;
        }
    }
    out
}

pub fn extract_pieces_rule_based(
    step_index: usize,
    step: &str,
    spec: &PatternSpec,
) -> (StepExtraction, Vec<UnknownMention>) {
    let mut known = Vec::new();
    let mut unknown = Vec::new();
    for span in mention_spans(step) {
        if spec.contains(&span.piece) {
            known.push(span.piece);
        } else {
            unknown.push(UnknownMention {
                step_index,
                text: span.piece.to_string(),
            });
        }
    }
    (StepExtraction::new(step_index, known), unknown)
}

/// Decides when a step whose mentions all resolve to one component is a
/// self-attachment rather than a finishing step (hem, fold, press).
///
/// A step qualifies when some sentence contains both an attachment verb
/// from the allowlist and a mention of one of the step's pieces. If none
/// of the pieces appear in parenthesised form (adapter output), the whole
/// step is searched for a verb instead.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttachmentPolicy {
    verbs: Vec<String>,
}

pub const DEFAULT_ATTACHMENT_VERBS: [&str; 6] = ["sew", "stitch", "attach", "join", "close", "seam"];

impl Default for AttachmentPolicy {
    fn default() -> Self {
        AttachmentPolicy::new(DEFAULT_ATTACHMENT_VERBS)
    }
}

impl AttachmentPolicy {
    pub fn new<I, S>(verbs: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        AttachmentPolicy {
            verbs: verbs.into_iter().map(|v| v.as_ref().to_lowercase()).collect(),
        }
    }

    pub fn verbs(&self) -> &[String] {
        &self.verbs
    }

    fn is_verb(&self, word: &str) -> bool {
        self.verbs.iter().any(|v| {
            word.strip_prefix(v.as_str()).is_some_and(|suffix| {
                matches!(suffix, "" | "s" | "es" | "d" | "ed" | "n" | "ing")
            })
        })
    }

    fn has_verb(&self, text: &str) -> bool {
        text.split(|c: char| !c.is_alphanumeric())
            .filter(|w| !w.is_empty())
            .any(|w| self.is_verb(&w.to_lowercase()))
    }

    pub fn is_self_attachment(&self, step: &str, mentions: &[PieceLabel]) -> bool {
        let spans = mention_spans(step);
        if !spans.iter().any(|s| mentions.contains(&s.piece)) {
            return self.has_verb(step);
        }
        let mut start = 0;
        let bytes = step.as_bytes();
        for (i, &b) in bytes.iter().enumerate().chain(core::iter::once((bytes.len(), &b'.'))) {
            if matches!(b, b'.' | b'!' | b'?' | b';' | b'\n') {
                let has_mention = spans
                    .iter()
                    .any(|s| s.start >= start && s.end <= i + 1 && mentions.contains(&s.piece));
                if has_mention && self.has_verb(&step[start..i.min(step.len())]) {
                    return true;
                }
                start = i + 1;
            }
        }
        false
    }
}

impl core::error::Error for SpecError {}
