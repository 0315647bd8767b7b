//! Piece labels and canonical node labels.
//!
//! A piece is a single uppercase letter optionally followed by a mirror
//! marker (`l`/`r`) or a copy index (`1`, `2`, ...). A node label is a
//! strictly sorted, duplicate-free concatenation of pieces with a trailing
//! self-attachment counter, written `AB_1` (the `_0` suffix is omitted).

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

/// Distinguishes copies of the same pattern piece.
///
/// The derived ordering is the tie-break used inside a base letter:
/// plain < left < right < copy(k), with copies ordered by `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variant {
    Plain,
    Left,
    Right,
    Copy(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PieceLabel {
    base: u8,
    variant: Variant,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelError {
    Empty,
    /// A character that cannot start or continue a label.
    InvalidChar { ch: char, offset: usize },
    LowercaseBase { ch: char, offset: usize },
    ZeroCopyIndex { offset: usize },
    CopyIndexOverflow { offset: usize },
    MalformedCounter(String),
    /// Pieces not in canonical order; `offset` is the index of the first offending piece.
    Unsorted { offset: usize },
    DuplicatePiece(PieceLabel),
    TrailingInput { offset: usize },
    OverlappingPieces(PieceLabel),
}

impl fmt::Display for LabelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelError::Empty => f.write_str("empty label"),
            LabelError::InvalidChar { ch, offset } => {
                write!(f, "invalid character {ch:?} at offset {offset}")
            }
            LabelError::LowercaseBase { ch, offset } => {
                write!(f, "piece base must be an uppercase letter, found {ch:?} at offset {offset}")
            }
            LabelError::ZeroCopyIndex { offset } => {
                write!(f, "copy index must be at least 1 (offset {offset})")
            }
            LabelError::CopyIndexOverflow { offset } => {
                write!(f, "copy index too large (offset {offset})")
            }
            LabelError::MalformedCounter(s) => write!(f, "malformed self-attachment counter {s:?}"),
            LabelError::Unsorted { offset } => {
                write!(f, "pieces not in canonical order (piece #{offset})")
            }
            LabelError::DuplicatePiece(p) => write!(f, "duplicate piece {p}"),
            LabelError::TrailingInput { offset } => {
                write!(f, "unexpected trailing input at offset {offset}")
            }
            LabelError::OverlappingPieces(p) => {
                write!(f, "labels share piece {p} and cannot be merged")
            }
        }
    }
}

impl PieceLabel {
    /// Builds a label from a base letter, which must be in `A..=Z`.
    pub fn new(base: char, variant: Variant) -> Result<Self, LabelError> {
        if base.is_ascii_lowercase() {
            return Err(LabelError::LowercaseBase { ch: base, offset: 0 });
        }
        if !base.is_ascii_uppercase() {
            return Err(LabelError::InvalidChar { ch: base, offset: 0 });
        }
        if variant == Variant::Copy(0) {
            return Err(LabelError::ZeroCopyIndex { offset: 1 });
        }
        Ok(PieceLabel {
            base: base as u8,
            variant,
        })
    }

    pub fn plain(base: char) -> Result<Self, LabelError> {
        Self::new(base, Variant::Plain)
    }

    pub fn base(&self) -> char {
        self.base as char
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// Parses exactly one piece label.
    pub fn parse(text: &str) -> Result<Self, LabelError> {
        if text.is_empty() {
            return Err(LabelError::Empty);
        }
        let (piece, used) = scan_piece(text.as_bytes(), 0)?;
        if used != text.len() {
            return Err(trailing(text, used));
        }
        Ok(piece)
    }
}

fn trailing(text: &str, offset: usize) -> LabelError {
    let ch = text[offset..].chars().next().unwrap_or('?');
    if ch.is_ascii_lowercase() || ch.is_ascii_digit() || ch == '_' {
        LabelError::TrailingInput { offset }
    } else {
        LabelError::InvalidChar { ch, offset }
    }
}

/// Greedy single-piece scanner: one uppercase letter, then an optional
/// `l`/`r` or a digit run. Returns the piece and the offset after it.
fn scan_piece(bytes: &[u8], start: usize) -> Result<(PieceLabel, usize), LabelError> {
    let Some(&b) = bytes.get(start) else {
        return Err(LabelError::Empty);
    };
    if b.is_ascii_lowercase() {
        return Err(LabelError::LowercaseBase {
            ch: b as char,
            offset: start,
        });
    }
    if !b.is_ascii_uppercase() {
        return Err(LabelError::InvalidChar {
            ch: char_at(bytes, start),
            offset: start,
        });
    }
    let mut pos = start + 1;
    let variant = match bytes.get(pos) {
        Some(b'l') => {
            pos += 1;
            Variant::Left
        }
        Some(b'r') => {
            pos += 1;
            Variant::Right
        }
        Some(d) if d.is_ascii_digit() => {
            let digits_start = pos;
            let mut k: u32 = 0;
            while let Some(d) = bytes.get(pos).filter(|d| d.is_ascii_digit()) {
                k = k
                    .checked_mul(10)
                    .and_then(|k| k.checked_add(u32::from(d - b'0')))
                    .ok_or(LabelError::CopyIndexOverflow {
                        offset: digits_start,
                    })?;
                pos += 1;
            }
            if k == 0 {
                return Err(LabelError::ZeroCopyIndex {
                    offset: digits_start,
                });
            }
            Variant::Copy(k)
        }
        _ => Variant::Plain,
    };
    Ok((PieceLabel { base: b, variant }, pos))
}

fn char_at(bytes: &[u8], offset: usize) -> char {
    core::str::from_utf8(&bytes[offset..])
        .ok()
        .and_then(|s| s.chars().next())
        .unwrap_or('\u{FFFD}')
}

impl fmt::Display for PieceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.base as char)?;
        match self.variant {
            Variant::Plain => Ok(()),
            Variant::Left => f.write_str("l"),
            Variant::Right => f.write_str("r"),
            Variant::Copy(k) => write!(f, "{k}"),
        }
    }
}

impl FromStr for PieceLabel {
    type Err = LabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PieceLabel::parse(s)
    }
}

/// Canonical ordering of piece labels.
pub fn compare_piece_labels(a: &PieceLabel, b: &PieceLabel) -> Ordering {
    a.cmp(b)
}

/// Label of an assembly-tree node: the pieces it contains plus its
/// self-attachment counter.
///
/// The derived ordering compares piece lists first. For labels with
/// disjoint piece sets this reduces to comparing first pieces.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeLabel {
    pieces: Vec<PieceLabel>,
    self_attach: u32,
}

impl NodeLabel {
    /// `pieces` must be non-empty and strictly increasing.
    pub fn new(pieces: Vec<PieceLabel>, self_attach: u32) -> Result<Self, LabelError> {
        if pieces.is_empty() {
            return Err(LabelError::Empty);
        }
        for (i, w) in pieces.windows(2).enumerate() {
            match w[0].cmp(&w[1]) {
                Ordering::Less => {}
                Ordering::Equal => return Err(LabelError::DuplicatePiece(w[1])),
                Ordering::Greater => return Err(LabelError::Unsorted { offset: i + 1 }),
            }
        }
        Ok(NodeLabel {
            pieces,
            self_attach,
        })
    }

    pub fn leaf(piece: PieceLabel) -> Self {
        NodeLabel {
            pieces: alloc::vec![piece],
            self_attach: 0,
        }
    }

    pub fn with_self_attach(&self, self_attach: u32) -> Self {
        NodeLabel {
            pieces: self.pieces.clone(),
            self_attach,
        }
    }

    pub fn pieces(&self) -> &[PieceLabel] {
        &self.pieces
    }

    pub fn first_piece(&self) -> PieceLabel {
        self.pieces[0]
    }

    pub fn self_attach(&self) -> u32 {
        self.self_attach
    }

    pub fn is_atomic(&self) -> bool {
        self.pieces.len() == 1
    }

    pub fn contains(&self, piece: &PieceLabel) -> bool {
        self.pieces.binary_search(piece).is_ok()
    }

    pub fn is_disjoint(&self, other: &NodeLabel) -> bool {
        first_shared(&self.pieces, &other.pieces).is_none()
    }

    /// Parses `"ABlBr"`, `"AB_1"` and friends. A `"_0"` suffix is accepted
    /// and normalised away.
    pub fn parse(text: &str) -> Result<Self, LabelError> {
        if text.is_empty() {
            return Err(LabelError::Empty);
        }
        let (body, counter) = match text.rfind('_') {
            Some(idx) => {
                let digits = &text[idx + 1..];
                if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
                    return Err(LabelError::MalformedCounter(String::from(&text[idx..])));
                }
                let n = digits
                    .parse::<u32>()
                    .map_err(|_| LabelError::MalformedCounter(String::from(&text[idx..])))?;
                (&text[..idx], n)
            }
            None => (text, 0),
        };
        if body.is_empty() {
            return Err(LabelError::Empty);
        }
        let bytes = body.as_bytes();
        let mut pieces = Vec::new();
        let mut pos = 0;
        while pos < bytes.len() {
            let (piece, next) = scan_piece(bytes, pos)?;
            pieces.push(piece);
            pos = next;
        }
        NodeLabel::new(pieces, counter)
    }
}

fn first_shared(a: &[PieceLabel], b: &[PieceLabel]) -> Option<PieceLabel> {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => return Some(a[i]),
        }
    }
    None
}

impl fmt::Display for NodeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.pieces {
            write!(f, "{p}")?;
        }
        if self.self_attach > 0 {
            write!(f, "_{}", self.self_attach)?;
        }
        Ok(())
    }
}

impl FromStr for NodeLabel {
    type Err = LabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NodeLabel::parse(s)
    }
}

impl From<PieceLabel> for NodeLabel {
    fn from(p: PieceLabel) -> Self {
        NodeLabel::leaf(p)
    }
}

pub fn format_node_label(label: &NodeLabel) -> String {
    use alloc::string::ToString;
    label.to_string()
}

pub fn parse_node_label(text: &str) -> Result<NodeLabel, LabelError> {
    NodeLabel::parse(text)
}

/// Joins two components: sorted union of pieces, larger counter wins.
pub fn merge_labels(a: &NodeLabel, b: &NodeLabel) -> Result<NodeLabel, LabelError> {
    if let Some(p) = first_shared(&a.pieces, &b.pieces) {
        return Err(LabelError::OverlappingPieces(p));
    }
    let mut pieces = Vec::with_capacity(a.pieces.len() + b.pieces.len());
    let (mut i, mut j) = (0, 0);
    while i < a.pieces.len() && j < b.pieces.len() {
        if a.pieces[i] < b.pieces[j] {
            pieces.push(a.pieces[i]);
            i += 1;
        } else {
            pieces.push(b.pieces[j]);
            j += 1;
        }
    }
    pieces.extend_from_slice(&a.pieces[i..]);
    pieces.extend_from_slice(&b.pieces[j..]);
    Ok(NodeLabel {
        pieces,
        self_attach: a.self_attach.max(b.self_attach),
    })
}

/// Self-attachment: same pieces, counter plus one.
pub fn bump_self_attach(a: &NodeLabel) -> NodeLabel {
    a.with_self_attach(a.self_attach + 1)
}

impl core::error::Error for LabelError {}
