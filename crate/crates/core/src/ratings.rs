//! Aggregation of step-level Likert ratings into per-document summaries:
//! for each question, the mean rating and the shares above and below 3.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Question {
    S1,
    S2,
    S3,
    S4,
    S5,
}

impl Question {
    pub const ALL: [Question; 5] = [Question::S1, Question::S2, Question::S3, Question::S4, Question::S5];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        ["S1", "S2", "S3", "S4", "S5"][self.index()]
    }
}

impl fmt::Display for Question {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Question {
    type Err = RatingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Question::ALL
            .into_iter()
            .find(|q| q.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| RatingError::UnknownQuestion(String::from(s)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RatingError {
    UnknownQuestion(String),
    OutOfRange(i64),
}

impl fmt::Display for RatingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RatingError::UnknownQuestion(q) => write!(f, "unknown question {q:?} (expected S1..S5)"),
            RatingError::OutOfRange(r) => write!(f, "rating {r} outside 1..=5"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatingRecord {
    pub doc_id: String,
    pub step_index: usize,
    pub question: Question,
    rating: u8,
}

impl RatingRecord {
    pub fn new(doc_id: impl Into<String>, step_index: usize, question: Question, rating: i64) -> Result<Self, RatingError> {
        if !(1..=5).contains(&rating) {
            return Err(RatingError::OutOfRange(rating));
        }
        Ok(RatingRecord {
            doc_id: doc_id.into(),
            step_index,
            question,
            rating: rating as u8,
        })
    }

    pub fn rating(&self) -> u8 {
        self.rating
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuestionSummary {
    pub count: usize,
    pub mean: f64,
    pub above: f64,
    pub below: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DocRatingSummary {
    pub doc_id: String,
    /// Indexed by [`Question::index`]; `None` when a question has no ratings.
    pub questions: [Option<QuestionSummary>; 5],
}

/// One summary per document, sorted by doc id.
pub fn aggregate_ratings(records: &[RatingRecord]) -> Vec<DocRatingSummary> {
    let mut acc: BTreeMap<&str, [(usize, u64, usize, usize); 5]> = BTreeMap::new();
    for r in records {
        let slot = &mut acc.entry(r.doc_id.as_str()).or_insert([(0, 0, 0, 0); 5])[r.question.index()];
        slot.0 += 1;
        slot.1 += u64::from(r.rating);
        if r.rating > 3 {
            slot.2 += 1;
        }
        if r.rating < 3 {
            slot.3 += 1;
        }
    }
    acc.into_iter()
        .map(|(doc, qs)| DocRatingSummary {
            doc_id: String::from(doc),
            questions: qs.map(|(count, sum, above, below)| {
                (count > 0).then(|| {
                    let c = count as f64;
                    QuestionSummary {
                        count,
                        mean: sum as f64 / c,
                        above: above as f64 / c,
                        below: below as f64 / c,
                    }
                })
            }),
        })
        .collect()
}

impl core::error::Error for RatingError {}
