//! Piece extraction backends.
//!
//! [`RuleBased`] spots parenthesised labels. [`HttpAdapter`] forwards each
//! step to an external service (typically an LLM wrapper) over a small JSON
//! protocol:
//!
//! ```text
//! POST <url>   {"step": "...", "inventory": ["A", "B", ...]}
//! 200 OK       {"pieces": ["A", "B"]}
//! ```

use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sewtree_core::extract::{extract_pieces_rule_based, InstructionDoc, PatternSpec, StepExtraction};
use sewtree_core::piece::PieceLabel;
use sewtree_core::pipeline::{Diagnostic, DiagnosticKind};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepOutput {
    pub extraction: StepExtraction,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractError {
    #[error("step {step_index}: adapter request failed after {attempts} attempt(s): {message}")]
    Transport {
        step_index: usize,
        attempts: u32,
        message: String,
    },
    #[error("step {step_index}: adapter timed out after {attempts} attempt(s)")]
    Timeout { step_index: usize, attempts: u32 },
    #[error("step {step_index}: malformed adapter response: {message}")]
    Malformed { step_index: usize, message: String },
    #[error("step {step_index}: adapter returned {label:?}, which is not in the inventory")]
    UnknownPiece { step_index: usize, label: String },
}

pub trait Extractor: Send + Sync {
    fn name(&self) -> &str;

    /// Whether `extract_step` may run on several threads at once.
    fn concurrent(&self) -> bool {
        true
    }

    fn extract_step(&self, step_index: usize, step: &str, spec: &PatternSpec) -> Result<StepOutput, ExtractError>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RuleBased;

fn rule_based_step(step_index: usize, step: &str, spec: &PatternSpec) -> StepOutput {
    let (extraction, unknown) = extract_pieces_rule_based(step_index, step, spec);
    StepOutput {
        extraction,
        diagnostics: unknown
            .into_iter()
            .map(|u| Diagnostic {
                step_index,
                kind: DiagnosticKind::UnknownLabel,
                message: format!("({}) is not in the pattern inventory", u.text),
            })
            .collect(),
    }
}

impl Extractor for RuleBased {
    fn name(&self) -> &str {
        "rule-based"
    }

    fn extract_step(&self, step_index: usize, step: &str, spec: &PatternSpec) -> Result<StepOutput, ExtractError> {
        Ok(rule_based_step(step_index, step, spec))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Fallback {
    /// The document fails.
    #[default]
    Fail,
    /// Use the rule-based result and record a diagnostic.
    RuleBased,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdapterConfig {
    pub url: String,
    pub timeout: Duration,
    /// Extra attempts after a transport failure or timeout.
    pub retries: u32,
    pub fallback: Fallback,
    pub concurrent: bool,
}

impl AdapterConfig {
    pub fn new(url: impl Into<String>) -> Self {
        AdapterConfig {
            url: url.into(),
            timeout: Duration::from_secs(30),
            retries: 2,
            fallback: Fallback::Fail,
            concurrent: true,
        }
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    step: &'a str,
    inventory: Vec<String>,
}

#[derive(Deserialize)]
struct WireResponse {
    pieces: Vec<String>,
}

pub struct HttpAdapter {
    agent: ureq::Agent,
    config: AdapterConfig,
}

impl HttpAdapter {
    pub fn new(config: AdapterConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .build()
            .into();
        HttpAdapter { agent, config }
    }

    pub fn config(&self) -> &AdapterConfig {
        &self.config
    }

    fn request(&self, step_index: usize, step: &str, spec: &PatternSpec) -> Result<StepExtraction, ExtractError> {
        let body = WireRequest {
            step,
            inventory: spec.inventory().map(|p| p.to_string()).collect(),
        };
        let attempts = self.config.retries + 1;
        let mut last = None;
        for _ in 0..attempts {
            let sent = self
                .agent
                .post(&self.config.url)
                .send_json(&body)
                .and_then(|mut r| r.body_mut().read_to_string());
            match sent {
                Ok(text) => return parse_response(step_index, &text, spec),
                Err(e) => last = Some(e),
            }
        }
        Err(match last.expect("at least one attempt") {
            ureq::Error::Timeout(_) => ExtractError::Timeout { step_index, attempts },
            e => ExtractError::Transport {
                step_index,
                attempts,
                message: e.to_string(),
            },
        })
    }
}

fn parse_response(step_index: usize, text: &str, spec: &PatternSpec) -> Result<StepExtraction, ExtractError> {
    let resp: WireResponse = serde_json::from_str(text).map_err(|e| ExtractError::Malformed {
        step_index,
        message: e.to_string(),
    })?;
    let mut pieces = Vec::with_capacity(resp.pieces.len());
    for label in resp.pieces {
        match PieceLabel::parse(label.trim()) {
            Ok(p) if spec.contains(&p) => pieces.push(p),
            _ => return Err(ExtractError::UnknownPiece { step_index, label }),
        }
    }
    Ok(StepExtraction::new(step_index, pieces))
}

impl Extractor for HttpAdapter {
    fn name(&self) -> &str {
        "adapter"
    }

    fn concurrent(&self) -> bool {
        self.config.concurrent
    }

    fn extract_step(&self, step_index: usize, step: &str, spec: &PatternSpec) -> Result<StepOutput, ExtractError> {
        match self.request(step_index, step, spec) {
            Ok(extraction) => Ok(StepOutput {
                extraction,
                diagnostics: Vec::new(),
            }),
            Err(e) if self.config.fallback == Fallback::RuleBased => {
                let mut out = rule_based_step(step_index, step, spec);
                out.diagnostics.insert(
                    0,
                    Diagnostic {
                        step_index,
                        kind: DiagnosticKind::ExtractorFallback,
                        message: e.to_string(),
                    },
                );
                Ok(out)
            }
            Err(e) => Err(e),
        }
    }
}

/// Wraps an extractor so that one which does not tolerate concurrent calls
/// only ever sees one request at a time.
pub struct Gated<E> {
    inner: E,
    gate: Option<Mutex<()>>,
}

impl<E: Extractor> Gated<E> {
    pub fn new(inner: E) -> Self {
        let gate = (!inner.concurrent()).then(|| Mutex::new(()));
        Gated { inner, gate }
    }

    pub fn inner(&self) -> &E {
        &self.inner
    }

    pub fn extract_step(&self, step_index: usize, step: &str, spec: &PatternSpec) -> Result<StepOutput, ExtractError> {
        let _guard = self.gate.as_ref().map(|m| m.lock().unwrap_or_else(|p| p.into_inner()));
        self.inner.extract_step(step_index, step, spec)
    }

    /// All steps of `doc`, in order, with diagnostics sorted by step.
    pub fn extract_document(
        &self,
        doc: &InstructionDoc,
        spec: &PatternSpec,
    ) -> Result<(Vec<StepExtraction>, Vec<Diagnostic>), ExtractError> {
        let mut xs = Vec::with_capacity(doc.steps.len());
        let mut diags = Vec::new();
        for (i, s) in doc.steps.iter().enumerate() {
            let out = self.extract_step(i, s, spec)?;
            xs.push(out.extraction);
            diags.extend(out.diagnostics);
        }
        Ok((xs, diags))
    }
}

impl Extractor for Box<dyn Extractor> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn concurrent(&self) -> bool {
        (**self).concurrent()
    }

    fn extract_step(&self, step_index: usize, step: &str, spec: &PatternSpec) -> Result<StepOutput, ExtractError> {
        (**self).extract_step(step_index, step, spec)
    }
}
