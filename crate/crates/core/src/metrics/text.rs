use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

/// Count substituted for a zero n-gram match count when smoothing is on.
pub const BLEU_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricConfig {
    pub bleu_max_n: usize,
    pub bleu_smoothing: bool,
    pub rouge_beta: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            bleu_max_n: 4,
            bleu_smoothing: true,
            rouge_beta: 1.0,
        }
    }
}

/// Lowercases, splits on whitespace, and splits every character that is
/// neither alphanumeric nor whitespace into its own token.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut word = String::new();
    for ch in text.chars() {
        if ch.is_whitespace() {
            if !word.is_empty() {
                out.push(core::mem::take(&mut word));
            }
        } else if ch.is_alphanumeric() {
            word.extend(ch.to_lowercase());
        } else {
            if !word.is_empty() {
                out.push(core::mem::take(&mut word));
            }
            let mut p = String::new();
            p.extend(ch.to_lowercase());
            out.push(p);
        }
    }
    if !word.is_empty() {
        out.push(word);
    }
    out
}

fn ngram_counts(tokens: &[String], n: usize) -> BTreeMap<&[String], usize> {
    let mut m = BTreeMap::new();
    if n == 0 || tokens.len() < n {
        return m;
    }
    for w in tokens.windows(n) {
        *m.entry(w).or_insert(0) += 1;
    }
    m
}

/// Clipped n-gram matches and the candidate's n-gram total.
pub fn ngram_precision(candidate: &[String], reference: &[String], n: usize) -> (usize, usize) {
    let cand = ngram_counts(candidate, n);
    let refs = ngram_counts(reference, n);
    let total = cand.values().sum();
    let matches = cand
        .iter()
        .map(|(g, c)| (*c).min(refs.get(g).copied().unwrap_or(0)))
        .sum();
    (matches, total)
}

/// Single-segment BLEU over n = 1..=`bleu_max_n` with brevity penalty.
pub fn bleu(candidate: &str, reference: &str, cfg: &MetricConfig) -> f64 {
    let cand = tokenize(candidate);
    let refs = tokenize(reference);
    if cand.is_empty() || cfg.bleu_max_n == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=cfg.bleu_max_n {
        let (matches, total) = ngram_precision(&cand, &refs, n);
        let p = if matches > 0 {
            matches as f64 / total as f64
        } else if cfg.bleu_smoothing {
            if total > 0 {
                BLEU_EPSILON / total as f64
            } else {
                BLEU_EPSILON
            }
        } else {
            return 0.0;
        };
        log_sum += libm::log(p);
    }
    let c = cand.len() as f64;
    let r = refs.len() as f64;
    let bp = if c > r { 1.0 } else { libm::exp(1.0 - r / c) };
    bp * libm::exp(log_sum / cfg.bleu_max_n as f64)
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = alloc::vec![0usize; b.len() + 1];
    let mut cur = alloc::vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Token-level ROUGE-L F-measure.
pub fn rouge_l(candidate: &str, reference: &str, cfg: &MetricConfig) -> f64 {
    let cand = tokenize(candidate);
    let refs = tokenize(reference);
    if cand.is_empty() || refs.is_empty() {
        return 0.0;
    }
    let lcs = lcs_len(&cand, &refs) as f64;
    if lcs == 0.0 {
        return 0.0;
    }
    let p = lcs / cand.len() as f64;
    let r = lcs / refs.len() as f64;
    let b2 = cfg.rouge_beta * cfg.rouge_beta;
    (1.0 + b2) * p * r / (r + b2 * p)
}
