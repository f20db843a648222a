//! Text-generation metrics for plan evaluation: corpus BLEU-1..4, ROUGE-L,
//! METEOR restricted to exact and stem matching, and CIDEr.
//!
//! Every scorer takes tokenized pairs and is a pure function; corpus means
//! are summed in pair order.

mod bleu;
mod cider;
mod meteor;
pub mod porter;
mod rouge;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bleu::bleu;
pub use cider::cider;
pub use meteor::{align, meteor, meteor_pair, Alignment};
pub use rouge::{lcs_len, rouge_l, ROUGE_BETA};

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("no pairs to score")]
    EmptyCorpus,
    #[error("pair {0} has no references")]
    NoReferences(usize),
    #[error("BLEU order must be in 1..=4, got {0}")]
    BadOrder(usize),
    #[error("CIDEr needs at least 2 pairs, got {0}")]
    CorpusTooSmall(usize),
}

/// Lowercases, drops every character outside `[a-z0-9]` and whitespace,
/// then splits on whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    let cleaned: String = text
        .to_lowercase()
        .chars()
        .filter(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c.is_whitespace())
        .collect();
    cleaned.split_whitespace().map(str::to_string).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenizedPair {
    pub candidate: Vec<String>,
    pub references: Vec<Vec<String>>,
}

impl TokenizedPair {
    pub fn from_texts(candidate: &str, references: &[&str]) -> Self {
        TokenizedPair {
            candidate: tokenize(candidate),
            references: references.iter().map(|r| tokenize(r)).collect(),
        }
    }
}

pub(crate) fn check_pairs(pairs: &[TokenizedPair]) -> Result<(), MetricError> {
    if pairs.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    match pairs.iter().position(|p| p.references.is_empty()) {
        Some(i) => Err(MetricError::NoReferences(i)),
        None => Ok(()),
    }
}

pub(crate) fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricMetadata {
    pub bleu: String,
    pub rouge_l_beta: f64,
    pub meteor: String,
    pub cider: String,
    pub tokenizer: String,
}

impl Default for MetricMetadata {
    fn default() -> Self {
        MetricMetadata {
            bleu: "corpus BLEU, no smoothing".into(),
            rouge_l_beta: ROUGE_BETA,
            meteor: "METEOR-es (exact + Porter stem stages)".into(),
            cider: "CIDEr, idf = ln(N / (1 + df)), no length penalty".into(),
            tokenizer: "lowercase, [a-z0-9] only, whitespace split".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// BLEU-1 through BLEU-4.
    pub bleu: [f64; 4],
    pub rouge_l: f64,
    pub meteor: f64,
    /// `None` when the corpus has a single pair.
    pub cider: Option<f64>,
    pub pair_count: usize,
    pub metadata: MetricMetadata,
}

/// Scores a corpus with all four metric families.
pub fn evaluate(pairs: &[TokenizedPair]) -> Result<MetricReport, MetricError> {
    check_pairs(pairs)?;
    let mut b = [0.0; 4];
    for (n, slot) in b.iter_mut().enumerate() {
        *slot = bleu(pairs, n + 1)?;
    }
    let cider = match cider(pairs) {
        Ok(v) => Some(v),
        Err(MetricError::CorpusTooSmall(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(MetricReport {
        bleu: b,
        rouge_l: rouge_l(pairs)?,
        meteor: meteor(pairs)?,
        cider,
        pair_count: pairs.len(),
        metadata: MetricMetadata::default(),
    })
}
