use std::collections::HashMap;

use super::{check_pairs, ngram_counts, MetricError, TokenizedPair};

/// Reference length closest to `c`; ties go to the shorter reference.
fn closest_ref_len(c: usize, refs: &[Vec<String>]) -> usize {
    refs.iter()
        .map(Vec::len)
        .min_by_key(|&r| (r.abs_diff(c), r))
        .unwrap_or(0)
}

/// Clipped n-gram matches and candidate n-gram total for one pair.
fn clipped(pair: &TokenizedPair, n: usize) -> (usize, usize) {
    let cand = ngram_counts(&pair.candidate, n);
    let mut max_ref: HashMap<&[String], usize> = HashMap::new();
    for r in &pair.references {
        for (g, c) in ngram_counts(r, n) {
            let slot = max_ref.entry(g).or_insert(0);
            *slot = (*slot).max(c);
        }
    }
    let total = cand.values().sum();
    let matched = cand
        .iter()
        .map(|(g, &c)| c.min(max_ref.get(g).copied().unwrap_or(0)))
        .sum();
    (matched, total)
}

/// Corpus BLEU up to order `max_n`, unsmoothed: a zero precision at any
/// order gives 0.
pub fn bleu(pairs: &[TokenizedPair], max_n: usize) -> Result<f64, MetricError> {
    if !(1..=4).contains(&max_n) {
        return Err(MetricError::BadOrder(max_n));
    }
    check_pairs(pairs)?;
    let c: usize = pairs.iter().map(|p| p.candidate.len()).sum();
    if c == 0 {
        return Ok(0.0);
    }
    let r: usize = pairs
        .iter()
        .map(|p| closest_ref_len(p.candidate.len(), &p.references))
        .sum();
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let (m, t) = pairs
            .iter()
            .map(|p| clipped(p, n))
            .fold((0, 0), |acc, x| (acc.0 + x.0, acc.1 + x.1));
        if m == 0 || t == 0 {
            return Ok(0.0);
        }
        log_sum += (m as f64 / t as f64).ln();
    }
    let bp = (1.0 - r as f64 / c as f64).min(0.0).exp();
    Ok(bp * (log_sum / max_n as f64).exp())
}
