use std::collections::{BTreeMap, HashMap, HashSet};

use super::{check_pairs, ngram_counts, MetricError, TokenizedPair};

const MAX_N: usize = 4;

type Vector<'a> = BTreeMap<&'a [String], f64>;

fn tfidf<'a>(tokens: &'a [String], n: usize, idf: &dyn Fn(&[String]) -> f64) -> Vector<'a> {
    ngram_counts(tokens, n)
        .into_iter()
        .map(|(g, c)| (g, c as f64 * idf(g)))
        .collect()
}

fn cosine(a: &Vector<'_>, b: &Vector<'_>) -> f64 {
    let na = a.values().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.values().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.iter().filter_map(|(k, v)| b.get(k).map(|w| v * w)).sum();
    dot / (na * nb)
}

/// CIDEr over n = 1..4 without a length penalty. A pair's reference set is
/// one document for the idf, `ln(N / (1 + df))`.
pub fn cider(pairs: &[TokenizedPair]) -> Result<f64, MetricError> {
    check_pairs(pairs)?;
    if pairs.len() < 2 {
        return Err(MetricError::CorpusTooSmall(pairs.len()));
    }
    let big_n = pairs.len() as f64;
    let mut df: Vec<HashMap<&[String], usize>> = vec![HashMap::new(); MAX_N + 1];
    for p in pairs {
        for (n, df_n) in df.iter_mut().enumerate().skip(1) {
            let grams: HashSet<&[String]> = p.references.iter().flat_map(|r| r.windows(n)).collect();
            for g in grams {
                *df_n.entry(g).or_insert(0) += 1;
            }
        }
    }
    let mut total = 0.0;
    for p in pairs {
        let mut per_n = 0.0;
        for (n, df_n) in df.iter().enumerate().skip(1) {
            let idf = |g: &[String]| (big_n / (1.0 + df_n.get(g).copied().unwrap_or(0) as f64)).ln();
            let cand = tfidf(&p.candidate, n, &idf);
            let sims: f64 = p.references.iter().map(|r| cosine(&cand, &tfidf(r, n, &idf))).sum();
            per_n += 10.0 * sims / p.references.len() as f64;
        }
        total += per_n / MAX_N as f64;
    }
    Ok(total / big_n)
}
