//! METEOR with two matching stages: exact surface form, then Porter stem.
//!
//! The alignment maximizes exact matches first, then total matches, and
//! among those picks the one with the fewest chunks. The first two counts
//! follow from word and stem frequencies; the chunk minimization is a
//! bounded depth-first search.

use std::collections::HashMap;

use super::porter::stem;
use super::{check_pairs, MetricError, TokenizedPair};

/// Search nodes explored per alignment before settling for the best found.
const NODE_BUDGET: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Alignment {
    pub exact: usize,
    pub matches: usize,
    pub chunks: usize,
    /// False when the node budget ran out before the search finished.
    pub proven_minimal: bool,
}

struct Interned {
    cand_word: Vec<usize>,
    cand_stem: Vec<usize>,
    ref_word: Vec<usize>,
    ref_stem: Vec<usize>,
    n_words: usize,
    n_stems: usize,
}

fn intern(cand: &[String], reference: &[String]) -> Interned {
    let mut words: HashMap<String, usize> = HashMap::new();
    let mut stems: HashMap<String, usize> = HashMap::new();
    let mut word_id = |w: &str| -> usize {
        let n = words.len();
        *words.entry(w.to_string()).or_insert(n)
    };
    let cand_word: Vec<usize> = cand.iter().map(|w| word_id(w)).collect();
    let ref_word: Vec<usize> = reference.iter().map(|w| word_id(w)).collect();
    let mut stem_id = |w: &str| -> usize {
        let n = stems.len();
        *stems.entry(stem(w)).or_insert(n)
    };
    let cand_stem: Vec<usize> = cand.iter().map(|w| stem_id(w)).collect();
    let ref_stem: Vec<usize> = reference.iter().map(|w| stem_id(w)).collect();
    Interned {
        cand_word,
        cand_stem,
        ref_word,
        ref_stem,
        n_words: words.len(),
        n_stems: stems.len(),
    }
}

fn min_overlap(a: &[usize], b: &[usize]) -> usize {
    a.iter().zip(b).map(|(x, y)| *x.min(y)).sum()
}

struct Search<'a> {
    t: &'a Interned,
    target_exact: usize,
    target_total: usize,
    rem_c_word: Vec<usize>,
    rem_c_stem: Vec<usize>,
    free_r_word: Vec<usize>,
    free_r_stem: Vec<usize>,
    used: Vec<bool>,
    best: Option<usize>,
    nodes: usize,
}

impl Search<'_> {
    fn feasible(&self, exact: usize, total: usize) -> bool {
        exact + min_overlap(&self.rem_c_word, &self.free_r_word) >= self.target_exact
            && total + min_overlap(&self.rem_c_stem, &self.free_r_stem) >= self.target_total
    }

    fn take(&mut self, j: usize, on: bool) {
        self.used[j] = on;
        let (w, s) = (self.t.ref_word[j], self.t.ref_stem[j]);
        if on {
            self.free_r_word[w] -= 1;
            self.free_r_stem[s] -= 1;
        } else {
            self.free_r_word[w] += 1;
            self.free_r_stem[s] += 1;
        }
    }

    fn dfs(&mut self, i: usize, prev: Option<usize>, exact: usize, total: usize, chunks: usize) {
        if self.nodes >= NODE_BUDGET {
            return;
        }
        self.nodes += 1;
        if self.best.is_some_and(|b| chunks >= b) {
            return;
        }
        if i == self.t.cand_word.len() {
            if exact == self.target_exact && total == self.target_total {
                self.best = Some(chunks);
            }
            return;
        }
        let (w, s) = (self.t.cand_word[i], self.t.cand_stem[i]);
        self.rem_c_word[w] -= 1;
        self.rem_c_stem[s] -= 1;

        // continuation first, then exact matches, then stem-only matches
        let m = self.t.ref_word.len();
        let mut order: Vec<usize> = Vec::new();
        if let Some(p) = prev {
            if p + 1 < m && !self.used[p + 1] && self.t.ref_stem[p + 1] == s {
                order.push(p + 1);
            }
        }
        for j in 0..m {
            if !self.used[j] && self.t.ref_word[j] == w && !order.contains(&j) {
                order.push(j);
            }
        }
        for j in 0..m {
            if !self.used[j] && self.t.ref_word[j] != w && self.t.ref_stem[j] == s && !order.contains(&j) {
                order.push(j);
            }
        }
        for j in order {
            let is_exact = self.t.ref_word[j] == w;
            let (e, tot) = (exact + usize::from(is_exact), total + 1);
            let ch = if prev.is_some_and(|p| p + 1 == j) {
                chunks
            } else {
                chunks + 1
            };
            self.take(j, true);
            if self.feasible(e, tot) {
                self.dfs(i + 1, Some(j), e, tot, ch);
            }
            self.take(j, false);
        }
        if self.feasible(exact, total) {
            self.dfs(i + 1, None, exact, total, chunks);
        }

        self.rem_c_word[w] += 1;
        self.rem_c_stem[s] += 1;
    }
}

pub fn align(cand: &[String], reference: &[String]) -> Alignment {
    let t = intern(cand, reference);
    let count = |ids: &[usize], n: usize| {
        let mut v = vec![0usize; n];
        for &i in ids {
            v[i] += 1;
        }
        v
    };
    let c_word = count(&t.cand_word, t.n_words);
    let c_stem = count(&t.cand_stem, t.n_stems);
    let r_word = count(&t.ref_word, t.n_words);
    let r_stem = count(&t.ref_stem, t.n_stems);
    let target_exact = min_overlap(&c_word, &r_word);
    let target_total = min_overlap(&c_stem, &r_stem);
    if target_total == 0 {
        return Alignment {
            exact: 0,
            matches: 0,
            chunks: 0,
            proven_minimal: true,
        };
    }
    let mut search = Search {
        t: &t,
        target_exact,
        target_total,
        rem_c_word: c_word,
        rem_c_stem: c_stem,
        free_r_word: r_word,
        free_r_stem: r_stem,
        used: vec![false; reference.len()],
        best: None,
        nodes: 0,
    };
    search.dfs(0, None, 0, 0, 0);
    let chunks = search.best.expect("a maximal alignment always exists");
    Alignment {
        exact: target_exact,
        matches: target_total,
        chunks,
        proven_minimal: search.nodes < NODE_BUDGET,
    }
}

/// Score of one candidate against one reference.
pub fn meteor_pair(cand: &[String], reference: &[String]) -> f64 {
    if cand.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let a = align(cand, reference);
    if a.matches == 0 {
        return 0.0;
    }
    let m = a.matches as f64;
    let p = m / cand.len() as f64;
    let r = m / reference.len() as f64;
    let f_mean = 10.0 * p * r / (r + 9.0 * p);
    let penalty = 0.5 * (a.chunks as f64 / m).powi(3);
    f_mean * (1.0 - penalty)
}

/// Mean over pairs of the best score against any reference.
pub fn meteor(pairs: &[TokenizedPair]) -> Result<f64, MetricError> {
    check_pairs(pairs)?;
    let total: f64 = pairs
        .iter()
        .map(|p| {
            p.references
                .iter()
                .map(|r| meteor_pair(&p.candidate, r))
                .fold(0.0, f64::max)
        })
        .sum();
    Ok(total / pairs.len() as f64)
}
