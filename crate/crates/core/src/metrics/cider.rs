//! CIDEr (base variant, no Gaussian length penalty or clipping).
//!
//! For each order `n = 1..4`, candidates and references become TF-IDF
//! vectors over n-grams with `idf(g) = ln(N / max(1, df(g)))`, where `df`
//! counts the items whose reference set contains `g`. The per-item score is
//! the cosine averaged over references and orders, times 10.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::text::{metric_tokens, ngrams};

pub const MAX_ORDER: usize = 4;
pub const SCALE: f64 = 10.0;

type Counts = BTreeMap<String, f64>;

fn counts(tokens: &[String], n: usize) -> Counts {
    let mut m = Counts::new();
    for g in ngrams(tokens, n) {
        *m.entry(g).or_insert(0.0) += 1.0;
    }
    m
}

#[derive(Debug, Clone, PartialEq)]
pub struct CiderScores {
    /// Mean of `per_item`.
    pub corpus: f64,
    pub per_item: Vec<f64>,
}

/// Corpus IDF tables, built once from the reference sets.
#[derive(Debug, Clone)]
pub struct CiderIdf {
    log_n: f64,
    df: [BTreeMap<String, usize>; MAX_ORDER],
}

impl CiderIdf {
    pub fn new(references: &[Vec<Vec<String>>]) -> Self {
        let mut df: [BTreeMap<String, usize>; MAX_ORDER] = Default::default();
        for refs in references {
            for n in 1..=MAX_ORDER {
                let seen: BTreeSet<String> = refs.iter().flat_map(|r| ngrams(r, n)).collect();
                for g in seen {
                    *df[n - 1].entry(g).or_insert(0) += 1;
                }
            }
        }
        Self {
            log_n: (references.len() as f64).ln(),
            df,
        }
    }

    pub fn idf(&self, n: usize, g: &str) -> f64 {
        let df = self.df[n - 1].get(g).copied().unwrap_or(0).max(1) as f64;
        self.log_n - df.ln()
    }

    fn vector(&self, tokens: &[String], n: usize) -> Counts {
        let mut v = counts(tokens, n);
        for (g, w) in v.iter_mut() {
            *w *= self.idf(n, g);
        }
        v
    }

    pub fn score_item(&self, candidate: &[String], references: &[Vec<String>]) -> f64 {
        if references.is_empty() {
            return 0.0;
        }
        let mut total = 0.0;
        for n in 1..=MAX_ORDER {
            let c = self.vector(candidate, n);
            let sum: f64 = references
                .iter()
                .map(|r| cosine(&c, &self.vector(r, n)))
                .sum();
            total += sum / references.len() as f64;
        }
        SCALE * total / MAX_ORDER as f64
    }
}

fn cosine(a: &Counts, b: &Counts) -> f64 {
    let na = a.values().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.values().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.iter().filter_map(|(g, v)| b.get(g).map(|w| v * w)).sum();
    dot / (na * nb)
}

pub fn cider<S: AsRef<str>>(candidates: &[S], references: &[Vec<S>]) -> Result<CiderScores> {
    if candidates.len() != references.len() {
        return Err(Error::Dimension(format!(
            "{} candidates but {} reference sets",
            candidates.len(),
            references.len()
        )));
    }
    if candidates.is_empty() {
        return Err(Error::Empty("CIDEr corpus is empty".into()));
    }
    let refs: Vec<Vec<Vec<String>>> = references
        .iter()
        .map(|rs| rs.iter().map(|r| metric_tokens(r.as_ref())).collect())
        .collect();
    let idf = CiderIdf::new(&refs);
    let per_item: Vec<f64> = candidates
        .iter()
        .zip(&refs)
        .map(|(c, rs)| idf.score_item(&metric_tokens(c.as_ref()), rs))
        .collect();
    let corpus = per_item.iter().sum::<f64>() / per_item.len() as f64;
    Ok(CiderScores { corpus, per_item })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_copies_of_distinct_references_score_ten() {
        let refs = vec![
            vec!["the car slows down for traffic"],
            vec!["vehicle turns right at the junction"],
            vec!["ego car accelerates onto an empty highway"],
        ];
        let cands: Vec<&str> = refs.iter().map(|r| r[0]).collect();
        let s = cider(&cands, &refs).unwrap();
        // "the" is shared by two items, still with positive idf (ln 3/2)
        for v in &s.per_item {
            assert!((v - 10.0).abs() < 1e-12, "{v}");
        }
        assert!((s.corpus - 10.0).abs() < 1e-12);
    }

    #[test]
    fn zero_overlap_is_zero() {
        let refs = vec![vec!["a b c d"], vec!["e f g h"]];
        let s = cider(&["w x y z", "p q r s"], &refs).unwrap();
        assert_eq!(s.corpus, 0.0);
    }

    #[test]
    fn empty_corpus_is_error() {
        let empty: Vec<Vec<&str>> = vec![];
        assert!(cider::<&str>(&[], &empty).is_err());
    }

    #[test]
    fn idf_counts_items_not_references() {
        let refs = vec![
            vec![metric_tokens("stop now"), metric_tokens("stop here")],
            vec![metric_tokens("go now")],
        ];
        let idf = CiderIdf::new(&refs);
        assert!((idf.idf(1, "stop") - (2.0f64).ln()).abs() < 1e-15);
        assert_eq!(idf.idf(1, "now"), 0.0);
        assert!((idf.idf(1, "unseen") - (2.0f64).ln()).abs() < 1e-15);
    }
}
