//! BLEU-4: geometric mean of clipped 1..4-gram precisions times a brevity
//! penalty against the closest reference length.
//!
//! The smoothed variant adds one to numerator and denominator of the 2-, 3-
//! and 4-gram precisions so short sentences do not collapse to zero.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::text::{metric_tokens, ngrams};

pub const MAX_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoothing {
    None,
    AddOneHigherOrders,
}

/// Sufficient statistics; sum them over items for corpus BLEU.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BleuStats {
    pub matches: [usize; MAX_ORDER],
    pub totals: [usize; MAX_ORDER],
    pub candidate_len: usize,
    pub reference_len: usize,
}

impl std::ops::AddAssign for BleuStats {
    fn add_assign(&mut self, o: Self) {
        for n in 0..MAX_ORDER {
            self.matches[n] += o.matches[n];
            self.totals[n] += o.totals[n];
        }
        self.candidate_len += o.candidate_len;
        self.reference_len += o.reference_len;
    }
}

fn counts(tokens: &[String], n: usize) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for g in ngrams(tokens, n) {
        *m.entry(g).or_insert(0) += 1;
    }
    m
}

pub fn bleu_stats(candidate: &[String], references: &[Vec<String>]) -> BleuStats {
    let mut stats = BleuStats {
        candidate_len: candidate.len(),
        ..BleuStats::default()
    };
    // closest reference length, ties to the shorter one
    stats.reference_len = references
        .iter()
        .map(Vec::len)
        .min_by_key(|&l| (l.abs_diff(candidate.len()), l))
        .unwrap_or(0);
    for n in 1..=MAX_ORDER {
        let cand = counts(candidate, n);
        let mut max_ref: BTreeMap<&str, usize> = BTreeMap::new();
        let ref_counts: Vec<_> = references.iter().map(|r| counts(r, n)).collect();
        for rc in &ref_counts {
            for (g, &c) in rc {
                let e = max_ref.entry(g.as_str()).or_insert(0);
                *e = (*e).max(c);
            }
        }
        stats.totals[n - 1] = cand.values().sum();
        stats.matches[n - 1] = cand
            .iter()
            .map(|(g, &c)| c.min(max_ref.get(g.as_str()).copied().unwrap_or(0)))
            .sum();
    }
    stats
}

pub fn bleu_from_stats(s: &BleuStats, smoothing: Smoothing) -> f64 {
    if s.candidate_len == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 0..MAX_ORDER {
        let (m, t) = (s.matches[n] as f64, s.totals[n] as f64);
        let p = match smoothing {
            Smoothing::AddOneHigherOrders if n >= 1 => (m + 1.0) / (t + 1.0),
            _ if t == 0.0 => 0.0,
            _ => m / t,
        };
        if p == 0.0 {
            return 0.0;
        }
        log_sum += p.ln();
    }
    let (c, r) = (s.candidate_len as f64, s.reference_len as f64);
    let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    bp * (log_sum / MAX_ORDER as f64).exp()
}

fn tokenize_refs<S: AsRef<str>>(references: &[S]) -> Vec<Vec<String>> {
    references
        .iter()
        .map(|r| metric_tokens(r.as_ref()))
        .collect()
}

fn sentence(candidate: &str, references: &[impl AsRef<str>], smoothing: Smoothing) -> Result<f64> {
    let cand = metric_tokens(candidate);
    if cand.is_empty() {
        return Err(Error::Empty("BLEU candidate has no tokens".into()));
    }
    if references.is_empty() {
        return Err(Error::Empty("BLEU needs at least one reference".into()));
    }
    Ok(bleu_from_stats(
        &bleu_stats(&cand, &tokenize_refs(references)),
        smoothing,
    ))
}

/// Smoothed sentence BLEU-4 in `[0, 1]`.
pub fn bleu4(candidate: &str, references: &[impl AsRef<str>]) -> Result<f64> {
    sentence(candidate, references, Smoothing::AddOneHigherOrders)
}

pub fn bleu4_unsmoothed(candidate: &str, references: &[impl AsRef<str>]) -> Result<f64> {
    sentence(candidate, references, Smoothing::None)
}

/// Corpus BLEU-4: statistics summed over items before combining.
pub fn corpus_bleu4<S: AsRef<str>>(
    candidates: &[S],
    references: &[Vec<S>],
    smoothing: Smoothing,
) -> Result<f64> {
    if candidates.len() != references.len() {
        return Err(Error::Dimension(format!(
            "{} candidates but {} reference sets",
            candidates.len(),
            references.len()
        )));
    }
    if candidates.is_empty() {
        return Err(Error::Empty("BLEU corpus is empty".into()));
    }
    let mut total = BleuStats::default();
    for (c, refs) in candidates.iter().zip(references) {
        total += bleu_stats(&metric_tokens(c.as_ref()), &tokenize_refs(refs));
    }
    Ok(bleu_from_stats(&total, smoothing))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_match_is_one() {
        let s = "the car stops at the red light";
        assert_eq!(bleu4_unsmoothed(s, &[s]).unwrap(), 1.0);
        assert_eq!(bleu4(s, &[s]).unwrap(), 1.0);
    }

    #[test]
    fn no_overlap() {
        let c = "merge left quickly now";
        let r = ["the car stops at a red light"];
        assert_eq!(bleu4_unsmoothed(c, &r).unwrap(), 0.0);
        assert!(bleu4(c, &r).unwrap() < 0.05);
    }

    #[test]
    fn empty_candidate_is_error() {
        assert!(bleu4(" ,. ", &["a b"]).is_err());
    }

    #[test]
    fn case_and_edge_whitespace_do_not_matter() {
        let r = ["The car stops at a red light"];
        let a = bleu4("the car stops at the light", &r).unwrap();
        let b = bleu4("  THE Car stops at the light.  ", &r).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn hand_example() {
        // cand 6 tokens, ref 7 tokens.
        // 1-grams: the×2 (ref the×1 → clip 1), car, stops, at, light → 5/6
        // 2-grams: "the car","car stops","stops at" match; "at the","the light" no → 3/5
        // 3-grams: "the car stops","car stops at" → 2/4
        // 4-grams: "the car stops at" → 1/3
        let got = bleu4_unsmoothed(
            "the car stops at the light",
            &["the car stops at a red light"],
        )
        .unwrap();
        let p = [5.0 / 6.0, 3.0 / 5.0, 2.0 / 4.0, 1.0 / 3.0f64];
        let geo = (p.iter().map(|x| x.ln()).sum::<f64>() / 4.0).exp();
        let bp = (1.0f64 - 7.0 / 6.0).exp();
        assert!((got - bp * geo).abs() < 1e-12);
        let smooth = bleu4(
            "the car stops at the light",
            &["the car stops at a red light"],
        )
        .unwrap();
        let ps = [5.0 / 6.0, 4.0 / 6.0, 3.0 / 5.0, 2.0 / 4.0f64];
        let geo_s = (ps.iter().map(|x| x.ln()).sum::<f64>() / 4.0).exp();
        assert!((smooth - bp * geo_s).abs() < 1e-12);
    }

    #[test]
    fn closest_reference_length_prefers_shorter_on_tie() {
        let s = bleu_stats(
            &metric_tokens("a b c d e"),
            &[metric_tokens("a b c d e f"), metric_tokens("a b c d")],
        );
        assert_eq!(s.reference_len, 4);
    }
}
