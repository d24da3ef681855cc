//! METEOR without the synonym stage.
//!
//! Unigrams are aligned by exact match, then by Porter stem among the
//! leftovers. With `m` matches, `P = m / |cand|`, `R = m / |ref|`,
//! `F = P·R / (α·P + (1 − α)·R)` and the fragmentation penalty
//! `γ · (chunks / m)^β`; the score is `F · (1 − penalty)`, maximized over
//! references.

use crate::error::{Error, Result};
use crate::text::metric_tokens;

pub const ALPHA: f64 = 0.9;
pub const BETA: f64 = 3.0;
pub const GAMMA: f64 = 0.5;

/// `(candidate position, reference position)` pairs, by candidate position.
fn align(cand: &[String], reference: &[String]) -> Vec<(usize, usize)> {
    let mut ref_used = vec![false; reference.len()];
    let mut cand_match: Vec<Option<usize>> = vec![None; cand.len()];

    for (i, c) in cand.iter().enumerate() {
        if let Some(j) = (0..reference.len()).find(|&j| !ref_used[j] && reference[j] == *c) {
            ref_used[j] = true;
            cand_match[i] = Some(j);
        }
    }
    let ref_stems: Vec<String> = reference.iter().map(|t| porter_stemmer::stem(t)).collect();
    for (i, c) in cand.iter().enumerate() {
        if cand_match[i].is_some() {
            continue;
        }
        let stem = porter_stemmer::stem(c);
        if let Some(j) = (0..reference.len()).find(|&j| !ref_used[j] && ref_stems[j] == stem) {
            ref_used[j] = true;
            cand_match[i] = Some(j);
        }
    }
    cand_match
        .into_iter()
        .enumerate()
        .filter_map(|(i, m)| m.map(|j| (i, j)))
        .collect()
}

fn chunks(alignment: &[(usize, usize)]) -> usize {
    if alignment.is_empty() {
        return 0;
    }
    1 + alignment
        .windows(2)
        .filter(|w| !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1))
        .count()
}

pub fn meteor_tokens(cand: &[String], reference: &[String]) -> f64 {
    if cand.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let alignment = align(cand, reference);
    let m = alignment.len() as f64;
    if m == 0.0 {
        return 0.0;
    }
    let p = m / cand.len() as f64;
    let r = m / reference.len() as f64;
    let f_mean = p * r / (ALPHA * p + (1.0 - ALPHA) * r);
    let penalty = GAMMA * (chunks(&alignment) as f64 / m).powf(BETA);
    f_mean * (1.0 - penalty)
}

pub fn meteor_lite(candidate: &str, references: &[impl AsRef<str>]) -> Result<f64> {
    let cand = metric_tokens(candidate);
    if cand.is_empty() {
        return Err(Error::Empty("METEOR candidate has no tokens".into()));
    }
    if references.is_empty() {
        return Err(Error::Empty("METEOR needs at least one reference".into()));
    }
    Ok(references
        .iter()
        .map(|r| meteor_tokens(&cand, &metric_tokens(r.as_ref())))
        .fold(0.0, f64::max))
}
