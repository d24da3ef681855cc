//! Independent reference implementations used by the integration tests.
//! They favour plain loops and linear scans over the library's maps.

#![allow(dead_code)]

use rand::seq::IndexedRandom;
use rand::Rng;

use raicl::store::ScenarioRecord;

pub fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(|w| w.to_lowercase()).collect()
}

fn grams(t: &[String], n: usize) -> Vec<&[String]> {
    if t.len() < n {
        return vec![];
    }
    (0..=t.len() - n).map(|i| &t[i..i + n]).collect()
}

fn occurrences(hay: &[&[String]], g: &[String]) -> usize {
    hay.iter().filter(|h| **h == g).count()
}

/// `(matches, totals, cand_len, closest_ref_len)` by linear scanning.
pub fn bleu_counts(cand: &[String], refs: &[Vec<String>]) -> ([f64; 4], [f64; 4], f64, f64) {
    let mut m = [0.0; 4];
    let mut t = [0.0; 4];
    for n in 1..=4 {
        let cg = grams(cand, n);
        t[n - 1] = cg.len() as f64;
        let mut seen: Vec<&[String]> = vec![];
        for g in &cg {
            if seen.contains(g) {
                continue;
            }
            seen.push(g);
            let c = occurrences(&cg, g);
            let best_ref = refs
                .iter()
                .map(|r| occurrences(&grams(r, n), g))
                .max()
                .unwrap_or(0);
            m[n - 1] += c.min(best_ref) as f64;
        }
    }
    let mut best_len = refs[0].len();
    for r in refs {
        let d = (r.len() as i64 - cand.len() as i64).abs();
        let bd = (best_len as i64 - cand.len() as i64).abs();
        if d < bd || (d == bd && r.len() < best_len) {
            best_len = r.len();
        }
    }
    (m, t, cand.len() as f64, best_len as f64)
}

pub fn bleu_combine(m: [f64; 4], t: [f64; 4], c: f64, r: f64, smooth: bool) -> f64 {
    let mut prod = 1.0;
    for n in 0..4 {
        let p = if smooth && n > 0 {
            (m[n] + 1.0) / (t[n] + 1.0)
        } else if t[n] == 0.0 {
            0.0
        } else {
            m[n] / t[n]
        };
        prod *= p;
    }
    if prod == 0.0 {
        return 0.0;
    }
    let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    bp * prod.powf(0.25)
}

pub fn corpus_bleu_oracle(cands: &[String], refs: &[Vec<String>], smooth: bool) -> f64 {
    let (mut m, mut t, mut c, mut r) = ([0.0; 4], [0.0; 4], 0.0, 0.0);
    for (cand, rs) in cands.iter().zip(refs) {
        let rs: Vec<Vec<String>> = rs.iter().map(|x| toks(x)).collect();
        let (mi, ti, ci, ri) = bleu_counts(&toks(cand), &rs);
        for n in 0..4 {
            m[n] += mi[n];
            t[n] += ti[n];
        }
        c += ci;
        r += ri;
    }
    bleu_combine(m, t, c, r, smooth)
}

pub fn cider_oracle(cands: &[String], refs: &[Vec<String>]) -> f64 {
    let n_items = cands.len() as f64;
    let ref_toks: Vec<Vec<Vec<String>>> = refs
        .iter()
        .map(|rs| rs.iter().map(|r| toks(r)).collect())
        .collect();
    let df = |g: &[String], n: usize| -> f64 {
        ref_toks
            .iter()
            .filter(|rs| rs.iter().any(|r| grams(r, n).contains(&g)))
            .count() as f64
    };
    let vector = |t: &[String], n: usize| -> Vec<(Vec<String>, f64)> {
        let gs = grams(t, n);
        let mut v: Vec<(Vec<String>, f64)> = vec![];
        for g in &gs {
            if v.iter().any(|(h, _)| h.as_slice() == *g) {
                continue;
            }
            let tf = occurrences(&gs, g) as f64;
            let idf = (n_items / df(g, n).max(1.0)).ln();
            v.push((g.to_vec(), tf * idf));
        }
        v
    };
    let cos = |a: &[(Vec<String>, f64)], b: &[(Vec<String>, f64)]| -> f64 {
        let na: f64 = a.iter().map(|x| x.1 * x.1).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x.1 * x.1).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            return 0.0;
        }
        let mut d = 0.0;
        for (g, w) in a {
            for (h, u) in b {
                if g == h {
                    d += w * u;
                }
            }
        }
        d / (na * nb)
    };
    let mut total = 0.0;
    for (cand, rs) in cands.iter().zip(&ref_toks) {
        let ct = toks(cand);
        let mut item = 0.0;
        for n in 1..=4 {
            let cv = vector(&ct, n);
            let s: f64 = rs.iter().map(|r| cos(&cv, &vector(r, n))).sum();
            item += s / rs.len() as f64;
        }
        total += 10.0 * item / 4.0;
    }
    total / n_items
}

const VOCAB: [&str; 7] = ["car", "stops", "the", "turns", "left", "light", "red"];

pub fn random_sentence(rng: &mut impl Rng) -> String {
    let len = rng.random_range(1..=9);
    (0..len)
        .map(|_| *VOCAB.choose(rng).unwrap())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Candidates and reference sets; some candidates copy a reference.
pub fn random_corpus(rng: &mut impl Rng) -> (Vec<String>, Vec<Vec<String>>) {
    let items = rng.random_range(2..=6);
    let mut cands = vec![];
    let mut refs = vec![];
    for _ in 0..items {
        let rs: Vec<String> = (0..rng.random_range(1..=3))
            .map(|_| random_sentence(rng))
            .collect();
        let cand = if rng.random_bool(0.25) {
            rs[0].clone()
        } else {
            random_sentence(rng)
        };
        cands.push(cand);
        refs.push(rs);
    }
    (cands, refs)
}

/// Error function by its Maclaurin series (|x| small) or continued fraction.
pub fn erf_series(x: f64) -> f64 {
    if x.abs() > 2.0 {
        return x.signum() * (1.0 - erfc_cf(x.abs()));
    }
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= -x * x / n;
        let add = term / (2.0 * n + 1.0);
        sum += add;
        if add.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    2.0 / std::f64::consts::PI.sqrt() * sum
}

fn erfc_cf(x: f64) -> f64 {
    // Lentz evaluation of erfc(x) = exp(-x²)/√π · 1/(x + 1/2/(x + 1/(x + 3/2/(x + ...))))
    let mut f = x;
    let tiny = 1e-300;
    let (mut c, mut d) = (f, 0.0);
    for k in 1..2000 {
        let a = k as f64 / 2.0;
        d = x + a * d;
        d = if d.abs() < tiny { tiny } else { d };
        c = x + a / c;
        c = if c.abs() < tiny { tiny } else { c };
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() / std::f64::consts::PI.sqrt() / f
}

pub fn gelu_oracle(x: f64) -> f64 {
    0.5 * x * (1.0 + erf_series(x / std::f64::consts::SQRT_2))
}

pub fn record(id: &str, video: Vec<f64>, control: Vec<f64>) -> ScenarioRecord {
    ScenarioRecord {
        id: id.into(),
        video_emb: video,
        control_vec: control,
        action_text: "car moves".into(),
        justification_text: "road is open".into(),
        target_speed: 0.0,
        target_course: 0.0,
    }
}

/// Random store rows, with some duplicates to force score ties.
pub fn random_records(rng: &mut impl Rng, n: usize, v: usize, c: usize) -> Vec<ScenarioRecord> {
    let mut out: Vec<ScenarioRecord> = Vec::with_capacity(n);
    for i in 0..n {
        if i > 0 && rng.random_bool(0.1) {
            let j = rng.random_range(0..i);
            let mut r = out[j].clone();
            r.id = format!("r{i:03}");
            out.push(r);
            continue;
        }
        let video = (0..v).map(|_| rng.random_range(-1.0..1.0)).collect();
        let control = (0..c).map(|_| rng.random_range(-1.0..1.0)).collect();
        out.push(record(&format!("r{i:03}"), video, control));
    }
    out
}

/// Dense `n × n` score matrix `(K^T Q)` and column softmax, entry by entry.
pub fn attention_oracle(
    wq: &[Vec<f64>],
    wk: &[Vec<f64>],
    wv: &[Vec<f64>],
    z: &[Vec<f64>], // token-major: z[t][i]
    softmax: bool,
) -> Vec<Vec<f64>> {
    let proj = |w: &[Vec<f64>], x: &[f64]| -> Vec<f64> {
        w.iter()
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    };
    let q: Vec<Vec<f64>> = z.iter().map(|t| proj(wq, t)).collect();
    let k: Vec<Vec<f64>> = z.iter().map(|t| proj(wk, t)).collect();
    let v: Vec<Vec<f64>> = z.iter().map(|t| proj(wv, t)).collect();
    let n = z.len();
    let d_in = z[0].len() as f64;
    let d_out = wq.len();
    let mut out = vec![vec![0.0; n]; d_out]; // d_out × n
    for j in 0..n {
        let mut w: Vec<f64> = (0..n)
            .map(|i| k[i].iter().zip(&q[j]).map(|(a, b)| a * b).sum())
            .collect();
        if softmax {
            let scaled: Vec<f64> = w.iter().map(|s| s / d_in.sqrt()).collect();
            let m = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = scaled.iter().map(|s| (s - m).exp()).collect();
            let tot: f64 = e.iter().sum();
            w = e.iter().map(|x| x / tot).collect();
        }
        for r in 0..d_out {
            out[r][j] = (0..n).map(|i| v[i][r] * w[i]).sum();
        }
    }
    out
}

/// Dense TF-IDF cosine between documents `i` and `j` of `texts`.
pub fn dense_tfidf_similarity(texts: &[String], i: usize, j: usize) -> f64 {
    let tok = |s: &str| -> Vec<String> {
        s.to_lowercase()
            .split(|c: char| !c.is_alphanumeric())
            .filter(|w| !w.is_empty())
            .map(String::from)
            .collect()
    };
    let docs: Vec<Vec<String>> = texts.iter().map(|t| tok(t)).collect();
    let mut vocab: Vec<String> = docs.iter().flatten().cloned().collect();
    vocab.sort();
    vocab.dedup();
    let n = docs.len() as f64;
    let vec_of = |d: &[String]| -> Vec<f64> {
        let v: Vec<f64> = vocab
            .iter()
            .map(|w| {
                let tf = d.iter().filter(|x| *x == w).count() as f64 / d.len().max(1) as f64;
                let df = docs.iter().filter(|doc| doc.contains(w)).count() as f64;
                tf * (((1.0 + n) / (1.0 + df)).ln() + 1.0)
            })
            .collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            v
        } else {
            v.iter().map(|x| x / norm).collect()
        }
    };
    let (a, b) = (vec_of(&docs[i]), vec_of(&docs[j]));
    a.iter().zip(&b).map(|(x, y)| x * y).sum()
}
