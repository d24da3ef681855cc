//! TF-IDF caption similarity and triplet mining.
//!
//! Each record's caption (`action + " " + justification`) becomes an
//! L2-normalized TF-IDF vector with
//! `tf(t, d) = count(t, d) / |d|` and `idf(t) = ln((1 + N) / (1 + df(t))) + 1`.
//! Triplets pair an anchor with a caption-similar positive and a
//! caption-dissimilar negative; the projector is then trained to mirror that
//! structure in embedding space.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsio;
use crate::store::MemoryStore;
use crate::text::mining_tokens;

#[derive(Debug, Clone, PartialEq)]
pub struct TfIdfModel {
    /// Token to column index; columns follow lexicographic token order.
    pub vocabulary: BTreeMap<String, usize>,
    pub idf: Vec<f64>,
    /// One sparse `(column, weight)` row per record, sorted by column.
    pub doc_vectors: Vec<Vec<(usize, f64)>>,
}

impl TfIdfModel {
    pub fn from_texts<S: AsRef<str>>(texts: &[S]) -> Result<Self> {
        if texts.is_empty() {
            return Err(Error::Empty("TF-IDF needs at least one document".into()));
        }
        let docs: Vec<Vec<String>> = texts.iter().map(|t| mining_tokens(t.as_ref())).collect();

        let mut df: BTreeMap<&str, usize> = BTreeMap::new();
        for doc in &docs {
            let mut seen: Vec<&str> = doc.iter().map(String::as_str).collect();
            seen.sort_unstable();
            seen.dedup();
            for t in seen {
                *df.entry(t).or_insert(0) += 1;
            }
        }

        let n = docs.len() as f64;
        let vocabulary: BTreeMap<String, usize> = df
            .keys()
            .enumerate()
            .map(|(i, t)| (t.to_string(), i))
            .collect();
        let idf: Vec<f64> = df
            .values()
            .map(|&d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0)
            .collect();

        let doc_vectors = docs
            .iter()
            .map(|doc| {
                let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
                for t in doc {
                    *counts.entry(vocabulary[t]).or_insert(0) += 1;
                }
                let total = doc.len() as f64;
                let mut row: Vec<(usize, f64)> = counts
                    .into_iter()
                    .map(|(col, c)| (col, c as f64 / total * idf[col]))
                    .collect();
                let norm = row.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
                if norm > 0.0 {
                    for (_, w) in &mut row {
                        *w /= norm;
                    }
                }
                row
            })
            .collect();

        Ok(Self {
            vocabulary,
            idf,
            doc_vectors,
        })
    }

    pub fn idf_of(&self, token: &str) -> Option<f64> {
        self.vocabulary.get(token).map(|&i| self.idf[i])
    }

    pub fn len(&self) -> usize {
        self.doc_vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_vectors.is_empty()
    }

    /// Cosine similarity of documents `i` and `j`; rows are unit-norm, so
    /// this is a sparse dot product. Empty documents score 0 against
    /// everything.
    pub fn similarity(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (&self.doc_vectors[i], &self.doc_vectors[j]);
        let (mut x, mut y, mut dot) = (0, 0, 0.0);
        while x < a.len() && y < b.len() {
            match a[x].0.cmp(&b[y].0) {
                std::cmp::Ordering::Less => x += 1,
                std::cmp::Ordering::Greater => y += 1,
                std::cmp::Ordering::Equal => {
                    dot += a[x].1 * b[y].1;
                    x += 1;
                    y += 1;
                }
            }
        }
        dot.clamp(0.0, 1.0)
    }
}

/// TF-IDF over each record's `action + " " + justification`.
pub fn build_tfidf(store: &MemoryStore) -> Result<TfIdfModel> {
    if store.is_empty() {
        return Err(Error::Empty(
            "cannot build TF-IDF over an empty store".into(),
        ));
    }
    let texts: Vec<String> = store.iter().map(|r| r.caption()).collect();
    TfIdfModel::from_texts(&texts)
}

pub fn text_similarity(m: &TfIdfModel, i: usize, j: usize) -> f64 {
    m.similarity(i, j)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triplet {
    pub anchor: String,
    pub positive: String,
    pub negative: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TripletBatch {
    pub triples: Vec<Triplet>,
    /// Anchors that had no qualifying positive or no qualifying negative.
    pub skipped_anchors: usize,
}

impl TripletBatch {
    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// One JSON array `["anchor","positive","negative"]` per line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for t in &self.triples {
            let line = serde_json::to_string(&[&t.anchor, &t.positive, &t.negative])
                .expect("strings serialize");
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut triples = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let [anchor, positive, negative]: [String; 3] =
                serde_json::from_str(line).map_err(|e| Error::Parse {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            triples.push(Triplet {
                anchor,
                positive,
                negative,
            });
        }
        Ok(Self {
            triples,
            skipped_anchors: 0,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fsio::write_atomic(path, self.render().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fsio::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinerConfig {
    pub per_anchor: usize,
    pub pos_thresh: f64,
    pub neg_thresh: f64,
    pub seed: u64,
}

impl Default for MinerConfig {
    fn default() -> Self {
        Self {
            per_anchor: 4,
            pos_thresh: 0.6,
            neg_thresh: 0.2,
            seed: 7,
        }
    }
}

impl MinerConfig {
    // negated so NaN thresholds are rejected
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if !(self.pos_thresh > self.neg_thresh) {
            return Err(Error::Config(format!(
                "pos_thresh ({}) must exceed neg_thresh ({})",
                self.pos_thresh, self.neg_thresh
            )));
        }
        if self.per_anchor == 0 {
            return Err(Error::Config("per_anchor must be at least 1".into()));
        }
        Ok(())
    }
}

/// Samples `per_anchor` triples for every anchor, drawing positives from
/// records with similarity `>= pos_thresh` and negatives from records with
/// similarity `<= neg_thresh`, uniformly with replacement.
pub fn mine_triplets(
    store: &MemoryStore,
    m: &TfIdfModel,
    cfg: &MinerConfig,
) -> Result<TripletBatch> {
    cfg.validate()?;
    if store.len() < 3 {
        return Err(Error::Empty(format!(
            "triplet mining needs at least 3 records, store has {}",
            store.len()
        )));
    }
    if m.len() != store.len() {
        return Err(Error::Dimension(format!(
            "TF-IDF model covers {} documents, store has {}",
            m.len(),
            store.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut batch = TripletBatch::default();
    let n = store.len();
    for a in 0..n {
        let mut positives = Vec::new();
        let mut negatives = Vec::new();
        for j in (0..n).filter(|&j| j != a) {
            let s = m.similarity(a, j);
            if s >= cfg.pos_thresh {
                positives.push(j);
            } else if s <= cfg.neg_thresh {
                negatives.push(j);
            }
        }
        if positives.is_empty() || negatives.is_empty() {
            batch.skipped_anchors += 1;
            continue;
        }
        for _ in 0..cfg.per_anchor {
            let p = positives[rng.random_range(0..positives.len())];
            let q = negatives[rng.random_range(0..negatives.len())];
            batch.triples.push(Triplet {
                anchor: store.records()[a].id.clone(),
                positive: store.records()[p].id.clone(),
                negative: store.records()[q].id.clone(),
            });
        }
    }
    if batch.triples.is_empty() {
        return Err(Error::NoTriplets {
            skipped: batch.skipped_anchors,
        });
    }
    Ok(batch)
}
