//! Exact cosine top-k retrieval over hybrid or video-only embeddings.
//!
//! The index is a dense matrix of unit rows scanned linearly; ties are
//! broken by insertion order so results are fully deterministic.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsio;
use crate::projector::{l2_norm, project, MlpParams};
use crate::store::{MemoryStore, ScenarioRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RetrievalMode {
    /// Projected `[video ‖ control]` embedding.
    Hybrid,
    /// Normalized raw video embedding.
    Visual,
}

impl fmt::Display for RetrievalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RetrievalMode::Hybrid => "hybrid",
            RetrievalMode::Visual => "visual",
        })
    }
}

impl FromStr for RetrievalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hybrid" => Ok(RetrievalMode::Hybrid),
            "visual" => Ok(RetrievalMode::Visual),
            other => Err(Error::Config(format!("unknown retrieval mode {other:?}"))),
        }
    }
}

/// `a · b / (‖a‖ ‖b‖)`.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Dimension(format!(
            "cosine needs equal nonzero lengths, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (l2_norm(a), l2_norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Dimension("cosine of a zero-norm vector".into()));
    }
    Ok(dot(a, b) / (na * nb))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex {
    pub mode: RetrievalMode,
    pub ids: Vec<String>,
    /// One unit-norm row per record.
    pub rows: Vec<Vec<f64>>,
    embedder: Option<MlpParams>,
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    format: String,
    mode: RetrievalMode,
    ids: Vec<String>,
    rows: Vec<Vec<f64>>,
}

const INDEX_FORMAT: &str = "raicl-index v1";

impl VectorIndex {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Embeds `r` the same way the stored rows were embedded.
    pub fn embed(&self, r: &ScenarioRecord) -> Result<Vec<f64>> {
        embed_record(r, self.mode, self.embedder.as_ref())
    }

    pub fn render(&self) -> String {
        let file = IndexFile {
            format: INDEX_FORMAT.to_string(),
            mode: self.mode,
            ids: self.ids.clone(),
            rows: self.rows.clone(),
        };
        let mut s = serde_json::to_string(&file).expect("finite index serializes");
        s.push('\n');
        s
    }

    /// Restores an index file. Hybrid indexes need the projector that built
    /// them to embed queries.
    pub fn parse(text: &str, params: Option<MlpParams>) -> Result<Self> {
        let file: IndexFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        if file.format != INDEX_FORMAT {
            return Err(Error::Parse {
                line: 1,
                message: format!("unsupported index format {:?}", file.format),
            });
        }
        if file.ids.len() != file.rows.len() {
            return Err(Error::Dimension(format!(
                "index has {} ids but {} rows",
                file.ids.len(),
                file.rows.len()
            )));
        }
        for (id, row) in file.ids.iter().zip(&file.rows) {
            if (l2_norm(row) - 1.0).abs() > 1e-9 {
                return Err(Error::Dimension(format!(
                    "index row for {id:?} is not unit norm"
                )));
            }
        }
        let embedder = match file.mode {
            RetrievalMode::Hybrid => Some(params.ok_or_else(|| {
                Error::Config("hybrid index requires projector parameters".into())
            })?),
            RetrievalMode::Visual => None,
        };
        Ok(Self {
            mode: file.mode,
            ids: file.ids,
            rows: file.rows,
            embedder,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fsio::write_atomic(path, self.render().as_bytes())
    }

    pub fn load(path: &Path, params: Option<MlpParams>) -> Result<Self> {
        Self::parse(&fsio::read_to_string(path)?, params)
    }
}

fn embed_record(
    r: &ScenarioRecord,
    mode: RetrievalMode,
    params: Option<&MlpParams>,
) -> Result<Vec<f64>> {
    match mode {
        RetrievalMode::Hybrid => {
            let p = params
                .ok_or_else(|| Error::Config("hybrid mode requires projector parameters".into()))?;
            let e = project(p, r)?;
            if e.degenerate {
                return Err(Error::ZeroEmbedding(r.id.clone()));
            }
            Ok(e.s)
        }
        RetrievalMode::Visual => {
            let n = l2_norm(&r.video_emb);
            if n == 0.0 {
                return Err(Error::ZeroEmbedding(r.id.clone()));
            }
            Ok(r.video_emb.iter().map(|v| v / n).collect())
        }
    }
}

pub fn build_index(
    store: &MemoryStore,
    params: Option<&MlpParams>,
    mode: RetrievalMode,
) -> Result<VectorIndex> {
    let rows = store
        .iter()
        .map(|r| embed_record(r, mode, params))
        .collect::<Result<Vec<_>>>()?;
    Ok(VectorIndex {
        mode,
        ids: store.iter().map(|r| r.id.clone()).collect(),
        rows,
        embedder: match mode {
            RetrievalMode::Hybrid => params.cloned(),
            RetrievalMode::Visual => None,
        },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Neighbor {
    pub id: String,
    /// Row position in the index (insertion order of the store).
    pub index: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RetrievalResult {
    /// Best first; scores non-increasing.
    pub neighbors: Vec<Neighbor>,
}

impl RetrievalResult {
    pub fn ids(&self) -> Vec<&str> {
        self.neighbors.iter().map(|n| n.id.as_str()).collect()
    }

    /// `rank id score` per line, score to 6 decimals.
    pub fn render(&self) -> String {
        self.neighbors
            .iter()
            .enumerate()
            .map(|(i, n)| format!("{} {} {:.6}\n", i + 1, n.id, n.score))
            .collect()
    }
}

pub fn retrieve_top_k(
    idx: &VectorIndex,
    query: &ScenarioRecord,
    k: usize,
    exclude_id: Option<&str>,
) -> Result<RetrievalResult> {
    let q = idx.embed(query)?;
    top_k_by_vector(idx, &q, k, exclude_id)
}

/// Top-k against an already-embedded unit query vector.
pub fn top_k_by_vector(
    idx: &VectorIndex,
    q: &[f64],
    k: usize,
    exclude_id: Option<&str>,
) -> Result<RetrievalResult> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if let Some(row) = idx.rows.first() {
        if row.len() != q.len() {
            return Err(Error::Dimension(format!(
                "query embedding has length {}, index rows have {}",
                q.len(),
                row.len()
            )));
        }
    }
    let excluded = exclude_id.map_or(0, |x| idx.ids.iter().filter(|id| *id == x).count());
    let available = idx.len() - excluded;
    if k > available {
        return Err(Error::KTooLarge {
            k,
            available,
            store_size: idx.len(),
        });
    }

    // Bounded insertion into a best-first buffer. Equal scores keep the
    // earlier row ahead because later rows only displace strictly worse ones.
    let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
    for (i, row) in idx.rows.iter().enumerate() {
        if exclude_id == Some(idx.ids[i].as_str()) {
            continue;
        }
        let score = dot(row, q);
        if best.len() == k && score <= best[k - 1].0 {
            continue;
        }
        let pos = best.partition_point(|&(s, _)| s >= score);
        best.insert(pos, (score, i));
        best.truncate(k);
    }

    Ok(RetrievalResult {
        neighbors: best
            .into_iter()
            .map(|(score, index)| Neighbor {
                id: idx.ids[index].clone(),
                index,
                score,
            })
            .collect(),
    })
}
