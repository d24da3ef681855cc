//! Experience database: one [`ScenarioRecord`] per driving clip.
//!
//! Records live in a line-delimited JSON file, one object per line with the
//! keys `id`, `video_emb`, `control_vec`, `action`, `justification`,
//! `target_speed` and `target_course`. Floats are written with shortest
//! round-trip formatting, so `save(load(f))` is byte-stable.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsio;

/// One stored driving experience.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRecord {
    pub id: String,
    pub video_emb: Vec<f64>,
    /// Serialized sensor readings; see [`ControlLayout`](crate::prompt::ControlLayout).
    pub control_vec: Vec<f64>,
    #[serde(rename = "action")]
    pub action_text: String,
    #[serde(rename = "justification")]
    pub justification_text: String,
    /// Next-step speed, m/s.
    pub target_speed: f64,
    /// Next-step course, degrees.
    pub target_course: f64,
}

impl ScenarioRecord {
    /// `[video_emb ‖ control_vec]`, the projector input.
    pub fn hybrid_input(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.video_emb.len() + self.control_vec.len());
        x.extend_from_slice(&self.video_emb);
        x.extend_from_slice(&self.control_vec);
        x
    }

    /// Text used for TF-IDF pair mining.
    pub fn caption(&self) -> String {
        format!("{} {}", self.action_text, self.justification_text)
    }

    pub fn dims(&self) -> StoreDims {
        StoreDims {
            video: self.video_emb.len(),
            control: self.control_vec.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreDims {
    pub video: usize,
    pub control: usize,
}

impl fmt::Display for StoreDims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(V={}, C={})", self.video, self.control)
    }
}

/// A single broken invariant found by [`validate_record`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EmptyId,
    VideoLength { expected: usize, found: usize },
    ControlLength { expected: usize, found: usize },
    NonFiniteVideo(usize),
    NonFiniteControl(usize),
    NonFiniteTargetSpeed,
    NonFiniteTargetCourse,
    EmptyAction,
    EmptyJustification,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyId => write!(f, "empty id"),
            Violation::VideoLength { expected, found } => {
                write!(f, "video_emb length {found}, expected {expected}")
            }
            Violation::ControlLength { expected, found } => {
                write!(f, "control_vec length {found}, expected {expected}")
            }
            Violation::NonFiniteVideo(j) => write!(f, "non-finite video_emb[{j}]"),
            Violation::NonFiniteControl(j) => write!(f, "non-finite control_vec[{j}]"),
            Violation::NonFiniteTargetSpeed => write!(f, "non-finite target_speed"),
            Violation::NonFiniteTargetCourse => write!(f, "non-finite target_course"),
            Violation::EmptyAction => write!(f, "empty action text"),
            Violation::EmptyJustification => write!(f, "empty justification text"),
        }
    }
}

/// Returns every violated invariant, not only the first.
pub fn validate_record(r: &ScenarioRecord, dims: StoreDims) -> Vec<Violation> {
    let mut out = Vec::new();
    if r.id.trim().is_empty() {
        out.push(Violation::EmptyId);
    }
    if r.video_emb.len() != dims.video {
        out.push(Violation::VideoLength {
            expected: dims.video,
            found: r.video_emb.len(),
        });
    }
    if r.control_vec.len() != dims.control {
        out.push(Violation::ControlLength {
            expected: dims.control,
            found: r.control_vec.len(),
        });
    }
    for (j, v) in r.video_emb.iter().enumerate() {
        if !v.is_finite() {
            out.push(Violation::NonFiniteVideo(j));
        }
    }
    for (j, v) in r.control_vec.iter().enumerate() {
        if !v.is_finite() {
            out.push(Violation::NonFiniteControl(j));
        }
    }
    if !r.target_speed.is_finite() {
        out.push(Violation::NonFiniteTargetSpeed);
    }
    if !r.target_course.is_finite() {
        out.push(Violation::NonFiniteTargetCourse);
    }
    if r.action_text.trim().is_empty() {
        out.push(Violation::EmptyAction);
    }
    if r.justification_text.trim().is_empty() {
        out.push(Violation::EmptyJustification);
    }
    out
}

/// Ordered, id-unique collection of records sharing one `(V, C)`.
///
/// Iteration order is insertion order; retrieval tie-breaking relies on it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MemoryStore {
    records: Vec<ScenarioRecord>,
    dims: Option<StoreDims>,
    ids: HashSet<String>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Empty store whose dimensions are fixed up front.
    pub fn with_dims(dims: StoreDims) -> Self {
        Self {
            dims: Some(dims),
            ..Self::default()
        }
    }

    pub fn from_records(records: impl IntoIterator<Item = ScenarioRecord>) -> Result<Self> {
        let mut store = Self::new();
        for (i, r) in records.into_iter().enumerate() {
            store.push_at(r, i + 1)?;
        }
        Ok(store)
    }

    pub fn push(&mut self, r: ScenarioRecord) -> Result<()> {
        let line = self.records.len() + 1;
        self.push_at(r, line)
    }

    fn push_at(&mut self, r: ScenarioRecord, line: usize) -> Result<()> {
        let dims = self.dims.unwrap_or_else(|| r.dims());
        let violations = validate_record(&r, dims);
        if !violations.is_empty() {
            let message = violations
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join("; ");
            return Err(Error::InvalidRecord { line, message });
        }
        if !self.ids.insert(r.id.clone()) {
            return Err(Error::DuplicateId { id: r.id, line });
        }
        self.dims = Some(dims);
        self.records.push(r);
        Ok(())
    }

    pub fn dims(&self) -> Option<StoreDims> {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[ScenarioRecord] {
        &self.records
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ScenarioRecord> {
        self.records.iter()
    }

    pub fn get(&self, index: usize) -> Option<&ScenarioRecord> {
        self.records.get(index)
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.records.iter().position(|r| r.id == id)
    }

    pub fn by_id(&self, id: &str) -> Option<&ScenarioRecord> {
        self.position(id).map(|i| &self.records[i])
    }
}

impl<'a> IntoIterator for &'a MemoryStore {
    type Item = &'a ScenarioRecord;
    type IntoIter = std::slice::Iter<'a, ScenarioRecord>;

    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}

/// Parses line-delimited records. Blank lines are skipped; line numbers in
/// errors are 1-based and count every physical line.
pub fn parse_records(text: &str, dims: Option<StoreDims>) -> Result<MemoryStore> {
    let mut store = match dims {
        Some(d) => MemoryStore::with_dims(d),
        None => MemoryStore::new(),
    };
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ScenarioRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        store.push_at(rec, line_no)?;
    }
    Ok(store)
}

/// Loads a record file; dimensions are taken from the first record.
pub fn load_records(path: &Path) -> Result<MemoryStore> {
    parse_records(&fsio::read_to_string(path)?, None)
}

/// Loads a record file whose records must all match `dims`.
pub fn load_records_with_dims(path: &Path, dims: StoreDims) -> Result<MemoryStore> {
    parse_records(&fsio::read_to_string(path)?, Some(dims))
}

pub fn render_records(store: &MemoryStore) -> String {
    let mut out = String::new();
    for r in store {
        // Records are validated finite, so serialization cannot fail.
        out.push_str(&serde_json::to_string(r).expect("finite record serializes"));
        out.push('\n');
    }
    out
}

pub fn save_records(store: &MemoryStore, path: &Path) -> Result<()> {
    fsio::write_atomic(path, render_records(store).as_bytes())
}
