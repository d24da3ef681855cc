//! Retrieval-augmented in-context learning for explainable driving.
//!
//! The crate covers the memory side of the pipeline: a validated experience
//! store, TF-IDF triplet mining, a metric-learned hybrid projector, exact
//! cosine retrieval, prompt assembly with pluggable generators, caption and
//! control-signal metrics, and a small numerics lab checking that linear
//! attention over an in-context prefix factors into a weight update.

pub mod config;
pub mod error;
pub mod fsio;
pub mod icl;
pub mod metrics;
pub mod miner;
pub mod pipeline;
pub mod projector;
pub mod prompt;
pub mod retrieval;
pub mod store;
pub mod synth;
pub mod text;

pub use error::{Error, Result};
