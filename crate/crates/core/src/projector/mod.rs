//! Hybrid embedding projector.
//!
//! A GELU MLP maps `[video_emb ‖ control_vec]` to a unit vector `s`. It is
//! trained with the Euclidean triplet loss
//! `max(‖a − p‖₂ − ‖a − n‖₂ + margin, 0)` on normalized embeddings; on the
//! unit sphere Euclidean and cosine orderings coincide, so the same vectors
//! serve cosine retrieval.

mod backprop;
mod checkpoint;
mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::ScenarioRecord;

pub use backprop::{batch_loss_and_grad, BatchGradient, TripletInput};
pub use checkpoint::{load_checkpoint, parse_checkpoint, render_checkpoint, save_checkpoint};
pub use train::{render_loss_csv, train_projector, Adam, TrainConfig, TrainOutcome};

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / SQRT_2))
}

/// Exact GELU, `x · Φ(x)`.
pub fn gelu(x: f64) -> f64 {
    x * normal_cdf(x)
}

/// `Φ(x) + x · φ(x)`.
pub fn gelu_derivative(x: f64) -> f64 {
    normal_cdf(x) + x * INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// One affine layer, `y = W x + b`, with `W` stored row-major
/// (`outputs × inputs`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.inputs + col]
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.inputs);
        self.weights
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub layers: Vec<DenseLayer>,
}

impl MlpParams {
    /// All-zero parameters for the given layer widths.
    pub fn zeros(layer_dims: &[usize]) -> Result<Self> {
        check_layer_dims(layer_dims)?;
        Ok(Self {
            layers: layer_dims
                .windows(2)
                .map(|w| DenseLayer::zeros(w[0], w[1]))
                .collect(),
        })
    }

    /// Seeded uniform init in `±√(6 / (fan_in + fan_out))`, zero biases.
    pub fn init(layer_dims: &[usize], seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::init_with(layer_dims, &mut rng)
    }

    pub fn init_with<R: Rng>(layer_dims: &[usize], rng: &mut R) -> Result<Self> {
        let mut params = Self::zeros(layer_dims)?;
        for layer in &mut params.layers {
            let limit = (6.0 / (layer.inputs + layer.outputs) as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.random_range(-limit..=limit);
            }
        }
        Ok(params)
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].inputs];
        dims.extend(self.layers.iter().map(|l| l.outputs));
        dims
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.outputs).unwrap_or(0)
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Parameters flattened layer by layer, weights before bias.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params());
        let mut off = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&flat[off..off + nw]);
            off += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&flat[off..off + nb]);
            off += nb;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }
}

fn check_layer_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::Config(format!(
            "layer_dims needs at least input and output widths, got {dims:?}"
        )));
    }
    if dims.contains(&0) {
        return Err(Error::Config(format!(
            "layer_dims contains a zero width: {dims:?}"
        )));
    }
    Ok(())
}

/// Projector output. `degenerate` marks a zero pre-normalization vector,
/// which is returned as-is rather than divided by zero.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridEmbedding {
    pub s: Vec<f64>,
    pub degenerate: bool,
}

impl HybridEmbedding {
    pub fn norm(&self) -> f64 {
        l2_norm(&self.s)
    }
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Normalizes `y` to unit length, or returns it unchanged (flagged) if zero.
pub fn normalize(y: Vec<f64>) -> HybridEmbedding {
    let norm = l2_norm(&y);
    if norm == 0.0 {
        return HybridEmbedding {
            s: y,
            degenerate: true,
        };
    }
    HybridEmbedding {
        s: y.into_iter().map(|v| v / norm).collect(),
        degenerate: false,
    }
}

/// Affine + GELU on every hidden layer, plain affine on the last, then L2
/// normalization.
pub fn mlp_forward(p: &MlpParams, x: &[f64]) -> Result<HybridEmbedding> {
    if x.len() != p.input_dim() {
        return Err(Error::Dimension(format!(
            "projector expects input length {}, got {}",
            p.input_dim(),
            x.len()
        )));
    }
    let last = p.layers.len() - 1;
    let mut h = x.to_vec();
    for (i, layer) in p.layers.iter().enumerate() {
        h = layer.apply(&h);
        if i < last {
            h.iter_mut().for_each(|v| *v = gelu(*v));
        }
    }
    Ok(normalize(h))
}

/// Embeds a record's `[video_emb ‖ control_vec]`.
pub fn project(p: &MlpParams, r: &ScenarioRecord) -> Result<HybridEmbedding> {
    mlp_forward(p, &r.hybrid_input())
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `max(‖a − p‖₂ − ‖a − n‖₂ + margin, 0)`.
pub fn triplet_loss(a: &[f64], p: &[f64], n: &[f64], margin: f64) -> f64 {
    debug_assert!(a.len() == p.len() && a.len() == n.len());
    hinge(euclidean(a, p) - euclidean(a, n) + margin)
}

/// `max(v, 0)` that keeps NaN visible (`f64::max` would drop it).
pub(crate) fn hinge(v: f64) -> f64 {
    if v.is_nan() {
        v
    } else {
        v.max(0.0)
    }
}
