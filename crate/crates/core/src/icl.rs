//! Numerics lab for the "in-context learning as implicit weight update" view.
//!
//! Convention: tokens are columns. `Z` is `d_in × n`, each projection is
//! `d_out × d_in`, so keys and queries are `d_out × n` and the score matrix
//! `K^T Q` is `n × n` with entry `(i, j) = k_i · q_j`. Softmax runs down each
//! column, so output column `j` mixes value columns with weights over `i`.
//!
//! With the softmax dropped, `V K^T Q` splits over the token set:
//! `V K^T = Σ_i W_V z_i (W_K z_i)^T = ΔW_ICL + W_ZSL`, the first sum over the
//! in-context tokens and the second over the query tokens.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionHead {
    pub w_q: DMatrix<f64>,
    pub w_k: DMatrix<f64>,
    pub w_v: DMatrix<f64>,
}

impl AttentionHead {
    pub fn new(w_q: DMatrix<f64>, w_k: DMatrix<f64>, w_v: DMatrix<f64>) -> Result<Self> {
        let shape = w_q.shape();
        if w_k.shape() != shape || w_v.shape() != shape {
            return Err(Error::Shape(format!(
                "W_Q {:?}, W_K {:?}, W_V {:?} must share one shape",
                shape,
                w_k.shape(),
                w_v.shape()
            )));
        }
        if !(w_q
            .iter()
            .chain(w_k.iter())
            .chain(w_v.iter())
            .all(|v| v.is_finite()))
        {
            return Err(Error::Shape("attention weights must be finite".into()));
        }
        Ok(Self { w_q, w_k, w_v })
    }

    pub fn random(d_in: usize, d_out: usize, rng: &mut impl Rng) -> Self {
        Self {
            w_q: gaussian(d_out, d_in, rng),
            w_k: gaussian(d_out, d_in, rng),
            w_v: gaussian(d_out, d_in, rng),
        }
    }

    pub fn d_in(&self) -> usize {
        self.w_q.ncols()
    }

    pub fn d_out(&self) -> usize {
        self.w_q.nrows()
    }

    /// Softmax temperature.
    pub fn scale(&self) -> f64 {
        (self.d_in() as f64).sqrt()
    }
}

/// In-context tokens followed by query tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextBundle {
    pub z_icl: DMatrix<f64>,
    pub z_q: DMatrix<f64>,
}

impl ContextBundle {
    pub fn new(z_icl: DMatrix<f64>, z_q: DMatrix<f64>) -> Result<Self> {
        if z_q.ncols() == 0 {
            return Err(Error::Shape("at least one query token is required".into()));
        }
        if z_icl.ncols() > 0 && z_icl.nrows() != z_q.nrows() {
            return Err(Error::Shape(format!(
                "ICL tokens have dimension {}, query tokens {}",
                z_icl.nrows(),
                z_q.nrows()
            )));
        }
        let z_icl = if z_icl.ncols() == 0 {
            DMatrix::zeros(z_q.nrows(), 0)
        } else {
            z_icl
        };
        Ok(Self { z_icl, z_q })
    }

    pub fn random(d_in: usize, n_icl: usize, n_q: usize, rng: &mut impl Rng) -> Self {
        Self {
            z_icl: gaussian(d_in, n_icl, rng),
            z_q: gaussian(d_in, n_q, rng),
        }
    }

    pub fn d_in(&self) -> usize {
        self.z_q.nrows()
    }

    pub fn n_icl(&self) -> usize {
        self.z_icl.ncols()
    }

    pub fn n_q(&self) -> usize {
        self.z_q.ncols()
    }

    /// `[z_icl ; z_q]` along the token axis.
    pub fn z_all(&self) -> DMatrix<f64> {
        let (d, a, b) = (self.d_in(), self.n_icl(), self.n_q());
        let mut z = DMatrix::zeros(d, a + b);
        z.columns_mut(0, a).copy_from(&self.z_icl);
        z.columns_mut(a, b).copy_from(&self.z_q);
        z
    }
}

fn gaussian(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn check(h: &AttentionHead, ctx: &ContextBundle) -> Result<()> {
    if h.d_in() != ctx.d_in() {
        return Err(Error::Shape(format!(
            "head expects d_in = {}, tokens have {}",
            h.d_in(),
            ctx.d_in()
        )));
    }
    Ok(())
}

pub fn softmax_attention(h: &AttentionHead, ctx: &ContextBundle) -> Result<DMatrix<f64>> {
    check(h, ctx)?;
    let z = ctx.z_all();
    let (q, k, v) = (&h.w_q * &z, &h.w_k * &z, &h.w_v * &z);
    let mut a = k.transpose() * q / h.scale();
    for mut col in a.column_iter_mut() {
        let m = col.max();
        col.apply(|x| *x = (*x - m).exp());
        let s = col.sum();
        col /= s;
    }
    Ok(v * a)
}

pub fn linear_attention(h: &AttentionHead, ctx: &ContextBundle) -> Result<DMatrix<f64>> {
    check(h, ctx)?;
    let z = ctx.z_all();
    let (q, k, v) = (&h.w_q * &z, &h.w_k * &z, &h.w_v * &z);
    Ok(v * (k.transpose() * q))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IclDecomposition {
    pub w_zsl: DMatrix<f64>,
    pub delta_w_icl: DMatrix<f64>,
}

fn outer_sum(h: &AttentionHead, tokens: &DMatrix<f64>) -> DMatrix<f64> {
    let mut acc = DMatrix::zeros(h.d_out(), h.d_out());
    for z in tokens.column_iter() {
        let v = &h.w_v * z;
        let k = &h.w_k * z;
        acc += v * k.transpose();
    }
    acc
}

pub fn decompose_icl(h: &AttentionHead, ctx: &ContextBundle) -> Result<IclDecomposition> {
    check(h, ctx)?;
    Ok(IclDecomposition {
        w_zsl: outer_sum(h, &ctx.z_q),
        delta_w_icl: outer_sum(h, &ctx.z_icl),
    })
}

impl IclDecomposition {
    /// `(ΔW_ICL + W_ZSL) W_Q z_all`.
    pub fn reconstruct(&self, h: &AttentionHead, ctx: &ContextBundle) -> DMatrix<f64> {
        (&self.delta_w_icl + &self.w_zsl) * (&h.w_q * ctx.z_all())
    }
}

/// `max |a − b| / max |b|`, the normwise relative error in the max norm.
/// Zero when both are zero.
pub fn max_rel_error(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let diff = (a - b).amax();
    let scale = b.amax();
    if diff == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Per-element `|l − s| / |s|` between linear and softmax outputs, falling
/// back to `|l − s|` where `s` is exactly zero. Returns `(mean, max)`.
pub fn elementwise_rel_diff(linear: &DMatrix<f64>, softmax: &DMatrix<f64>) -> (f64, f64) {
    let diffs: Vec<f64> = linear
        .iter()
        .zip(softmax.iter())
        .map(|(l, s)| {
            let d = (l - s).abs();
            if *s == 0.0 {
                d
            } else {
                d / s.abs()
            }
        })
        .collect();
    if diffs.is_empty() {
        return (0.0, 0.0);
    }
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    (mean, diffs.iter().copied().fold(0.0, f64::max))
}

/// A loss on a linear layer's output, through its gradient in `y`.
pub trait OutputLoss {
    fn value(&self, y: &DVector<f64>, target: &DVector<f64>) -> f64;
    fn grad(&self, y: &DVector<f64>, target: &DVector<f64>) -> DVector<f64>;
}

/// `½‖y − t‖²`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SquaredLoss;

impl OutputLoss for SquaredLoss {
    fn value(&self, y: &DVector<f64>, target: &DVector<f64>) -> f64 {
        0.5 * (y - target).norm_squared()
    }

    fn grad(&self, y: &DVector<f64>, target: &DVector<f64>) -> DVector<f64> {
        y - target
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearLayerUpdate {
    pub w0: DMatrix<f64>,
    pub inputs: Vec<DVector<f64>>,
    pub targets: Vec<DVector<f64>>,
    pub eta: f64,
}

impl LinearLayerUpdate {
    pub fn random(d_in: usize, d_out: usize, batch: usize, eta: f64, rng: &mut impl Rng) -> Self {
        let vec = |n: usize, rng: &mut _| {
            DVector::from_iterator(n, (0..n).map(|_| Rng::sample(rng, StandardNormal)))
        };
        Self {
            w0: gaussian(d_out, d_in, rng),
            inputs: (0..batch).map(|_| vec(d_in, rng)).collect(),
            targets: (0..batch).map(|_| vec(d_out, rng)).collect(),
            eta,
        }
    }

    fn check(&self) -> Result<()> {
        if self.inputs.is_empty() {
            return Err(Error::Empty("minibatch is empty".into()));
        }
        if self.inputs.len() != self.targets.len() {
            return Err(Error::Shape(format!(
                "{} inputs but {} targets",
                self.inputs.len(),
                self.targets.len()
            )));
        }
        let (d_out, d_in) = self.w0.shape();
        for (i, (x, t)) in self.inputs.iter().zip(&self.targets).enumerate() {
            if x.len() != d_in || t.len() != d_out {
                return Err(Error::Shape(format!(
                    "pair {i}: input {} / target {}, layer is {d_out}×{d_in}",
                    x.len(),
                    t.len()
                )));
            }
        }
        Ok(())
    }

    /// `η ∂L/∂y` at each `y_i = W0 x_i`.
    pub fn output_grads(&self, loss: &impl OutputLoss) -> Result<Vec<DVector<f64>>> {
        self.check()?;
        Ok(self
            .inputs
            .iter()
            .zip(&self.targets)
            .map(|(x, t)| loss.grad(&(&self.w0 * x), t) * self.eta)
            .collect())
    }

    /// `Σ_i L(W x_i, t_i)` for an arbitrary weight `w`.
    pub fn loss_at(&self, w: &DMatrix<f64>, loss: &impl OutputLoss) -> f64 {
        self.inputs
            .iter()
            .zip(&self.targets)
            .map(|(x, t)| loss.value(&(w * x), t))
            .sum()
    }
}

/// `ΔW = Σ_i η ∂L/∂y|_{y_i} x_i^T`, following the source's sign: the step
/// itself is `W0 − ΔW`.
pub fn gradient_update_delta(
    u: &LinearLayerUpdate,
    loss: &impl OutputLoss,
) -> Result<DMatrix<f64>> {
    let grads = u.output_grads(loss)?;
    let mut dw = DMatrix::zeros(u.w0.nrows(), u.w0.ncols());
    for (g, x) in grads.iter().zip(&u.inputs) {
        dw += g * x.transpose();
    }
    Ok(dw)
}

/// `Σ_i η ∂L/∂y|_{y_i} (x_i^T x)`: the same product as `ΔW x`, written as
/// a weighted sum of dot products.
pub fn delta_apply_dot_form(
    u: &LinearLayerUpdate,
    loss: &impl OutputLoss,
    probe: &DVector<f64>,
) -> Result<DVector<f64>> {
    let grads = u.output_grads(loss)?;
    if probe.len() != u.w0.ncols() {
        return Err(Error::Shape(format!(
            "probe has length {}, layer takes {}",
            probe.len(),
            u.w0.ncols()
        )));
    }
    let mut out = DVector::zeros(u.w0.nrows());
    for (g, x) in grads.iter().zip(&u.inputs) {
        out += g * x.dot(probe);
    }
    Ok(out)
}

/// Token pattern for the softmax-versus-linear sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenPattern {
    Random,
    /// Every token (context and query) is one repeated random vector.
    Duplicated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub d_in: Vec<usize>,
    pub d_out: Vec<usize>,
    pub n_icl: Vec<usize>,
    pub n_q: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub pattern: TokenPattern,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            d_in: vec![4, 16],
            d_out: vec![4, 16],
            n_icl: vec![0, 1, 4, 8],
            n_q: vec![1, 4],
            trials: 5,
            seed: 11,
            pattern: TokenPattern::Random,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub d_in: usize,
    pub d_out: usize,
    pub n_icl: usize,
    pub n_q: usize,
    pub trial: usize,
    pub mean_rel_diff: f64,
    pub max_rel_diff: f64,
}

/// Independent generator per index, derived from the master seed.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn sweep_inputs(
    d_in: usize,
    d_out: usize,
    n_icl: usize,
    n_q: usize,
    pattern: TokenPattern,
    rng: &mut impl Rng,
) -> (AttentionHead, ContextBundle) {
    let head = AttentionHead::random(d_in, d_out, rng);
    let ctx = match pattern {
        TokenPattern::Random => ContextBundle::random(d_in, n_icl, n_q, rng),
        TokenPattern::Duplicated => {
            let z = gaussian(d_in, 1, rng);
            ContextBundle {
                z_icl: DMatrix::from_fn(d_in, n_icl, |r, _| z[r]),
                z_q: DMatrix::from_fn(d_in, n_q, |r, _| z[r]),
            }
        }
    };
    (head, ctx)
}

/// Softmax-versus-linear drift per configuration and trial. The drift is
/// reported, not judged.
pub fn sweep_softmax_vs_linear(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    if cfg.trials == 0 || cfg.n_q.contains(&0) || cfg.d_in.contains(&0) || cfg.d_out.contains(&0) {
        return Err(Error::Config(
            "sweep needs positive trials, dimensions and query counts".into(),
        ));
    }
    let mut rows = Vec::new();
    let mut index = 0u64;
    for &d_in in &cfg.d_in {
        for &d_out in &cfg.d_out {
            for &n_icl in &cfg.n_icl {
                for &n_q in &cfg.n_q {
                    for trial in 0..cfg.trials {
                        let mut rng = trial_rng(cfg.seed, index);
                        index += 1;
                        let (h, ctx) = sweep_inputs(d_in, d_out, n_icl, n_q, cfg.pattern, &mut rng);
                        let (mean, max) = elementwise_rel_diff(
                            &linear_attention(&h, &ctx)?,
                            &softmax_attention(&h, &ctx)?,
                        );
                        rows.push(SweepRow {
                            d_in,
                            d_out,
                            n_icl,
                            n_q,
                            trial,
                            mean_rel_diff: mean,
                            max_rel_diff: max,
                        });
                    }
                }
            }
        }
    }
    Ok(rows)
}

pub fn render_sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("d_in,d_out,n_icl,n_q,trial,mean_rel_diff,max_rel_diff\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{:e},{:e}\n",
            r.d_in, r.d_out, r.n_icl, r.n_q, r.trial, r.mean_rel_diff, r.max_rel_diff
        ));
    }
    out
}

/// Limits for the randomized identity checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityCheckConfig {
    pub configs: usize,
    pub max_dim: usize,
    pub max_tokens: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for IdentityCheckConfig {
    fn default() -> Self {
        Self {
            configs: 1000,
            max_dim: 32,
            max_tokens: 16,
            tolerance: 1e-10,
            seed: 11,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentitySummary {
    pub configs: usize,
    pub max_rel_error: f64,
    pub tolerance: f64,
}

impl IdentitySummary {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= self.tolerance
    }

    pub fn render(&self) -> String {
        format!(
            "{} {} configs, max relative error {:e} (tolerance {:e})\n",
            if self.passed() { "PASS" } else { "FAIL" },
            self.configs,
            self.max_rel_error,
            self.tolerance
        )
    }
}

/// Draws `configs` random shapes and compares linear attention with the
/// `(ΔW_ICL + W_ZSL) W_Q z_all` reconstruction.
pub fn check_icl_identity(cfg: &IdentityCheckConfig) -> Result<IdentitySummary> {
    if cfg.max_dim == 0 || cfg.max_tokens == 0 {
        return Err(Error::Config(
            "identity check needs max_dim and max_tokens ≥ 1".into(),
        ));
    }
    let mut worst: f64 = 0.0;
    for i in 0..cfg.configs {
        let mut rng = trial_rng(cfg.seed, i as u64);
        let d_in = rng.random_range(1..=cfg.max_dim);
        let d_out = rng.random_range(1..=cfg.max_dim);
        let n_q = rng.random_range(1..=cfg.max_tokens);
        let n_icl = rng.random_range(0..=cfg.max_tokens - n_q);
        let h = AttentionHead::random(d_in, d_out, &mut rng);
        let ctx = ContextBundle::random(d_in, n_icl, n_q, &mut rng);
        let lin = linear_attention(&h, &ctx)?;
        let rec = decompose_icl(&h, &ctx)?.reconstruct(&h, &ctx);
        worst = worst.max(max_rel_error(&rec, &lin));
    }
    Ok(IdentitySummary {
        configs: cfg.configs,
        max_rel_error: worst,
        tolerance: cfg.tolerance,
    })
}
