//! Reverse-mode gradients of the mean triplet loss through
//! normalization, the output affine layer and the GELU hidden layers.

use super::{gelu, gelu_derivative, l2_norm, MlpParams};

/// Projector inputs for one `(anchor, positive, negative)` triple.
#[derive(Debug, Clone, Copy)]
pub struct TripletInput<'a> {
    pub anchor: &'a [f64],
    pub positive: &'a [f64],
    pub negative: &'a [f64],
}

struct Trace {
    /// Input to each layer.
    inputs: Vec<Vec<f64>>,
    /// Pre-activation of each layer.
    pre: Vec<Vec<f64>>,
    y_norm: f64,
    s: Vec<f64>,
}

fn forward_trace(p: &MlpParams, x: &[f64]) -> Trace {
    let last = p.layers.len() - 1;
    let mut inputs = Vec::with_capacity(p.layers.len());
    let mut pre = Vec::with_capacity(p.layers.len());
    let mut h = x.to_vec();
    for (i, layer) in p.layers.iter().enumerate() {
        let z = layer.apply(&h);
        inputs.push(std::mem::take(&mut h));
        h = if i < last {
            z.iter().map(|&v| gelu(v)).collect()
        } else {
            z.clone()
        };
        pre.push(z);
    }
    let y_norm = l2_norm(&h);
    let s = if y_norm > 0.0 {
        h.iter().map(|v| v / y_norm).collect()
    } else {
        h
    };
    Trace {
        inputs,
        pre,
        y_norm,
        s,
    }
}

/// Accumulates `d loss / d params` into `grad` given `d loss / d s`.
fn backward(p: &MlpParams, trace: &Trace, ds: &[f64], grad: &mut MlpParams) {
    if trace.y_norm == 0.0 {
        return;
    }
    // s = y / |y|  =>  dy = (ds - s (s . ds)) / |y|
    let s_dot = trace.s.iter().zip(ds).map(|(a, b)| a * b).sum::<f64>();
    let mut delta: Vec<f64> = ds
        .iter()
        .zip(&trace.s)
        .map(|(g, s)| (g - s * s_dot) / trace.y_norm)
        .collect();

    let last = p.layers.len() - 1;
    for li in (0..=last).rev() {
        if li < last {
            for (d, z) in delta.iter_mut().zip(&trace.pre[li]) {
                *d *= gelu_derivative(*z);
            }
        }
        let layer = &p.layers[li];
        let g = &mut grad.layers[li];
        let input = &trace.inputs[li];
        for (row, &d) in delta.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            g.bias[row] += d;
            let gw = &mut g.weights[row * layer.inputs..(row + 1) * layer.inputs];
            for (w, x) in gw.iter_mut().zip(input) {
                *w += d * x;
            }
        }
        if li > 0 {
            let mut next = vec![0.0; layer.inputs];
            for (row, &d) in delta.iter().enumerate() {
                let w = &layer.weights[row * layer.inputs..(row + 1) * layer.inputs];
                for (n, wv) in next.iter_mut().zip(w) {
                    *n += d * wv;
                }
            }
            delta = next;
        }
    }
}

#[derive(Debug, Clone)]
pub struct BatchGradient {
    pub mean_loss: f64,
    pub per_triple: Vec<f64>,
    /// Same shape as the parameters.
    pub grad: MlpParams,
}

/// Mean triplet loss over `batch` and its gradient with respect to every
/// parameter. A zero distance contributes a zero subgradient.
pub fn batch_loss_and_grad(
    p: &MlpParams,
    batch: &[TripletInput<'_>],
    margin: f64,
) -> BatchGradient {
    let mut grad = MlpParams {
        layers: p
            .layers
            .iter()
            .map(|l| super::DenseLayer::zeros(l.inputs, l.outputs))
            .collect(),
    };
    let mut per_triple = Vec::with_capacity(batch.len());
    if batch.is_empty() {
        return BatchGradient {
            mean_loss: 0.0,
            per_triple,
            grad,
        };
    }
    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    for t in batch {
        let ta = forward_trace(p, t.anchor);
        let tp = forward_trace(p, t.positive);
        let tn = forward_trace(p, t.negative);
        let d_ap = super::euclidean(&ta.s, &tp.s);
        let d_an = super::euclidean(&ta.s, &tn.s);
        let loss = super::hinge(d_ap - d_an + margin);
        per_triple.push(loss);
        total += loss;
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(loss > 0.0) {
            continue;
        }
        let dim = ta.s.len();
        let mut ga = vec![0.0; dim];
        let mut gp = vec![0.0; dim];
        let mut gn = vec![0.0; dim];
        if d_ap > 0.0 {
            for k in 0..dim {
                let u = (ta.s[k] - tp.s[k]) / d_ap * scale;
                ga[k] += u;
                gp[k] -= u;
            }
        }
        if d_an > 0.0 {
            for k in 0..dim {
                let u = (ta.s[k] - tn.s[k]) / d_an * scale;
                ga[k] -= u;
                gn[k] += u;
            }
        }
        backward(p, &ta, &ga, &mut grad);
        backward(p, &tp, &gp, &mut grad);
        backward(p, &tn, &gn, &mut grad);
    }
    BatchGradient {
        mean_loss: total * scale,
        per_triple,
        grad,
    }
}
