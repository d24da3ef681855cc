use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{batch_loss_and_grad, MlpParams, TripletInput};
use crate::error::{Error, Result};
use crate::miner::TripletBatch;
use crate::store::MemoryStore;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Widths from input (`V + C`) to output (`D_out`).
    pub layer_dims: Vec<usize>,
    pub margin: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Triples per Adam step; 0 means full batch.
    pub batch_size: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            layer_dims: vec![6, 16, 16, 16, 8],
            margin: 0.5,
            learning_rate: 1e-5,
            epochs: 200,
            batch_size: 32,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    /// Config-file validation. `train_projector` itself also accepts a zero
    /// learning rate.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return Err(Error::Config(format!(
                "margin must be > 0, got {}",
                self.margin
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("Adam betas must lie in [0, 1)".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("Adam epsilon must be > 0".into()));
        }
        if self.layer_dims.len() < 2 {
            return Err(Error::Config(
                "layer_dims needs at least two entries".into(),
            ));
        }
        Ok(())
    }
}

/// Adam over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(num_params: usize, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            lr,
            beta1,
            beta2,
            eps,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub initial: MlpParams,
    pub params: MlpParams,
    /// Mean triplet loss per epoch, measured before each step's update.
    pub loss_history: Vec<f64>,
}

/// Mini-batch Adam on the mean triplet loss. The seed drives both the
/// initialization and the per-epoch shuffle.
pub fn train_projector(
    store: &MemoryStore,
    triples: &TripletBatch,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    if triples.is_empty() {
        return Err(Error::Empty("no triplets to train on".into()));
    }
    let dims = store
        .dims()
        .ok_or_else(|| Error::Empty("cannot train on an empty store".into()))?;
    if cfg.layer_dims.first() != Some(&(dims.video + dims.control)) {
        return Err(Error::Dimension(format!(
            "projector input width {:?} does not match V + C = {}",
            cfg.layer_dims.first(),
            dims.video + dims.control
        )));
    }

    let index: HashMap<&str, usize> = store
        .iter()
        .enumerate()
        .map(|(i, r)| (r.id.as_str(), i))
        .collect();
    let lookup = |id: &str| {
        index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownId(id.to_string()))
    };
    let resolved: Vec<[usize; 3]> = triples
        .triples
        .iter()
        .map(|t| {
            Ok([
                lookup(&t.anchor)?,
                lookup(&t.positive)?,
                lookup(&t.negative)?,
            ])
        })
        .collect::<Result<_>>()?;
    let inputs: Vec<Vec<f64>> = store.iter().map(|r| r.hybrid_input()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let initial = MlpParams::init_with(&cfg.layer_dims, &mut rng)?;
    let mut params = initial.clone();
    let mut flat = params.to_flat();
    let mut adam = Adam::new(
        flat.len(),
        cfg.learning_rate,
        cfg.beta1,
        cfg.beta2,
        cfg.epsilon,
    );

    let batch_size = if cfg.batch_size == 0 {
        resolved.len()
    } else {
        cfg.batch_size
    };
    let mut order: Vec<usize> = (0..resolved.len()).collect();
    let mut loss_history = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_total = 0.0;
        for chunk in order.chunks(batch_size) {
            let batch: Vec<TripletInput<'_>> = chunk
                .iter()
                .map(|&t| {
                    let [a, p, n] = resolved[t];
                    TripletInput {
                        anchor: &inputs[a],
                        positive: &inputs[p],
                        negative: &inputs[n],
                    }
                })
                .collect();
            let out = batch_loss_and_grad(&params, &batch, cfg.margin);
            if !out.mean_loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            epoch_total += out.per_triple.iter().sum::<f64>();
            adam.step(&mut flat, &out.grad.to_flat());
            params.set_flat(&flat);
        }
        let mean = epoch_total / resolved.len() as f64;
        if !mean.is_finite() || !params.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        loss_history.push(mean);
    }

    Ok(TrainOutcome {
        initial,
        params,
        loss_history,
    })
}

/// `epoch,mean_loss` with 1-based epochs.
pub fn render_loss_csv(history: &[f64]) -> String {
    let mut out = String::from("epoch,mean_loss\n");
    for (i, l) in history.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i + 1, l));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::miner::Triplet;
    use crate::store::ScenarioRecord;

    fn tiny_store() -> MemoryStore {
        MemoryStore::from_records((0..6).map(|i| ScenarioRecord {
            id: format!("r{i}"),
            video_emb: vec![(i as f64 * 0.37).sin(), (i as f64 * 0.91).cos()],
            control_vec: vec![if i < 3 { 1.0 } else { -1.0 }, 0.1 * i as f64, 0.0, 0.2],
            action_text: if i < 3 { "slow" } else { "fast" }.into(),
            justification_text: "x".into(),
            target_speed: 0.0,
            target_course: 0.0,
        }))
        .unwrap()
    }

    fn triples() -> TripletBatch {
        let t = |a: usize, p: usize, n: usize| Triplet {
            anchor: format!("r{a}"),
            positive: format!("r{p}"),
            negative: format!("r{n}"),
        };
        TripletBatch {
            triples: vec![
                t(0, 1, 3),
                t(1, 2, 4),
                t(2, 0, 5),
                t(3, 4, 0),
                t(4, 5, 1),
                t(5, 3, 2),
            ],
            skipped_anchors: 0,
        }
    }

    #[test]
    fn zero_epochs_returns_initial_params() {
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let out = train_projector(&tiny_store(), &triples(), &cfg).unwrap();
        assert_eq!(out.params, out.initial);
        assert_eq!(
            out.params,
            MlpParams::init(&cfg.layer_dims, cfg.seed).unwrap()
        );
        assert!(out.loss_history.is_empty());
    }

    #[test]
    fn zero_learning_rate_leaves_params_unchanged() {
        let cfg = TrainConfig {
            learning_rate: 0.0,
            epochs: 5,
            batch_size: 2,
            ..TrainConfig::default()
        };
        let out = train_projector(&tiny_store(), &triples(), &cfg).unwrap();
        assert_eq!(out.params, out.initial);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn same_seed_same_history() {
        let cfg = TrainConfig {
            learning_rate: 1e-2,
            epochs: 10,
            batch_size: 4,
            seed: 9,
            ..TrainConfig::default()
        };
        let a = train_projector(&tiny_store(), &triples(), &cfg).unwrap();
        let b = train_projector(&tiny_store(), &triples(), &cfg).unwrap();
        assert_eq!(a.loss_history, b.loss_history);
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn unknown_triplet_id_is_error() {
        let mut t = triples();
        t.triples[0].negative = "nope".into();
        let err = train_projector(&tiny_store(), &t, &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, Error::UnknownId(_)));
    }

    #[test]
    fn input_width_must_match_store() {
        let cfg = TrainConfig {
            layer_dims: vec![5, 4],
            ..TrainConfig::default()
        };
        assert!(matches!(
            train_projector(&tiny_store(), &triples(), &cfg),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn exploding_loss_reports_epoch() {
        // one full-batch step pushes weights to ~1e300, so the second epoch's
        // forward pass overflows
        let cfg = TrainConfig {
            learning_rate: 1e300,
            margin: 5.0,
            epochs: 3,
            batch_size: 0,
            ..TrainConfig::default()
        };
        let r = train_projector(&tiny_store(), &triples(), &cfg);
        assert!(
            matches!(r, Err(Error::NonFiniteLoss { epoch: 2 })),
            "{:?}",
            r.map(|o| o.loss_history)
        );
    }

    #[test]
    fn loss_csv_layout() {
        assert_eq!(
            render_loss_csv(&[0.5, 0.25]),
            "epoch,mean_loss\n1,0.5\n2,0.25\n"
        );
    }
}
