mod common;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use raicl::icl::{
    gradient_update_delta, linear_attention, softmax_attention, AttentionHead, ContextBundle,
    LinearLayerUpdate, SquaredLoss,
};
use raicl::miner::TfIdfModel;
use raicl::projector::gelu;

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|r| m.row(r).iter().copied().collect())
        .collect()
}

#[test]
fn tfidf_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..30 {
        let texts: Vec<String> = (0..rng.random_range(2..8))
            .map(|_| common::random_sentence(&mut rng))
            .collect();
        let m = TfIdfModel::from_texts(&texts).unwrap();
        for i in 0..texts.len() {
            for j in 0..texts.len() {
                let want = common::dense_tfidf_similarity(&texts, i, j).clamp(0.0, 1.0);
                assert!(
                    (m.similarity(i, j) - want).abs() < 1e-12,
                    "{texts:?} {i} {j}"
                );
            }
        }
    }
}

#[test]
fn gelu_matches_erf_series() {
    let mut x = -8.0;
    while x <= 8.0 {
        let want = common::gelu_oracle(x);
        assert!(
            (gelu(x) - want).abs() <= 1e-14 * want.abs().max(1.0),
            "x = {x}"
        );
        x += 0.01;
    }
}

#[test]
fn attention_matches_loop_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let h = AttentionHead::random(4, 4, &mut rng);
        let ctx = ContextBundle::random(4, 2, 2, &mut rng);
        let z = ctx.z_all();
        let tokens: Vec<Vec<f64>> = z
            .column_iter()
            .map(|c| c.iter().copied().collect())
            .collect();
        for softmax in [true, false] {
            let want = common::attention_oracle(
                &rows(&h.w_q),
                &rows(&h.w_k),
                &rows(&h.w_v),
                &tokens,
                softmax,
            );
            let got = if softmax {
                softmax_attention(&h, &ctx).unwrap()
            } else {
                linear_attention(&h, &ctx).unwrap()
            };
            let scale = want.iter().flatten().fold(0.0f64, |a, b| a.max(b.abs()));
            for (r, row) in want.iter().enumerate() {
                for (c, w) in row.iter().enumerate() {
                    assert!((got[(r, c)] - w).abs() <= 1e-12 * scale.max(1.0));
                }
            }
        }
    }
}

#[test]
fn gradient_delta_is_eta_times_loss_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let u = LinearLayerUpdate::random(3, 2, 5, 0.1, &mut rng);
    let dw = gradient_update_delta(&u, &SquaredLoss).unwrap();
    // closed form Σ (W0 x − t) x^T, written out
    let mut want = DMatrix::<f64>::zeros(2, 3);
    for (x, t) in u.inputs.iter().zip(&u.targets) {
        let r: DVector<f64> = &u.w0 * x - t;
        for i in 0..2 {
            for j in 0..3 {
                want[(i, j)] += 0.1 * r[i] * x[j];
            }
        }
    }
    assert!((dw - want).amax() < 1e-14);
}
