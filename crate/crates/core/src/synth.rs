//! Seeded synthetic driving corpora.
//!
//! Two generators share one idea: each record belongs to a latent behaviour
//! whose captions reuse a fixed vocabulary, so TF-IDF similarity is high
//! inside a behaviour and near zero across behaviours.
//!
//! * [`separable_corpus`]: two behaviours that differ only in the control
//!   channels. Video features are pure noise, so visual retrieval sits at
//!   chance while a projector trained on the hybrid input can separate them.
//! * [`driving_corpus`]: four behaviours (stop, cruise, left, right) with
//!   two-dimensional video features, one control interval, and next-step
//!   targets that follow from the controls.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::store::ScenarioRecord;

fn round_to(v: f64, decimals: i32) -> f64 {
    let f = 10f64.powi(decimals);
    let r = (v * f).round() / f;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn normal(rng: &mut impl Rng, mean: f64, sd: f64) -> f64 {
    Normal::new(mean, sd).expect("finite sd").sample(rng)
}

struct Phrasing {
    action: &'static str,
    reasons: &'static [&'static str],
}

const SLOW: Phrasing = Phrasing {
    action: "car slows down gently",
    reasons: &[
        "because pedestrians are crossing near school",
        "because pedestrians are crossing near park",
        "because pedestrians are crossing near market",
    ],
};

const FAST: Phrasing = Phrasing {
    action: "vehicle accelerates onto highway",
    reasons: &[
        "since open lanes allow higher speed",
        "since open lanes allow faster speed",
        "since open lanes allow greater speed",
    ],
};

const STOP: Phrasing = Phrasing {
    action: "car brakes to a stop",
    reasons: &[
        "because the traffic light turned red",
        "because the traffic signal turned red",
        "because the traffic lamp turned red",
    ],
};

const CRUISE: Phrasing = Phrasing {
    action: "vehicle maintains cruising speed",
    reasons: &[
        "since highway lanes remain clear",
        "since highway lanes stay clear",
        "since highway lanes look clear",
    ],
};

const LEFT: Phrasing = Phrasing {
    action: "ego swerves left into turning lane",
    reasons: &[
        "to follow route toward downtown exit",
        "to follow route toward northbound exit",
        "to follow route toward airport exit",
    ],
};

const RIGHT: Phrasing = Phrasing {
    action: "truck ahead forces rightward merge onto ramp",
    reasons: &[
        "as parked cones block middle section",
        "as parked cones block middle stretch",
        "as parked cones block middle portion",
    ],
};

fn texts(p: &Phrasing, rng: &mut impl Rng) -> (String, String) {
    (
        p.action.to_string(),
        p.reasons.choose(rng).expect("non-empty").to_string(),
    )
}

/// A corpus with its latent behaviour labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCorpus {
    pub records: Vec<ScenarioRecord>,
    pub labels: Vec<usize>,
}

/// `2 · per_cluster` records interleaved by cluster, `video_dim` noise
/// features and four control channels (one interval). Speed and
/// acceleration carry the cluster; the other channels are noise.
pub fn separable_corpus(per_cluster: usize, video_dim: usize, seed: u64) -> LabeledCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(2 * per_cluster);
    let mut labels = Vec::with_capacity(2 * per_cluster);
    for i in 0..per_cluster {
        for cluster in 0..2 {
            let sign = if cluster == 0 { -1.0 } else { 1.0 };
            let video_emb = (0..video_dim)
                .map(|_| round_to(rng.sample(StandardNormal), 3))
                .collect();
            let speed = 5.0 + sign * normal(&mut rng, 3.0, 0.5).abs();
            let accel = sign * normal(&mut rng, 1.0, 0.2).abs();
            let course = normal(&mut rng, 0.0, 1.0);
            let curvature = normal(&mut rng, 0.0, 0.01);
            let control_vec = vec![
                round_to(speed, 2),
                round_to(course, 2),
                round_to(accel, 2),
                round_to(curvature, 3),
            ];
            let (action, reason) = texts(if cluster == 0 { &SLOW } else { &FAST }, &mut rng);
            records.push(ScenarioRecord {
                id: format!("s{:03}", 2 * i + cluster),
                video_emb,
                control_vec,
                action_text: action,
                justification_text: reason,
                target_speed: round_to(speed + accel, 2),
                target_course: round_to(course, 2),
            });
            labels.push(cluster);
        }
    }
    LabeledCorpus { records, labels }
}

/// Stop / cruise / left / right, `n` records cycling through the four.
pub fn driving_corpus(n: usize, seed: u64) -> LabeledCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let behaviour = i % 4;
        // mean speed, accel, course, curvature per behaviour; video angle
        let (speed, accel, course, curv, angle, phr) = match behaviour {
            0 => (2.0, -1.5, 0.0, 0.0, 0.3, &STOP),
            1 => (12.0, 0.2, 0.0, 0.0, 1.2, &CRUISE),
            2 => (5.0, -0.3, -8.0, -0.05, 2.1, &LEFT),
            _ => (5.0, -0.3, 8.0, 0.05, 2.9, &RIGHT),
        };
        let speed = (speed + normal(&mut rng, 0.0, 0.8)).max(0.0);
        let accel = accel + normal(&mut rng, 0.0, 0.3);
        let course = course + normal(&mut rng, 0.0, 2.0);
        let curv = curv + normal(&mut rng, 0.0, 0.01);
        let angle = angle + normal(&mut rng, 0.0, 0.6);
        let video_emb = vec![round_to(angle.cos(), 3), round_to(angle.sin(), 3)];
        let (action, reason) = texts(phr, &mut rng);
        let target_speed = (speed + accel + normal(&mut rng, 0.0, 0.1)).max(0.0);
        let target_course = course + 40.0 * curv + normal(&mut rng, 0.0, 0.3);
        records.push(ScenarioRecord {
            id: format!("d{i:03}"),
            video_emb,
            control_vec: vec![
                round_to(speed, 2),
                round_to(course, 2),
                round_to(accel, 2),
                round_to(curv, 3),
            ],
            action_text: action,
            justification_text: reason,
            target_speed: round_to(target_speed, 2),
            target_course: round_to(target_course, 2),
        });
        labels.push(behaviour);
    }
    LabeledCorpus { records, labels }
}

/// Records in the bundled corpus file.
pub const BUNDLED_SIZE: usize = 40;
/// Seed the bundled corpus file was generated with.
pub const BUNDLED_SEED: u64 = 2024;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::miner::TfIdfModel;

    fn sims(c: &LabeledCorpus) -> (f64, f64) {
        let caps: Vec<String> = c.records.iter().map(|r| r.caption()).collect();
        let m = TfIdfModel::from_texts(&caps).unwrap();
        let (mut min_same, mut max_cross) = (1.0f64, 0.0f64);
        for i in 0..caps.len() {
            for j in 0..i {
                let s = m.similarity(i, j);
                if c.labels[i] == c.labels[j] {
                    min_same = min_same.min(s);
                } else {
                    max_cross = max_cross.max(s);
                }
            }
        }
        (min_same, max_cross)
    }

    #[test]
    fn captions_cluster_under_default_thresholds() {
        for c in [separable_corpus(20, 8, 1), driving_corpus(40, BUNDLED_SEED)] {
            let (same, cross) = sims(&c);
            assert!(same >= 0.6, "min same-cluster similarity {same}");
            assert!(cross <= 0.2, "max cross-cluster similarity {cross}");
        }
    }

    #[test]
    fn bundled_file_matches_generator() {
        let store =
            crate::store::parse_records(include_str!("../data/synthetic40.jsonl"), None).unwrap();
        assert_eq!(
            store.records(),
            driving_corpus(BUNDLED_SIZE, BUNDLED_SEED)
                .records
                .as_slice()
        );
    }

    #[test]
    fn seeded_and_reproducible() {
        assert_eq!(driving_corpus(12, 3), driving_corpus(12, 3));
        assert_ne!(driving_corpus(12, 3), driving_corpus(12, 4));
        assert_eq!(separable_corpus(5, 4, 9), separable_corpus(5, 4, 9));
    }

    #[test]
    fn separable_clusters_split_on_speed() {
        let c = separable_corpus(30, 6, 5);
        for (r, &l) in c.records.iter().zip(&c.labels) {
            assert_eq!(r.control_vec[0] > 5.0, l == 1);
            assert_eq!(r.video_emb.len(), 6);
        }
    }
}
