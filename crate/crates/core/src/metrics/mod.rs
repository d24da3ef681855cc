//! Caption metrics (BLEU-4, METEOR-lite, CIDEr) and control-signal metrics
//! (RMSE, tolerant accuracy), plus the combined [`EvalReport`].

mod bleu;
mod cider;
mod meteor;

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsio;
use crate::prompt::GeneratedAnswer;
use crate::store::ScenarioRecord;
use crate::text::metric_tokens;

pub use bleu::{
    bleu4, bleu4_unsmoothed, bleu_from_stats, bleu_stats, corpus_bleu4, BleuStats, Smoothing,
};
pub use cider::{cider, CiderIdf, CiderScores};
pub use meteor::{meteor_lite, meteor_tokens};

/// Tolerances reported for course and speed.
pub const DEFAULT_SIGMAS: [f64; 5] = [0.1, 0.5, 1.0, 5.0, 10.0];

fn check_pair(preds: &[f64], truths: &[f64]) -> Result<()> {
    if preds.len() != truths.len() {
        return Err(Error::Dimension(format!(
            "{} predictions but {} ground-truth values",
            preds.len(),
            truths.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::Empty("no predictions to score".into()));
    }
    Ok(())
}

pub fn rmse(preds: &[f64], truths: &[f64]) -> Result<f64> {
    check_pair(preds, truths)?;
    let mse = preds
        .iter()
        .zip(truths)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / preds.len() as f64;
    Ok(mse.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceAccuracy {
    pub sigma: f64,
    /// Percentage in `[0, 100]`.
    pub accuracy: f64,
}

/// Percentage of `|pred − truth| <= σ` for each σ, sorted by σ.
pub fn tolerant_accuracy(
    preds: &[f64],
    truths: &[f64],
    sigmas: &[f64],
) -> Result<Vec<ToleranceAccuracy>> {
    check_pair(preds, truths)?;
    if let Some(bad) = sigmas.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
        return Err(Error::Config(format!(
            "tolerance σ must be positive, got {bad}"
        )));
    }
    let mut errors: Vec<f64> = preds
        .iter()
        .zip(truths)
        .map(|(p, t)| (p - t).abs())
        .collect();
    errors.sort_by(f64::total_cmp);
    let mut sorted = sigmas.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    Ok(sorted
        .into_iter()
        .map(|sigma| {
            let within = errors.partition_point(|&e| e <= sigma);
            ToleranceAccuracy {
                sigma,
                accuracy: 100.0 * within as f64 / errors.len() as f64,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TextScores {
    /// Corpus BLEU-4, smoothed, in `[0, 1]`.
    pub bleu4: f64,
    /// Mean per-item METEOR-lite in `[0, 1]`.
    pub meteor: f64,
    /// Corpus CIDEr (×10 convention).
    pub cider: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlScores {
    pub rmse: f64,
    pub tolerant_acc: Vec<ToleranceAccuracy>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub items: usize,
    pub action: TextScores,
    pub justification: TextScores,
    /// Degrees.
    pub course: ControlScores,
    /// m/s.
    pub speed: ControlScores,
}

fn text_scores(cands: &[&str], refs: &[&str]) -> Result<TextScores> {
    let ref_sets: Vec<Vec<&str>> = refs.iter().map(|r| vec![*r]).collect();
    let bleu4 = corpus_bleu4(cands, &ref_sets, Smoothing::AddOneHigherOrders)?;
    let meteor = cands
        .iter()
        .zip(refs)
        .map(|(c, r)| meteor_tokens(&metric_tokens(c), &metric_tokens(r)))
        .sum::<f64>()
        / cands.len() as f64;
    let cider = cider(cands, &ref_sets)?.corpus;
    Ok(TextScores {
        bleu4,
        meteor,
        cider,
    })
}

fn control_scores(preds: &[f64], truths: &[f64], sigmas: &[f64]) -> Result<ControlScores> {
    Ok(ControlScores {
        rmse: rmse(preds, truths)?,
        tolerant_acc: tolerant_accuracy(preds, truths, sigmas)?,
    })
}

/// Scores parallel answers and ground-truth records on every metric.
pub fn evaluate_run(
    answers: &[GeneratedAnswer],
    truths: &[&ScenarioRecord],
    sigmas: &[f64],
) -> Result<EvalReport> {
    if answers.len() != truths.len() {
        return Err(Error::Dimension(format!(
            "{} answers but {} ground-truth records",
            answers.len(),
            truths.len()
        )));
    }
    if answers.is_empty() {
        return Err(Error::Empty("no answers to evaluate".into()));
    }
    let all_empty =
        |f: fn(&GeneratedAnswer) -> &str| answers.iter().all(|a| metric_tokens(f(a)).is_empty());
    if all_empty(|a| &a.action_text) || all_empty(|a| &a.justification_text) {
        return Err(Error::Empty("every candidate text is empty".into()));
    }
    let col = |f: fn(&GeneratedAnswer) -> &str| answers.iter().map(f).collect::<Vec<_>>();
    let action = text_scores(
        &col(|a| &a.action_text),
        &truths
            .iter()
            .map(|t| t.action_text.as_str())
            .collect::<Vec<_>>(),
    )?;
    let justification = text_scores(
        &col(|a| &a.justification_text),
        &truths
            .iter()
            .map(|t| t.justification_text.as_str())
            .collect::<Vec<_>>(),
    )?;
    let pred_course: Vec<f64> = answers.iter().map(|a| a.pred_course).collect();
    let pred_speed: Vec<f64> = answers.iter().map(|a| a.pred_speed).collect();
    let true_course: Vec<f64> = truths.iter().map(|t| t.target_course).collect();
    let true_speed: Vec<f64> = truths.iter().map(|t| t.target_speed).collect();
    Ok(EvalReport {
        items: answers.len(),
        action,
        justification,
        course: control_scores(&pred_course, &true_course, sigmas)?,
        speed: control_scores(&pred_speed, &true_speed, sigmas)?,
    })
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fsio::write_atomic(path, self.to_json().as_bytes())
    }

    /// Caption rows (B4, C, M ×100, one decimal) and control rows (RMSE and
    /// A_σ, two decimals).
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{:<14}{:>8}{:>8}{:>8}", "task", "B4", "C", "M").unwrap();
        for (name, t) in [
            ("action", &self.action),
            ("justification", &self.justification),
        ] {
            writeln!(
                out,
                "{:<14}{:>8.1}{:>8.1}{:>8.1}",
                name,
                100.0 * t.bleu4,
                100.0 * t.cider,
                100.0 * t.meteor
            )
            .unwrap();
        }
        let mut header = format!("{:<14}{:>8}", "signal", "RMSE");
        for a in &self.course.tolerant_acc {
            header.push_str(&format!("{:>9}", format!("A_{}", a.sigma)));
        }
        writeln!(out, "{header}").unwrap();
        for (name, c) in [("course", &self.course), ("speed", &self.speed)] {
            let mut row = format!("{:<14}{:>8.2}", name, c.rmse);
            for a in &c.tolerant_acc {
                row.push_str(&format!("{:>9.2}", a.accuracy));
            }
            writeln!(out, "{row}").unwrap();
        }
        out
    }
}
