//! Gate training by full-batch gradient descent on binary cross-entropy, and
//! F1-optimal threshold calibration.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fuzzy::{Dual, FuzzyBackend};
use crate::ltn::{o_base, o_base_dual, GateParams};
use crate::predicates::{ChannelVector, CHANNEL_COUNT};

#[derive(Debug, Error, PartialEq)]
pub enum TrainingError {
    #[error("{scores} scores but {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("empty training set")]
    Empty,
    #[error("training set contains only label {0}; both classes are required")]
    SingleClass(u8),
    #[error("no positive labels; the F1 threshold is undefined")]
    NoPositives,
    #[error("label {0} is not 0 or 1")]
    BadLabel(u8),
    #[error("gate logits became non-finite at epoch {0}")]
    Diverged(usize),
    #[error("invalid training configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub seed: u64,
    pub eps_clamp: f64,
    pub alpha_init: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            momentum: 0.9,
            epochs: 300,
            seed: 0,
            eps_clamp: 1e-6,
            alpha_init: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainingError> {
        let bad = |m: String| Err(TrainingError::Config(m));
        if self.learning_rate <= 0.0 || !self.learning_rate.is_finite() {
            return bad(format!("learning_rate {} must be positive", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum {} must lie in [0, 1)", self.momentum));
        }
        if !(self.eps_clamp > 0.0 && self.eps_clamp < 0.5) {
            return bad(format!("eps_clamp {} must lie in (0, 0.5)", self.eps_clamp));
        }
        if !self.alpha_init.is_finite() {
            return bad("alpha_init must be finite".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub alpha: GateParams,
    pub threshold: f64,
    pub backend: FuzzyBackend,
    pub config: TrainConfig,
    /// Training loss before the first step and after every epoch.
    pub loss_curve: Vec<f64>,
}

impl TrainedModel {
    pub fn final_loss(&self) -> f64 {
        self.loss_curve
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

fn check_labels(n_scores: usize, labels: &[u8]) -> Result<(), TrainingError> {
    if n_scores != labels.len() {
        return Err(TrainingError::LengthMismatch {
            scores: n_scores,
            labels: labels.len(),
        });
    }
    if labels.is_empty() {
        return Err(TrainingError::Empty);
    }
    match labels.iter().find(|&&y| y > 1) {
        Some(&y) => Err(TrainingError::BadLabel(y)),
        None => Ok(()),
    }
}

/// Mean binary cross-entropy with scores clamped to `[eps, 1 - eps]`.
pub fn bce_loss(scores: &[f64], labels: &[u8], eps: f64) -> Result<f64, TrainingError> {
    check_labels(scores.len(), labels)?;
    let total: f64 = scores
        .iter()
        .zip(labels)
        .map(|(&s, &y)| {
            let s = s.clamp(eps, 1.0 - eps);
            if y == 1 {
                -s.ln()
            } else {
                -(1.0 - s).ln()
            }
        })
        .sum();
    Ok(total / scores.len() as f64)
}

/// BCE of a dual score. The clamp is written constant-first, so an exactly
/// clamped score carries no gradient.
pub fn bce_term<const N: usize>(s: Dual<N>, y: u8, eps: f64) -> Dual<N> {
    let s = Dual::constant(1.0 - eps).min(Dual::constant(eps).max(s));
    if y == 1 {
        s.ln().scale(-1.0)
    } else {
        (Dual::constant(1.0) - s).ln().scale(-1.0)
    }
}

/// Mean BCE over the batch and its gradient with respect to the gate logits.
pub fn bce_with_gradient(
    channels: &[ChannelVector],
    labels: &[u8],
    gates: &GateParams,
    backend: FuzzyBackend,
    eps: f64,
) -> Result<(f64, [f64; CHANNEL_COUNT]), TrainingError> {
    check_labels(channels.len(), labels)?;
    let mut total = Dual::<CHANNEL_COUNT>::constant(0.0);
    for (c, &y) in channels.iter().zip(labels) {
        total = total + bce_term(o_base_dual(c, gates, backend), y, eps);
    }
    let mean = total.scale(1.0 / channels.len() as f64);
    Ok((mean.value, mean.partials))
}

/// Trains the eleven gate logits. The returned gates are those with the lowest
/// training loss seen, so the final loss never exceeds the initial one. The
/// threshold is left at 0.5; see [`calibrate_threshold`].
pub fn train_gates(
    channels: &[ChannelVector],
    labels: &[u8],
    backend: FuzzyBackend,
    config: &TrainConfig,
) -> Result<TrainedModel, TrainingError> {
    config.validate()?;
    check_labels(channels.len(), labels)?;
    if labels.iter().all(|&y| y == labels[0]) {
        return Err(TrainingError::SingleClass(labels[0]));
    }
    let mut gates = GateParams::uniform(config.alpha_init);
    let mut velocity = [0.0; CHANNEL_COUNT];
    let (mut loss, mut grad) = bce_with_gradient(channels, labels, &gates, backend, config.eps_clamp)?;
    let mut curve = Vec::with_capacity(config.epochs + 1);
    curve.push(loss);
    let mut best = (loss, gates);
    for epoch in 0..config.epochs {
        for i in 0..CHANNEL_COUNT {
            velocity[i] = config.momentum * velocity[i] - config.learning_rate * grad[i];
            gates.alpha[i] += velocity[i];
        }
        if gates.alpha.iter().any(|a| !a.is_finite()) {
            return Err(TrainingError::Diverged(epoch));
        }
        (loss, grad) = bce_with_gradient(channels, labels, &gates, backend, config.eps_clamp)?;
        curve.push(loss);
        if loss < best.0 {
            best = (loss, gates);
        }
    }
    Ok(TrainedModel {
        alpha: best.1,
        threshold: 0.5,
        backend,
        config: *config,
        loss_curve: curve,
    })
}

/// Scores of a batch under fixed gates.
pub fn score_all(channels: &[ChannelVector], gates: &GateParams, backend: FuzzyBackend) -> Vec<f64> {
    channels.iter().map(|c| o_base(c, gates, backend)).collect()
}

/// Positive-class F1 of the rule `score >= threshold`.
pub fn f1_at(scores: &[f64], labels: &[u8], threshold: f64) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= threshold, y == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    if tp == 0 {
        return 0.0;
    }
    2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
}

/// Threshold maximizing positive-class F1 over `{0} ∪ midpoints ∪ {1}`,
/// midpoints taken between consecutive distinct scores. Ties go to the
/// smallest threshold.
pub fn calibrate_threshold(scores: &[f64], labels: &[u8]) -> Result<f64, TrainingError> {
    check_labels(scores.len(), labels)?;
    if !labels.contains(&1) {
        return Err(TrainingError::NoPositives);
    }
    let mut sorted: Vec<f64> = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut candidates = Vec::with_capacity(sorted.len() + 1);
    candidates.push(0.0);
    candidates.extend(sorted.windows(2).map(|w| w[0] + (w[1] - w[0]) / 2.0));
    candidates.push(1.0);

    let mut best = (f64::NEG_INFINITY, 0.0);
    for t in candidates {
        let f1 = f1_at(scores, labels, t);
        if f1 > best.0 {
            best = (f1, t);
        }
    }
    Ok(best.1)
}
