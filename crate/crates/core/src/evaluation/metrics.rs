use serde::{Deserialize, Serialize};

use super::EvalError;

/// Positive-class metrics of one prediction vector.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

impl Metrics {
    fn fields(&self) -> [f64; 4] {
        [self.precision, self.recall, self.f1, self.accuracy]
    }

    fn from_fields(f: [f64; 4]) -> Self {
        Self {
            precision: f[0],
            recall: f[1],
            f1: f[2],
            accuracy: f[3],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn from_predictions(predictions: &[u8], labels: &[u8]) -> Result<Self, EvalError> {
        if predictions.len() != labels.len() {
            return Err(EvalError::LengthMismatch(predictions.len(), labels.len()));
        }
        let mut c = Confusion::default();
        for (&p, &y) in predictions.iter().zip(labels) {
            match (p == 1, y == 1) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        Ok(c)
    }

    pub fn metrics(&self) -> Metrics {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Metrics {
            precision,
            recall,
            f1,
            accuracy: ratio(self.tp + self.tn, self.tp + self.fp + self.fn_ + self.tn),
        }
    }
}

pub fn compute_metrics(predictions: &[u8], labels: &[u8]) -> Result<Metrics, EvalError> {
    if predictions.is_empty() {
        return Err(EvalError::LengthMismatch(0, labels.len()));
    }
    Ok(Confusion::from_predictions(predictions, labels)?.metrics())
}

/// Mean and sample standard deviation of each metric over folds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub mean: Metrics,
    pub std: Metrics,
    pub folds: usize,
}

pub fn summarize(per_fold: &[Metrics]) -> MetricsSummary {
    let n = per_fold.len();
    let mut mean = [0.0; 4];
    let mut std = [0.0; 4];
    if n > 0 {
        for m in per_fold {
            for (acc, x) in mean.iter_mut().zip(m.fields()) {
                *acc += x;
            }
        }
        for x in &mut mean {
            *x /= n as f64;
        }
    }
    if n > 1 {
        for m in per_fold {
            for ((acc, x), mu) in std.iter_mut().zip(m.fields()).zip(mean) {
                *acc += (x - mu) * (x - mu);
            }
        }
        for x in &mut std {
            *x = (*x / (n - 1) as f64).sqrt();
        }
    }
    MetricsSummary {
        mean: Metrics::from_fields(mean),
        std: Metrics::from_fields(std),
        folds: n,
    }
}
