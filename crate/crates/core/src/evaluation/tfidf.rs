//! Classic LTN baseline: channel values come from sigmoid heads over TF-IDF
//! vectors instead of extracted predicates. Heads and gates are trained
//! together through `O_base`.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::fuzzy::{Dual, FuzzyBackend, Truth};
use crate::ltn::{o_base, o_base_generic, GateParams};
use crate::predicates::{ChannelVector, CHANNEL_COUNT};
use crate::retrieval::tokenize;
use crate::training::{bce_term, TrainConfig, TrainingError};

const PARAMS: usize = 2 * CHANNEL_COUNT;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TfidfConfig {
    /// Step size of the head weights; gates use the train config's rate.
    pub head_learning_rate: f64,
    /// Head weights start uniform in `[-init_scale, init_scale]`.
    pub init_scale: f64,
    /// Terms seen in fewer training documents are dropped.
    pub min_df: usize,
}

impl Default for TfidfConfig {
    fn default() -> Self {
        Self {
            head_learning_rate: 2.0,
            init_scale: 0.1,
            min_df: 1,
        }
    }
}

/// Sparse L2-normalized TF-IDF vector: `(term index, weight)` sorted by index.
pub type SparseVec = Vec<(usize, f64)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfVectorizer {
    vocabulary: BTreeMap<String, usize>,
    idf: Vec<f64>,
}

impl TfidfVectorizer {
    /// Vocabulary and smoothed IDF `ln((1 + n) / (1 + df)) + 1` from `texts`.
    pub fn fit<S: AsRef<str>>(texts: &[S], min_df: usize) -> Result<Self, EvalError> {
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for t in texts {
            let mut terms = tokenize(t.as_ref());
            terms.sort();
            terms.dedup();
            for term in terms {
                *df.entry(term).or_default() += 1;
            }
        }
        let n = texts.len() as f64;
        let mut vocabulary = BTreeMap::new();
        let mut idf = Vec::new();
        for (term, d) in df.into_iter().filter(|(_, d)| *d >= min_df.max(1)) {
            vocabulary.insert(term, idf.len());
            idf.push(((1.0 + n) / (1.0 + d as f64)).ln() + 1.0);
        }
        if vocabulary.is_empty() {
            return Err(EvalError::EmptyVocabulary);
        }
        Ok(Self { vocabulary, idf })
    }

    pub fn len(&self) -> usize {
        self.idf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.idf.is_empty()
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.vocabulary.get(term).map(|&i| self.idf[i])
    }

    /// Raw term counts times IDF, L2-normalized. Unknown terms are ignored.
    pub fn transform(&self, text: &str) -> SparseVec {
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for term in tokenize(text) {
            if let Some(&i) = self.vocabulary.get(&term) {
                *counts.entry(i).or_default() += 1.0;
            }
        }
        let mut v: SparseVec = counts.into_iter().map(|(i, c)| (i, c * self.idf[i])).collect();
        let norm = v.iter().map(|(_, x)| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, x) in &mut v {
                *x /= norm;
            }
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfLtnModel {
    pub vectorizer: TfidfVectorizer,
    /// One weight row per channel.
    pub weights: Vec<Vec<f64>>,
    pub bias: [f64; CHANNEL_COUNT],
    pub alpha: GateParams,
    pub backend: FuzzyBackend,
    pub loss_curve: Vec<f64>,
}

impl TfidfLtnModel {
    fn channels_of(&self, x: &SparseVec) -> ChannelVector {
        ChannelVector(heads(&self.weights, &self.bias, x))
    }

    pub fn channels(&self, text: &str) -> ChannelVector {
        self.channels_of(&self.vectorizer.transform(text))
    }

    pub fn score(&self, text: &str) -> f64 {
        o_base(&self.channels(text), &self.alpha, self.backend)
    }
}

fn heads(weights: &[Vec<f64>], bias: &[f64; CHANNEL_COUNT], x: &SparseVec) -> [f64; CHANNEL_COUNT] {
    let mut out = [0.0; CHANNEL_COUNT];
    for (j, o) in out.iter_mut().enumerate() {
        let z = bias[j] + x.iter().map(|&(i, v)| weights[j][i] * v).sum::<f64>();
        *o = z.sigmoid();
    }
    out
}

/// Loss, head weights, head biases and gates of the best epoch.
type Snapshot = (f64, Vec<Vec<f64>>, [f64; CHANNEL_COUNT], GateParams);

/// Fits the vectorizer on the training texts, then trains heads and gates by
/// full-batch momentum descent on BCE. Keeps the lowest-loss parameters.
pub fn train_tfidf_ltn<S: AsRef<str>>(
    texts: &[S],
    labels: &[u8],
    backend: FuzzyBackend,
    train: &TrainConfig,
    cfg: &TfidfConfig,
    seed: u64,
) -> Result<TfidfLtnModel, EvalError> {
    train.validate()?;
    if texts.len() != labels.len() {
        return Err(EvalError::LengthMismatch(texts.len(), labels.len()));
    }
    if texts.is_empty() {
        return Err(TrainingError::Empty.into());
    }
    if let Some(&y) = labels.iter().find(|&&y| y > 1) {
        return Err(TrainingError::BadLabel(y).into());
    }
    if !(cfg.head_learning_rate > 0.0 && cfg.head_learning_rate.is_finite()) {
        return Err(TrainingError::Config(format!("head_learning_rate {} must be positive", cfg.head_learning_rate)).into());
    }
    let vectorizer = TfidfVectorizer::fit(texts, cfg.min_df)?;
    let xs: Vec<SparseVec> = texts.iter().map(|t| vectorizer.transform(t.as_ref())).collect();
    let dim = vectorizer.len();
    let n = xs.len() as f64;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights: Vec<Vec<f64>> = (0..CHANNEL_COUNT)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..=1.0) * cfg.init_scale).collect())
        .collect();
    let mut bias = [0.0; CHANNEL_COUNT];
    let mut alpha = GateParams::uniform(train.alpha_init);

    let mut v_w = vec![vec![0.0; dim]; CHANNEL_COUNT];
    let mut v_b = [0.0; CHANNEL_COUNT];
    let mut v_a = [0.0; CHANNEL_COUNT];

    let mut curve = Vec::with_capacity(train.epochs + 1);
    let mut best: Option<Snapshot> = None;
    for epoch in 0..=train.epochs {
        let mut loss = 0.0;
        let mut g_w = vec![vec![0.0; dim]; CHANNEL_COUNT];
        let mut g_b = [0.0; CHANNEL_COUNT];
        let mut g_a = [0.0; CHANNEL_COUNT];
        for (x, &y) in xs.iter().zip(labels) {
            let p = heads(&weights, &bias, x);
            let mut c = [Dual::<PARAMS>::constant(0.0); CHANNEL_COUNT];
            let mut a = [Dual::<PARAMS>::constant(0.0); CHANNEL_COUNT];
            for j in 0..CHANNEL_COUNT {
                a[j] = Dual::variable(alpha.alpha[j], j);
                c[j] = Dual::variable(p[j], CHANNEL_COUNT + j);
            }
            let term = bce_term(o_base_generic(&c, &a, backend), y, train.eps_clamp);
            loss += term.value;
            for j in 0..CHANNEL_COUNT {
                g_a[j] += term.partials[j];
                let dz = term.partials[CHANNEL_COUNT + j] * p[j] * (1.0 - p[j]);
                g_b[j] += dz;
                for &(i, v) in x {
                    g_w[j][i] += dz * v;
                }
            }
        }
        loss /= n;
        if !loss.is_finite() {
            return Err(TrainingError::Diverged(epoch).into());
        }
        curve.push(loss);
        if best.as_ref().is_none_or(|b| loss < b.0) {
            best = Some((loss, weights.clone(), bias, alpha));
        }
        if epoch == train.epochs {
            break;
        }
        let (mu, lr, hlr) = (train.momentum, train.learning_rate, cfg.head_learning_rate);
        for j in 0..CHANNEL_COUNT {
            v_a[j] = mu * v_a[j] - lr * g_a[j] / n;
            alpha.alpha[j] += v_a[j];
            v_b[j] = mu * v_b[j] - hlr * g_b[j] / n;
            bias[j] += v_b[j];
            for i in 0..dim {
                v_w[j][i] = mu * v_w[j][i] - hlr * g_w[j][i] / n;
                weights[j][i] += v_w[j][i];
            }
        }
        if alpha.alpha.iter().chain(&bias).any(|x| !x.is_finite()) {
            return Err(TrainingError::Diverged(epoch).into());
        }
    }
    let (_, weights, bias, alpha) = best.expect("at least one epoch is evaluated");
    Ok(TfidfLtnModel {
        vectorizer,
        weights,
        bias,
        alpha,
        backend,
        loss_curve: curve,
    })
}
