//! Repeated k-fold runner. Every fold trains (gates, heads, threshold) from its
//! training split only; reads go through [`Guarded`], which refuses ids outside
//! the split it was opened for and logs every id it hands out.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::folds::FoldPlan;
use super::metrics::{compute_metrics, summarize, Metrics, MetricsSummary};
use super::tfidf::{train_tfidf_ltn, TfidfConfig};
use super::EvalError;
use crate::corpus::Document;
use crate::fuzzy::FuzzyBackend;
use crate::ltn::GateParams;
use crate::par;
use crate::predicates::{ChannelVector, CHANNEL_COUNT};
use crate::training::{calibrate_threshold, score_all, train_gates, TrainConfig};

/// Read-only view of a per-document map restricted to an allowed id set.
pub struct Guarded<'a, V> {
    inner: &'a BTreeMap<String, V>,
    allowed: BTreeSet<&'a str>,
    log: RefCell<Vec<String>>,
}

impl<'a, V> Guarded<'a, V> {
    pub fn new(inner: &'a BTreeMap<String, V>, allowed: &'a [String]) -> Self {
        Self {
            inner,
            allowed: allowed.iter().map(String::as_str).collect(),
            log: RefCell::new(Vec::new()),
        }
    }

    pub fn get(&self, id: &str) -> Result<&'a V, EvalError> {
        if !self.allowed.contains(id) {
            return Err(EvalError::Leakage(id.to_string()));
        }
        self.log.borrow_mut().push(id.to_string());
        self.inner.get(id).ok_or_else(|| EvalError::MissingDocument(id.to_string()))
    }

    /// Ids handed out so far, in access order.
    pub fn accessed(&self) -> Vec<String> {
        self.log.borrow().clone()
    }
}

/// What a fold trains and scores.
#[derive(Debug, Clone)]
pub enum PipelineSpec {
    /// Precomputed channels; gates trained per fold.
    Trained {
        channels: BTreeMap<String, ChannelVector>,
        backend: FuzzyBackend,
        train: TrainConfig,
    },
    /// Precomputed channels under fixed gates; only the threshold is fitted.
    FixedGates {
        channels: BTreeMap<String, ChannelVector>,
        gates: GateParams,
        backend: FuzzyBackend,
    },
    /// TF-IDF heads and gates trained per fold from the document texts.
    TfidfLtn {
        backend: FuzzyBackend,
        train: TrainConfig,
        tfidf: TfidfConfig,
    },
    /// Labels decided up front; nothing is fitted.
    Direct { labels: BTreeMap<String, u8> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub rep: usize,
    pub fold: usize,
    pub seed: u64,
    pub metrics: Metrics,
    pub threshold: Option<f64>,
    pub alpha: Option<[f64; CHANNEL_COUNT]>,
    /// Every id read while fitting this fold.
    #[serde(skip)]
    pub training_access: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<FoldResult>,
    pub summary: MetricsSummary,
}

/// Runs every fold of `plan`. Fold results come back in plan order whatever
/// `jobs` is.
pub fn run_cv(docs: &[Document], spec: &PipelineSpec, plan: &FoldPlan, jobs: usize) -> Result<CvReport, EvalError> {
    let mut labels = BTreeMap::new();
    let mut texts = BTreeMap::new();
    for d in docs {
        let y = d.label.ok_or_else(|| EvalError::Unlabeled(d.id.clone()))?;
        labels.insert(d.id.clone(), y);
        texts.insert(d.id.clone(), d.text.clone());
    }
    for rep in &plan.assignments {
        if rep.len() != labels.len() || rep.keys().any(|id| !labels.contains_key(id)) {
            return Err(EvalError::Folds("the fold plan does not cover exactly the corpus".into()));
        }
    }
    let empty = BTreeMap::new();
    let channels = match spec {
        PipelineSpec::Trained { channels, .. } | PipelineSpec::FixedGates { channels, .. } => channels,
        _ => &empty,
    };
    let folds = par::try_map(&plan.folds(), jobs, |&(rep, fold)| {
        run_fold(spec, channels, &texts, &labels, plan, rep, fold)
    })?;
    let summary = summarize(&folds.iter().map(|f| f.metrics).collect::<Vec<_>>());
    Ok(CvReport { folds, summary })
}

type Scorer<'a> = Box<dyn Fn(&str) -> Result<f64, EvalError> + 'a>;

fn run_fold(
    spec: &PipelineSpec,
    channels: &BTreeMap<String, ChannelVector>,
    texts: &BTreeMap<String, String>,
    labels: &BTreeMap<String, u8>,
    plan: &FoldPlan,
    rep: usize,
    fold: usize,
) -> Result<FoldResult, EvalError> {
    let seed = plan.fold_seed(rep, fold);
    let train_ids = plan.train_ids(rep, fold);
    let test_ids = plan.test_ids(rep, fold);

    let train_labels = Guarded::new(labels, &train_ids);
    let train_channels = Guarded::new(channels, &train_ids);
    let train_texts = Guarded::new(texts, &train_ids);
    let y_train: Vec<u8> = train_ids
        .iter()
        .map(|id| train_labels.get(id).copied())
        .collect::<Result<_, _>>()?;
    let train_vectors = |g: &Guarded<'_, ChannelVector>| -> Result<Vec<ChannelVector>, EvalError> {
        train_ids.iter().map(|id| g.get(id).copied()).collect()
    };

    // Fitting only ever sees the training guards.
    let mut threshold = None;
    let mut alpha = None;
    let scorer: Scorer<'_>;
    let test_channels = Guarded::new(channels, &test_ids);
    let test_texts = Guarded::new(texts, &test_ids);
    match spec {
        PipelineSpec::Trained { backend, train, .. } => {
            let xs = train_vectors(&train_channels)?;
            let cfg = TrainConfig { seed, ..*train };
            let model = train_gates(&xs, &y_train, *backend, &cfg)?;
            threshold = Some(calibrate_threshold(&score_all(&xs, &model.alpha, *backend), &y_train)?);
            alpha = Some(model.alpha.alpha);
            let (gates, backend) = (model.alpha, *backend);
            scorer = Box::new(move |id| Ok(crate::ltn::o_base(test_channels.get(id)?, &gates, backend)));
        }
        PipelineSpec::FixedGates { gates, backend, .. } => {
            let xs = train_vectors(&train_channels)?;
            threshold = Some(calibrate_threshold(&score_all(&xs, gates, *backend), &y_train)?);
            alpha = Some(gates.alpha);
            let (gates, backend) = (*gates, *backend);
            scorer = Box::new(move |id| Ok(crate::ltn::o_base(test_channels.get(id)?, &gates, backend)));
        }
        PipelineSpec::TfidfLtn { backend, train, tfidf } => {
            let docs: Vec<&str> = train_ids
                .iter()
                .map(|id| train_texts.get(id).map(String::as_str))
                .collect::<Result<_, _>>()?;
            let model = train_tfidf_ltn(&docs, &y_train, *backend, train, tfidf, seed)?;
            let scores: Vec<f64> = docs.iter().map(|t| model.score(t)).collect();
            threshold = Some(calibrate_threshold(&scores, &y_train)?);
            alpha = Some(model.alpha.alpha);
            scorer = Box::new(move |id| Ok(model.score(test_texts.get(id)?)));
        }
        PipelineSpec::Direct { labels: predicted } => {
            let predicted = Guarded::new(predicted, &test_ids);
            scorer = Box::new(move |id| predicted.get(id).map(|&p| f64::from(p)));
        }
    }
    let cut = threshold.unwrap_or(0.5);

    let test_labels = Guarded::new(labels, &test_ids);
    let mut predictions = Vec::with_capacity(test_ids.len());
    let mut truth = Vec::with_capacity(test_ids.len());
    for id in &test_ids {
        predictions.push(u8::from(scorer(id)? >= cut));
        truth.push(*test_labels.get(id)?);
    }
    let mut training_access = train_labels.accessed();
    training_access.extend(train_channels.accessed());
    training_access.extend(train_texts.accessed());
    Ok(FoldResult {
        rep,
        fold,
        seed,
        metrics: compute_metrics(&predictions, &truth)?,
        threshold,
        alpha,
        training_access,
    })
}

/// Per-fold row of the results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub rep: usize,
    pub fold: usize,
    pub seed: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<[f64; CHANNEL_COUNT]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub mean: Metrics,
    pub std: Metrics,
    pub folds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsFile {
    pub config_hash: String,
    pub seed: u64,
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backend: Option<FuzzyBackend>,
    pub per_fold: Vec<FoldRecord>,
    pub summary: SummaryRecord,
}

pub fn results_file(
    report: &CvReport,
    config_hash: &str,
    seed: u64,
    method: &str,
    backend: Option<FuzzyBackend>,
) -> ResultsFile {
    ResultsFile {
        config_hash: config_hash.to_string(),
        seed,
        method: method.to_string(),
        backend,
        per_fold: report
            .folds
            .iter()
            .map(|f| FoldRecord {
                rep: f.rep,
                fold: f.fold,
                seed: f.seed,
                precision: f.metrics.precision,
                recall: f.metrics.recall,
                f1: f.metrics.f1,
                accuracy: f.metrics.accuracy,
                threshold: f.threshold,
                alpha: f.alpha,
            })
            .collect(),
        summary: SummaryRecord {
            mean: report.summary.mean,
            std: report.summary.std,
            folds: report.summary.folds,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic_corpus, ChunkConfig};
    use crate::evaluation::make_fold_plan;
    use crate::predicates::{oracle_estimates, to_channels};

    fn setup(n: usize) -> (Vec<Document>, FoldPlan, BTreeMap<String, ChannelVector>) {
        let docs = generate_synthetic_corpus(n, 0.35, 7).unwrap();
        let labels: Vec<(String, u8)> = docs.iter().map(|d| (d.id.clone(), d.label.unwrap())).collect();
        let plan = make_fold_plan(&labels, 5, 2, 7).unwrap();
        let channels = docs
            .iter()
            .map(|d| {
                let est = oracle_estimates(d, ChunkConfig::default()).unwrap();
                (d.id.clone(), to_channels(&est).unwrap())
            })
            .collect();
        (docs, plan, channels)
    }

    #[test]
    fn guard_refuses_and_logs() {
        let map: BTreeMap<String, u8> = [("a".to_string(), 1), ("b".to_string(), 0)].into();
        let allowed = vec!["a".to_string()];
        let g = Guarded::new(&map, &allowed);
        assert_eq!(*g.get("a").unwrap(), 1);
        assert!(matches!(g.get("b"), Err(EvalError::Leakage(id)) if id == "b"));
        assert_eq!(g.accessed(), vec!["a".to_string()]);
    }

    #[test]
    fn training_reads_only_training_ids() {
        let (docs, plan, channels) = setup(60);
        let spec = PipelineSpec::Trained {
            channels,
            backend: FuzzyBackend::Product,
            train: TrainConfig { epochs: 20, ..TrainConfig::default() },
        };
        let report = run_cv(&docs, &spec, &plan, 1).unwrap();
        assert_eq!(report.folds.len(), 10);
        for f in &report.folds {
            let test: BTreeSet<String> = plan.test_ids(f.rep, f.fold).into_iter().collect();
            assert!(!f.training_access.is_empty());
            assert!(f.training_access.iter().all(|id| !test.contains(id)));
        }
    }

    #[test]
    fn all_positive_pipeline_matches_class_balance() {
        let (docs, plan, _) = setup(100);
        let labels = docs.iter().map(|d| (d.id.clone(), 1)).collect();
        let report = run_cv(&docs, &PipelineSpec::Direct { labels }, &plan, 1).unwrap();
        let expected = 2.0 * 7.0 / (2.0 * 7.0 + 13.0);
        for f in &report.folds {
            assert!((f.metrics.f1 - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let (docs, plan, channels) = setup(60);
        let spec = PipelineSpec::Trained {
            channels,
            backend: FuzzyBackend::Lukasiewicz,
            train: TrainConfig { epochs: 15, ..TrainConfig::default() },
        };
        let a = run_cv(&docs, &spec, &plan, 1).unwrap();
        let b = run_cv(&docs, &spec, &plan, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unlabeled_corpus_is_rejected() {
        let (mut docs, plan, _) = setup(30);
        docs[3].label = None;
        let spec = PipelineSpec::Direct { labels: BTreeMap::new() };
        assert!(matches!(run_cv(&docs, &spec, &plan, 1), Err(EvalError::Unlabeled(_))));
    }
}
