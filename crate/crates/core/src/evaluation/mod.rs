//! Cross-validation harness, metrics and the baseline pipelines.

pub mod cv;
pub mod direct;
pub mod folds;
pub mod ie;
pub mod metrics;
pub mod tfidf;

use thiserror::Error;

pub use cv::{results_file, run_cv, CvReport, FoldRecord, FoldResult, Guarded, PipelineSpec, ResultsFile, SummaryRecord};
pub use direct::{llm_direct_decide, validate_direct, DirectDecision, DIRECT_MAX_EXCERPTS};
pub use folds::{fold_seed, make_fold_plan, FoldPlan};
pub use ie::{ie_gates, ie_predicates, IePatternBank, IE_GATE_ALPHA};
pub use metrics::{compute_metrics, summarize, Confusion, Metrics, MetricsSummary};
pub use tfidf::{train_tfidf_ltn, TfidfConfig, TfidfLtnModel, TfidfVectorizer};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("fold plan: {0}")]
    Folds(String),
    #[error("{0} predictions but {1} labels")]
    LengthMismatch(usize, usize),
    #[error("document `{0}` was consulted outside its allowed split")]
    Leakage(String),
    #[error("document `{0}` has no label")]
    Unlabeled(String),
    #[error("no data for document `{0}`")]
    MissingDocument(String),
    #[error("IE patterns: {0}")]
    Patterns(String),
    #[error("the training texts produce an empty vocabulary")]
    EmptyVocabulary,
    #[error(transparent)]
    Training(#[from] crate::training::TrainingError),
    #[error(transparent)]
    Ltn(#[from] crate::ltn::LtnError),
    #[error(transparent)]
    Predicate(#[from] crate::predicates::PredicateError),
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
    #[error(transparent)]
    Prompt(#[from] crate::prompts::PromptError),
}
