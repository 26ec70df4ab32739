//! Run configuration: one JSON document, filled in from defaults, then
//! overridden by `--set key=value` pairs.

use std::fmt;
use std::path::{Path, PathBuf};

use ltn_offer::corpus::ChunkConfig;
use ltn_offer::evaluation::TfidfConfig;
use ltn_offer::fuzzy::FuzzyBackend;
use ltn_offer::llm::{DEFAULT_FALLBACK_MODEL, DEFAULT_MODEL};
use ltn_offer::predicates::ExtractionMethod;
use ltn_offer::retrieval::{Bm25Params, RetrievalParams};
use ltn_offer::training::TrainConfig;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    McsrBestconf,
    McsrTopprob,
    Cisc,
    Ie,
    Oracle,
    TfidfLtn,
    LlmDirect,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::McsrBestconf => "mcsr_bestconf",
            Method::McsrTopprob => "mcsr_topprob",
            Method::Cisc => "cisc",
            Method::Ie => "ie",
            Method::Oracle => "oracle",
            Method::TfidfLtn => "tfidf_ltn",
            Method::LlmDirect => "llm_direct",
        }
    }

    /// The extractor method for model-backed predicate estimation.
    pub fn extraction(self) -> Option<ExtractionMethod> {
        match self {
            Method::McsrBestconf => Some(ExtractionMethod::McsrBestconf),
            Method::McsrTopprob => Some(ExtractionMethod::McsrTopprob),
            Method::Cisc => Some(ExtractionMethod::Cisc),
            _ => None,
        }
    }

    pub fn needs_model(self) -> bool {
        self.extraction().is_some() || self == Method::LlmDirect
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n: usize,
    pub positive_rate: f64,
    /// Defaults to the top-level seed.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSection {
    pub path: Option<PathBuf>,
    pub synthetic: Option<SyntheticSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RerankerKind {
    Jaccard,
    Llm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrievalSection {
    pub k1: f64,
    pub b: f64,
    pub top_lexical: usize,
    pub top_final: usize,
    pub reranker: RerankerKind,
}

impl Default for RetrievalSection {
    fn default() -> Self {
        let bm25 = Bm25Params::default();
        let r = RetrievalParams::default();
        Self {
            k1: bm25.k1,
            b: bm25.b,
            top_lexical: r.top_lexical,
            top_final: r.top_final,
            reranker: RerankerKind::Jaccard,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractionSection {
    pub samples_per_chunk: usize,
    /// Precomputed estimates (or direct decisions for `llm_direct`).
    pub estimates_path: Option<PathBuf>,
}

impl Default for ExtractionSection {
    fn default() -> Self {
        Self {
            samples_per_chunk: 3,
            estimates_path: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BackendChoice {
    One(FuzzyBackend),
    All(AllBackends),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AllBackends {
    All,
}

impl BackendChoice {
    pub fn backends(self) -> Vec<FuzzyBackend> {
        match self {
            BackendChoice::One(b) => vec![b],
            BackendChoice::All(_) => FuzzyBackend::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LtnSection {
    pub backend: BackendChoice,
}

impl Default for LtnSection {
    fn default() -> Self {
        Self {
            backend: BackendChoice::One(FuzzyBackend::Lukasiewicz),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvSection {
    pub k: usize,
    pub repetitions: usize,
}

impl Default for CvSection {
    fn default() -> Self {
        Self { k: 5, repetitions: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmSection {
    /// Falls back to `LTN_OFFER_LLM_URL`.
    pub base_url: Option<String>,
    pub model: String,
    pub fallback_model: Option<String>,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_secs: f64,
    pub max_in_flight: usize,
    pub max_attempts: u32,
    /// Serve every call from this transcript instead of a live endpoint.
    pub replay: Option<PathBuf>,
    /// Write a transcript of live calls here.
    pub record: Option<PathBuf>,
}

impl Default for LlmSection {
    fn default() -> Self {
        Self {
            base_url: None,
            model: DEFAULT_MODEL.to_string(),
            fallback_model: Some(DEFAULT_FALLBACK_MODEL.to_string()),
            temperature: 0.7,
            max_tokens: 1024,
            timeout_secs: 120.0,
            max_in_flight: 4,
            max_attempts: 3,
            replay: None,
            record: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub corpus: CorpusSection,
    pub method: Method,
    pub chunking: ChunkConfig,
    pub retrieval: RetrievalSection,
    pub extraction: ExtractionSection,
    pub ltn: LtnSection,
    pub train: TrainConfig,
    pub tfidf: TfidfConfig,
    pub cv: CvSection,
    pub output_dir: PathBuf,
    pub llm: LlmSection,
    pub prompts_dir: Option<PathBuf>,
    pub ie_patterns: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            corpus: CorpusSection::default(),
            method: Method::Oracle,
            chunking: ChunkConfig::default(),
            retrieval: RetrievalSection::default(),
            extraction: ExtractionSection::default(),
            ltn: LtnSection::default(),
            train: TrainConfig::default(),
            tfidf: TfidfConfig::default(),
            cv: CvSection::default(),
            output_dir: PathBuf::from("out"),
            llm: LlmSection::default(),
            prompts_dir: None,
            ie_patterns: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Read { path: String, message: String },
    #[error("config is not valid JSON: {0}")]
    Json(String),
    #[error("--set `{0}`: expected KEY=VALUE")]
    SetSyntax(String),
    #[error("--set `{key}`: `{segment}` is not an object")]
    SetPath { key: String, segment: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Deep merge; `overlay` wins on scalars and arrays.
fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// `a.b.c=value`; the value is read as JSON when it parses, else as a string.
pub fn apply_set(root: &mut Value, assignment: &str) -> Result<(), ConfigError> {
    let (key, raw) = assignment
        .split_once('=')
        .filter(|(k, _)| !k.trim().is_empty())
        .ok_or_else(|| ConfigError::SetSyntax(assignment.to_string()))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let segments: Vec<&str> = key.trim().split('.').collect();
    let mut node = root;
    for seg in &segments[..segments.len() - 1] {
        if node.is_null() {
            *node = Value::Object(Map::new());
        }
        let obj = node.as_object_mut().ok_or_else(|| ConfigError::SetPath {
            key: key.to_string(),
            segment: seg.to_string(),
        })?;
        node = obj.entry(seg.to_string()).or_insert(Value::Null);
    }
    if node.is_null() {
        *node = Value::Object(Map::new());
    }
    let obj = node.as_object_mut().ok_or_else(|| ConfigError::SetPath {
        key: key.to_string(),
        segment: segments[segments.len().saturating_sub(2)].to_string(),
    })?;
    obj.insert(segments[segments.len() - 1].to_string(), value);
    Ok(())
}

impl RunConfig {
    /// Defaults, then the file at `path` (if any), then each `--set`.
    pub fn load(path: Option<&Path>, sets: &[String]) -> Result<Self, ConfigError> {
        let mut root = serde_json::to_value(RunConfig::default()).expect("default config serializes");
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            let file: Value = serde_json::from_str(&text).map_err(|e| ConfigError::Json(e.to_string()))?;
            if !file.is_object() {
                return Err(ConfigError::Json("top level must be an object".into()));
            }
            merge(&mut root, file);
        }
        for s in sets {
            apply_set(&mut root, s)?;
        }
        let cfg: RunConfig = serde_json::from_value(root).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.corpus.path.is_some() && self.corpus.synthetic.is_some() {
            return bad("set either corpus.path or corpus.synthetic, not both".into());
        }
        if let Some(s) = &self.corpus.synthetic {
            if !(0.0..=1.0).contains(&s.positive_rate) {
                return bad(format!("corpus.synthetic.positive_rate {} must lie in [0, 1]", s.positive_rate));
            }
        }
        self.chunking.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.train.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.cv.k < 2 || self.cv.repetitions == 0 {
            return bad(format!("cv.k must be >= 2 and cv.repetitions >= 1, got {} and {}", self.cv.k, self.cv.repetitions));
        }
        if self.retrieval.top_final == 0 || self.retrieval.top_lexical == 0 {
            return bad("retrieval.top_lexical and retrieval.top_final must be positive".into());
        }
        if !(self.retrieval.k1 >= 0.0 && (0.0..=1.0).contains(&self.retrieval.b)) {
            return bad("retrieval.k1 must be >= 0 and retrieval.b in [0, 1]".into());
        }
        if self.llm.max_attempts == 0 || self.llm.max_in_flight == 0 {
            return bad("llm.max_attempts and llm.max_in_flight must be positive".into());
        }
        Ok(())
    }

    pub fn synthetic_seed(&self) -> Option<u64> {
        self.corpus.synthetic.as_ref().map(|s| s.seed.unwrap_or(self.seed))
    }

    /// SHA-256 of the canonical JSON form, leaving out where outputs go and
    /// where transcripts are recorded.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("output_dir");
        }
        if let Some(llm) = v.get_mut("llm").and_then(Value::as_object_mut) {
            llm.remove("record");
        }
        hex::encode(Sha256::digest(v.to_string().as_bytes()))
    }
}
