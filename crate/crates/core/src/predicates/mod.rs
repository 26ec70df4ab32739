//! The predicate layer: predicate definitions, LLM-based estimation (MCSR and
//! CISC), the ground-truth oracle for synthetic documents, and the mapping of
//! eight predicate estimates onto the eleven decision-layer channels.

mod channels;
mod cisc;
mod extractor;
mod mcsr;
mod oracle;

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ChunkRef;

pub use channels::{to_channels, Channel, ChannelVector, CHANNEL_COUNT, POSITIVE_CHANNELS};
pub use cisc::{cisc_aggregate, Vote};
pub use extractor::{ExtractionMethod, Extractor, ExtractorConfig};
pub use mcsr::{mcsr_bestconf_value, mcsr_topprob_value, mcsr_winner, normalize_masses, McsrVariant};
pub use oracle::oracle_estimates;

#[derive(Debug, Error)]
pub enum PredicateError {
    #[error("no estimate for predicate {0}")]
    MissingPredicate(PredicateKey),
    #[error("more than one estimate for predicate {0}")]
    DuplicatePredicate(PredicateKey),
    #[error("estimates belong to different documents ({0} and {1})")]
    MixedDocuments(String, String),
    #[error("channel {index} value {value} outside [0, 1]")]
    ChannelRange { index: usize, value: f64 },
    #[error("document `{0}` is not synthetic; ground-truth predicates are unavailable")]
    NotSynthetic(String),
    #[error("malformed synthetic metadata on `{doc}`: {message}")]
    SyntheticMeta { doc: String, message: String },
    #[error("unknown predicate key `{0}`")]
    UnknownKey(String),
    #[error("estimates file {path}: {message}")]
    File { path: String, message: String },
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
    #[error(transparent)]
    Retrieval(#[from] crate::retrieval::RetrievalError),
    #[error(transparent)]
    Prompt(#[from] crate::prompts::PromptError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PredicateKey {
    Title,
    Number,
    Validity,
    Reservation,
    Payment,
    Delivery,
    Contact,
    NotOffer,
}

impl PredicateKey {
    pub const ALL: [PredicateKey; 8] = [
        PredicateKey::Title,
        PredicateKey::Number,
        PredicateKey::Validity,
        PredicateKey::Reservation,
        PredicateKey::Payment,
        PredicateKey::Delivery,
        PredicateKey::Contact,
        PredicateKey::NotOffer,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PredicateKey::Title => "TITLE",
            PredicateKey::Number => "NUMBER",
            PredicateKey::Validity => "VALIDITY",
            PredicateKey::Reservation => "RESERVATION",
            PredicateKey::Payment => "PAYMENT",
            PredicateKey::Delivery => "DELIVERY",
            PredicateKey::Contact => "CONTACT",
            PredicateKey::NotOffer => "NOT_OFFER",
        }
    }
}

impl fmt::Display for PredicateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PredicateKey {
    type Err = PredicateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PredicateKey::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| PredicateError::UnknownKey(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateDef {
    pub key: PredicateKey,
    pub name: String,
    pub description: String,
    pub query: String,
    pub class_descriptions: [String; 3],
    pub binary_question: String,
}

/// The eight predicate definitions shipped in `assets/predicates.json`.
pub fn default_predicate_defs() -> Vec<PredicateDef> {
    let defs: Vec<PredicateDef> = serde_json::from_str(include_str!("../../assets/predicates.json"))
        .expect("bundled predicate definitions are valid");
    debug_assert_eq!(defs.len(), PredicateKey::ALL.len());
    defs
}

/// Loads predicate definitions from a JSON file, requiring exactly one
/// definition per key.
pub fn load_predicate_defs(path: impl AsRef<Path>) -> Result<Vec<PredicateDef>, PredicateError> {
    let path = path.as_ref();
    let err = |message: String| PredicateError::File {
        path: path.display().to_string(),
        message,
    };
    let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    let defs: Vec<PredicateDef> = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
    let keys: BTreeSet<PredicateKey> = defs.iter().map(|d| d.key).collect();
    if defs.len() != PredicateKey::ALL.len() || keys.len() != defs.len() {
        return Err(err("expected exactly one definition for each of the 8 predicates".into()));
    }
    Ok(defs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EstimateMethod {
    McsrBestconf,
    McsrTopprob,
    Cisc,
    Ie,
    Oracle,
}

impl EstimateMethod {
    pub fn is_mcsr(self) -> bool {
        matches!(self, EstimateMethod::McsrBestconf | EstimateMethod::McsrTopprob)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateFlag {
    /// Every model call for this estimate failed; the value is the absence
    /// default.
    ExtractionFailed,
    /// Nothing was retrieved or every vote carried zero confidence.
    NoEvidence,
    /// Some (not all) CISC votes were dropped after failed calls.
    VoteSkipped,
}

/// Soft truth value of one predicate on one document, with provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredicateEstimate {
    pub doc_id: String,
    #[serde(rename = "predicate")]
    pub key: PredicateKey,
    pub method: EstimateMethod,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_masses: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub votes: Option<Vec<Vote>>,
    pub evidence_chunks: Vec<ChunkRef>,
    /// Passages the model quoted as evidence (MCSR only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub evidence_spans: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<EstimateFlag>,
}

impl PredicateEstimate {
    pub fn scalar(doc_id: impl Into<String>, key: PredicateKey, method: EstimateMethod, value: f64) -> Self {
        Self {
            doc_id: doc_id.into(),
            key,
            method,
            value,
            class_masses: None,
            votes: None,
            evidence_chunks: Vec::new(),
            evidence_spans: Vec::new(),
            flags: Vec::new(),
        }
    }

    pub fn has_flag(&self, flag: EstimateFlag) -> bool {
        self.flags.contains(&flag)
    }

    pub(crate) fn flag(&mut self, flag: EstimateFlag) {
        if !self.flags.contains(&flag) {
            self.flags.push(flag);
            self.flags.sort();
        }
    }
}

pub fn write_estimates(path: impl AsRef<Path>, estimates: &[PredicateEstimate]) -> Result<(), PredicateError> {
    let path = path.as_ref();
    let err = |e: std::io::Error| PredicateError::File {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let mut out = std::io::BufWriter::new(fs::File::create(path).map_err(err)?);
    for e in estimates {
        let line = serde_json::to_string(e).expect("estimates serialize");
        writeln!(out, "{line}").map_err(err)?;
    }
    out.flush().map_err(err)
}

pub fn read_estimates(path: impl AsRef<Path>) -> Result<Vec<PredicateEstimate>, PredicateError> {
    let path = path.as_ref();
    let err = |message: String| PredicateError::File {
        path: path.display().to_string(),
        message,
    };
    let file = fs::File::open(path).map_err(|e| err(e.to_string()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| err(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let est: PredicateEstimate =
            serde_json::from_str(&line).map_err(|e| err(format!("line {}: {e}", i + 1)))?;
        if !(0.0..=1.0).contains(&est.value) {
            return Err(err(format!("line {}: value {} outside [0, 1]", i + 1, est.value)));
        }
        out.push(est);
    }
    Ok(out)
}
