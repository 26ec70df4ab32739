//! Pattern-matching predicate baseline. A strong pattern hit scores 1, a weak
//! hit 0.5, no hit 0. Patterns may be restricted to the document head.

use std::collections::BTreeMap;
use std::path::Path;

use regex::Regex;
use serde::Deserialize;

use super::EvalError;
use crate::corpus::{chunk_document, ChunkConfig, Document};
use crate::ltn::GateParams;
use crate::predicates::{EstimateMethod, PredicateEstimate, PredicateKey};

/// Fixed gate logit of the IE pipeline (`σ(4) ≈ 0.982`).
pub const IE_GATE_ALPHA: f64 = 4.0;

pub fn ie_gates() -> GateParams {
    GateParams::uniform(IE_GATE_ALPHA)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Strength {
    Strong,
    Weak,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Zone {
    #[default]
    Any,
    Head,
}

#[derive(Deserialize)]
struct PatternSpec {
    pattern: String,
    strength: Strength,
    #[serde(default)]
    zone: Zone,
}

#[derive(Deserialize)]
struct PatternFile {
    head_chars: usize,
    predicates: BTreeMap<PredicateKey, Vec<PatternSpec>>,
}

#[derive(Debug, Clone)]
struct Rule {
    regex: Regex,
    score: f64,
    zone: Zone,
}

#[derive(Debug, Clone)]
pub struct IePatternBank {
    head_chars: usize,
    rules: BTreeMap<PredicateKey, Vec<Rule>>,
}

impl IePatternBank {
    pub fn embedded() -> Self {
        Self::from_json(include_str!("../../assets/ie_patterns.json")).expect("bundled IE patterns are valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EvalError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| EvalError::Patterns(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        let file: PatternFile = serde_json::from_str(text).map_err(|e| EvalError::Patterns(e.to_string()))?;
        let mut rules = BTreeMap::new();
        for (key, specs) in file.predicates {
            let compiled = specs
                .into_iter()
                .map(|s| {
                    Ok(Rule {
                        regex: Regex::new(&s.pattern)
                            .map_err(|e| EvalError::Patterns(format!("{key}: {e}")))?,
                        score: match s.strength {
                            Strength::Strong => 1.0,
                            Strength::Weak => 0.5,
                        },
                        zone: s.zone,
                    })
                })
                .collect::<Result<Vec<_>, EvalError>>()?;
            rules.insert(key, compiled);
        }
        Ok(Self {
            head_chars: file.head_chars,
            rules,
        })
    }

    /// Best score for `key` and the character offset of the hit achieving it.
    pub fn score(&self, key: PredicateKey, text: &str) -> (f64, Option<usize>) {
        let head_end = text
            .char_indices()
            .nth(self.head_chars)
            .map_or(text.len(), |(b, _)| b);
        let mut best = (0.0, None);
        for rule in self.rules.get(&key).map(Vec::as_slice).unwrap_or(&[]) {
            if rule.score <= best.0 {
                continue;
            }
            let haystack = match rule.zone {
                Zone::Any => text,
                Zone::Head => &text[..head_end],
            };
            if let Some(m) = rule.regex.find(haystack) {
                best = (rule.score, Some(text[..m.start()].chars().count()));
            }
        }
        best
    }
}

/// Pattern-based estimates for all eight predicates. Evidence is the chunk
/// holding the deciding hit.
pub fn ie_predicates(
    doc: &Document,
    bank: &IePatternBank,
    chunking: ChunkConfig,
) -> Result<Vec<PredicateEstimate>, EvalError> {
    let chunks = chunk_document(doc, chunking)?;
    Ok(PredicateKey::ALL
        .iter()
        .map(|&key| {
            let (value, at) = bank.score(key, &doc.text);
            let mut est = PredicateEstimate::scalar(doc.id.clone(), key, EstimateMethod::Ie, value);
            if let Some(pos) = at {
                est.evidence_chunks = chunks
                    .iter()
                    .filter(|c| c.start <= pos && pos < c.end)
                    .take(1)
                    .map(|c| c.chunk_ref())
                    .collect();
            }
            est
        })
        .collect())
}
