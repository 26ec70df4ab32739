//! Single-call model baseline: the model sees the predicate criteria and the
//! opening excerpts and answers valid or not, with a confidence.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::EvalError;
use crate::corpus::{chunk_document, ChunkConfig, Document};
use crate::llm::{CompletionRequest, LlmClient};
use crate::predicates::PredicateDef;
use crate::prompts::PromptSet;

/// Excerpts shown to the model, counted from the start of the document.
pub const DIRECT_MAX_EXCERPTS: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectDecision {
    pub doc_id: String,
    pub label: u8,
    pub is_valid_offer: bool,
    pub confidence: f64,
    /// Set when no valid answer came back; the label is then 0.
    #[serde(default)]
    pub failed: bool,
    pub calls: usize,
}

pub fn validate_direct(v: &Value) -> Result<(), String> {
    parse_direct(v).map(|_| ())
}

fn parse_direct(v: &Value) -> Result<(bool, f64), String> {
    let valid = v
        .get("is_valid_offer")
        .and_then(Value::as_bool)
        .ok_or("missing boolean `is_valid_offer`")?;
    let confidence = v
        .get("confidence")
        .and_then(Value::as_f64)
        .ok_or("missing numeric `confidence`")?;
    if !(0.0..=1.0).contains(&confidence) {
        return Err(format!("`confidence` {confidence} outside [0, 1]"));
    }
    Ok((valid, confidence))
}

/// Label 1 iff the model says valid with confidence at least 0.5.
pub fn llm_direct_decide(
    doc: &Document,
    client: &LlmClient,
    prompts: &PromptSet,
    defs: &[PredicateDef],
    chunking: ChunkConfig,
    seed: u64,
) -> Result<DirectDecision, EvalError> {
    let criteria = defs
        .iter()
        .map(|d| format!("- {}: {}", d.name, d.description))
        .collect::<Vec<_>>()
        .join("\n");
    let chunks = chunk_document(doc, chunking)?
        .into_iter()
        .take(DIRECT_MAX_EXCERPTS)
        .map(|c| format!("[excerpt {}]\n{}", c.index, c.text.trim()))
        .collect::<Vec<_>>()
        .join("\n\n");
    let vars = [("criteria", criteria.as_str()), ("chunks", chunks.as_str())];
    let request = CompletionRequest::new(
        prompts.render("direct_system", &vars)?,
        prompts.render("direct_user", &vars)?,
        seed,
    );
    Ok(match client.complete_json(&request, &validate_direct) {
        Ok(outcome) => {
            let (valid, confidence) = parse_direct(&outcome.value).expect("validated answers parse");
            let score = if valid { confidence } else { 0.0 };
            DirectDecision {
                doc_id: doc.id.clone(),
                label: u8::from(score >= 0.5),
                is_valid_offer: valid,
                confidence,
                failed: false,
                calls: outcome.calls.len(),
            }
        }
        Err(e) => DirectDecision {
            doc_id: doc.id.clone(),
            label: 0,
            is_valid_offer: false,
            confidence: 0.0,
            failed: true,
            calls: e.calls.len(),
        },
    })
}
