use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::corpus::ChunkRef;

/// One binary judgement of one chunk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vote {
    pub chunk: ChunkRef,
    pub vote: u8,
    pub confidence: f64,
}

/// Confidence-weighted mean of the votes, or `None` when there is nothing to
/// weigh (no votes, or all confidences zero).
pub fn cisc_aggregate(votes: &[Vote]) -> Option<f64> {
    let total: f64 = votes.iter().map(|v| v.confidence).sum();
    if votes.is_empty() || total <= 0.0 {
        return None;
    }
    let yes: f64 = votes.iter().map(|v| v.confidence * f64::from(v.vote)).sum();
    Some((yes / total).clamp(0.0, 1.0))
}

pub(crate) fn parse_cisc(v: &Value) -> Result<(u8, f64), String> {
    let vote = match v.get("vote") {
        Some(Value::Bool(b)) => u8::from(*b),
        Some(x) => match x.as_u64() {
            Some(n @ (0 | 1)) => n as u8,
            _ => return Err(format!("`vote` must be 0 or 1, got {x}")),
        },
        None => return Err("missing `vote`".into()),
    };
    let confidence = v
        .get("confidence")
        .and_then(Value::as_f64)
        .ok_or("missing numeric `confidence`")?;
    if !(0.0..=1.0).contains(&confidence) {
        return Err(format!("`confidence` {confidence} outside [0, 1]"));
    }
    Ok((vote, confidence))
}

pub(crate) fn validate_cisc(v: &Value) -> Result<(), String> {
    parse_cisc(v).map(|_| ())
}
