use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::{ChatBackend, CompletionRequest, ModelEndpoint};

/// Appended to the user prompt on every retry after an unusable answer.
pub const CORRECTIVE_INSTRUCTION: &str =
    "Your previous output was not valid JSON matching the required schema. Output ONLY the JSON object.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct JsonCallPolicy {
    pub max_attempts: u32,
}

impl Default for JsonCallPolicy {
    fn default() -> Self {
        Self { max_attempts: 3 }
    }
}

/// Raw record of one upstream call made while obtaining a JSON value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub endpoint: String,
    pub attempt: u32,
    pub prompt: String,
    pub response: Option<String>,
    /// Why the call did not produce an accepted value, if it did not.
    pub rejection: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JsonOutcome {
    pub value: Value,
    pub calls: Vec<CallRecord>,
    pub used_fallback: bool,
}

#[derive(Debug, Clone, Error, PartialEq)]
#[error("no usable JSON after {} calls", calls.len())]
pub struct ExtractionError {
    pub calls: Vec<CallRecord>,
}

/// Pulls a JSON object out of model output: the whole text if it parses,
/// otherwise the span from the first `{` to the last `}` (covers code fences
/// and chatty preambles).
pub fn extract_json(text: &str) -> Result<Value, String> {
    let trimmed = text.trim();
    if let Ok(v) = serde_json::from_str::<Value>(trimmed) {
        return Ok(v);
    }
    let (Some(start), Some(end)) = (trimmed.find('{'), trimmed.rfind('}')) else {
        return Err("no JSON object in output".into());
    };
    if end < start {
        return Err("no JSON object in output".into());
    }
    serde_json::from_str(&trimmed[start..=end]).map_err(|e| format!("invalid JSON: {e}"))
}

/// Model client with JSON-validity retries and a one-time fallback model.
#[derive(Clone)]
pub struct LlmClient {
    backend: Arc<dyn ChatBackend>,
    primary: ModelEndpoint,
    fallback: Option<ModelEndpoint>,
    policy: JsonCallPolicy,
}

impl LlmClient {
    pub fn new(
        backend: Arc<dyn ChatBackend>,
        primary: ModelEndpoint,
        fallback: Option<ModelEndpoint>,
        policy: JsonCallPolicy,
    ) -> Self {
        Self {
            backend,
            primary,
            fallback,
            policy: JsonCallPolicy {
                max_attempts: policy.max_attempts.max(1),
            },
        }
    }

    pub fn primary(&self) -> &ModelEndpoint {
        &self.primary
    }

    pub fn fallback(&self) -> Option<&ModelEndpoint> {
        self.fallback.as_ref()
    }

    pub fn backend(&self) -> &dyn ChatBackend {
        self.backend.as_ref()
    }

    /// Up to `max_attempts` calls to the primary endpoint, each retry carrying
    /// [`CORRECTIVE_INSTRUCTION`] and a shifted sampling seed; after that at
    /// most one call to the fallback endpoint with the original prompt.
    /// Returns the first value that parses and passes `validate`.
    pub fn complete_json(
        &self,
        request: &CompletionRequest,
        validate: &dyn Fn(&Value) -> Result<(), String>,
    ) -> Result<JsonOutcome, ExtractionError> {
        let mut calls = Vec::new();
        for attempt in 1..=self.policy.max_attempts {
            let mut req = request.clone();
            req.attempt = attempt;
            if attempt > 1 {
                req.user = format!("{}\n\n{}", request.user, CORRECTIVE_INSTRUCTION);
                req.seed = request.seed.wrapping_add(u64::from(attempt - 1));
            }
            if let Some(value) = self.try_call(&self.primary, &req, validate, &mut calls) {
                return Ok(JsonOutcome {
                    value,
                    calls,
                    used_fallback: false,
                });
            }
        }
        if let Some(fallback) = &self.fallback {
            let mut req = request.clone();
            req.attempt = self.policy.max_attempts + 1;
            if let Some(value) = self.try_call(fallback, &req, validate, &mut calls) {
                return Ok(JsonOutcome {
                    value,
                    calls,
                    used_fallback: true,
                });
            }
        }
        Err(ExtractionError { calls })
    }

    fn try_call(
        &self,
        endpoint: &ModelEndpoint,
        req: &CompletionRequest,
        validate: &dyn Fn(&Value) -> Result<(), String>,
        calls: &mut Vec<CallRecord>,
    ) -> Option<Value> {
        let mut record = CallRecord {
            endpoint: endpoint.model_name.clone(),
            attempt: req.attempt,
            prompt: req.user.clone(),
            response: None,
            rejection: None,
        };
        let accepted = match self.backend.complete(endpoint, req) {
            Err(e) => {
                record.rejection = Some(e.to_string());
                None
            }
            Ok(resp) => {
                let parsed = extract_json(&resp.text).and_then(|v| validate(&v).map(|()| v));
                record.response = Some(resp.text);
                match parsed {
                    Ok(v) => Some(v),
                    Err(why) => {
                        record.rejection = Some(why);
                        None
                    }
                }
            }
        };
        calls.push(record);
        accepted
    }
}
