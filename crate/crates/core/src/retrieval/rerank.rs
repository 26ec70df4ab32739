use serde_json::Value;
use thiserror::Error;

use super::token_set;
use crate::llm::{CompletionRequest, LlmClient};
use crate::prompts::PromptSet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RerankError {
    #[error("reranker backend failed: {0}")]
    Backend(String),
}

/// Second-stage relevance scorer. Scores are clamped to `[0, 1]` by the caller.
pub trait Reranker: Send + Sync {
    fn score(
        &self,
        query: &str,
        query_tokens: &[String],
        chunk_text: &str,
        chunk_tokens: &[String],
    ) -> Result<f64, RerankError>;

    /// Whether `score` may be called from several threads at once. Callers
    /// serialize access to rerankers that return `false`.
    fn concurrent_safe(&self) -> bool {
        true
    }
}

/// `|Q ∩ C| / |Q ∪ C|` over token sets; 0 when both are empty.
pub fn jaccard_rerank(query_tokens: &[String], chunk_tokens: &[String]) -> f64 {
    let q = token_set(query_tokens);
    let c = token_set(chunk_tokens);
    let union = q.union(&c).count();
    if union == 0 {
        return 0.0;
    }
    q.intersection(&c).count() as f64 / union as f64
}

#[derive(Debug, Clone, Copy, Default)]
pub struct JaccardReranker;

impl Reranker for JaccardReranker {
    fn score(&self, _: &str, query_tokens: &[String], _: &str, chunk_tokens: &[String]) -> Result<f64, RerankError> {
        Ok(jaccard_rerank(query_tokens, chunk_tokens))
    }
}

/// Asks the model for a relevance score in `[0, 1]`.
pub struct CrossEncoderReranker {
    client: LlmClient,
    prompts: PromptSet,
    seed: u64,
}

impl CrossEncoderReranker {
    pub fn new(client: LlmClient, prompts: PromptSet, seed: u64) -> Self {
        Self { client, prompts, seed }
    }
}

fn validate_score(v: &Value) -> Result<(), String> {
    match v.get("score").and_then(Value::as_f64) {
        Some(s) if (0.0..=1.0).contains(&s) => Ok(()),
        Some(s) => Err(format!("score {s} outside [0, 1]")),
        None => Err("missing numeric `score`".into()),
    }
}

impl Reranker for CrossEncoderReranker {
    fn score(&self, query: &str, _: &[String], chunk_text: &str, _: &[String]) -> Result<f64, RerankError> {
        let render = |name: &str| {
            self.prompts
                .render(name, &[("query", query), ("chunk", chunk_text)])
                .map_err(|e| RerankError::Backend(e.to_string()))
        };
        let request = CompletionRequest::new(render("rerank_system")?, render("rerank_user")?, self.seed);
        let outcome = self
            .client
            .complete_json(&request, &validate_score)
            .map_err(|e| RerankError::Backend(e.to_string()))?;
        Ok(outcome.value["score"].as_f64().unwrap_or(0.0))
    }
}
