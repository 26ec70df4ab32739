use std::collections::{BTreeMap, VecDeque};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{request_hash, ChatBackend, CompletionRequest, CompletionResponse, LlmError, ModelEndpoint};

/// Counting semaphore capping in-flight requests.
struct Semaphore {
    permits: Mutex<usize>,
    available: Condvar,
}

impl Semaphore {
    fn new(permits: usize) -> Self {
        Self {
            permits: Mutex::new(permits.max(1)),
            available: Condvar::new(),
        }
    }

    fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut n = self.permits.lock().unwrap();
        while *n == 0 {
            n = self.available.wait(n).unwrap();
        }
        *n -= 1;
        SemaphoreGuard(self)
    }
}

struct SemaphoreGuard<'a>(&'a Semaphore);

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        *self.0.permits.lock().unwrap() += 1;
        self.0.available.notify_one();
    }
}

/// Live chat-completion server.
pub struct HttpBackend {
    in_flight: Semaphore,
}

impl HttpBackend {
    pub fn new(max_in_flight: usize) -> Self {
        Self {
            in_flight: Semaphore::new(max_in_flight),
        }
    }
}

impl Default for HttpBackend {
    fn default() -> Self {
        Self::new(4)
    }
}

impl ChatBackend for HttpBackend {
    fn complete(
        &self,
        endpoint: &ModelEndpoint,
        request: &CompletionRequest,
    ) -> Result<CompletionResponse, LlmError> {
        endpoint.validate()?;
        let _permit = self.in_flight.acquire();
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(endpoint.timeout()))
            .http_status_as_error(false)
            .build()
            .into();
        let url = format!("{}/chat/completions", endpoint.base_url.trim_end_matches('/'));
        let body = json!({
            "model": endpoint.model_name,
            "messages": [
                {"role": "system", "content": request.system},
                {"role": "user", "content": request.user},
            ],
            "temperature": endpoint.temperature,
            "max_tokens": endpoint.max_tokens,
            "seed": request.seed,
        });
        let started = Instant::now();
        let mut response = agent
            .post(&url)
            .send_json(&body)
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(LlmError::Status { status });
        }
        let payload: Value = response
            .body_mut()
            .read_json()
            .map_err(|e| LlmError::Protocol(format!("unreadable response body: {e}")))?;
        let choice = payload
            .get("choices")
            .and_then(|c| c.get(0))
            .ok_or_else(|| LlmError::Protocol("response has no choices".into()))?;
        let text = choice
            .pointer("/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| LlmError::Protocol("choice has no message content".into()))?;
        Ok(CompletionResponse {
            text: text.trim().to_string(),
            finish_reason: choice
                .get("finish_reason")
                .and_then(Value::as_str)
                .map(str::to_string),
            latency_ms: started.elapsed().as_millis() as u64,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptPrompt {
    pub system: String,
    pub user: String,
    pub seed: u64,
}

/// One line of a transcript file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub request_hash: String,
    pub endpoint: String,
    pub prompt: TranscriptPrompt,
    /// `None` when the upstream call failed; `error` then holds the reason.
    pub response: Option<String>,
    pub attempt: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl TranscriptEntry {
    fn new(
        endpoint: &ModelEndpoint,
        request: &CompletionRequest,
        result: &Result<CompletionResponse, LlmError>,
    ) -> Self {
        Self {
            request_hash: request_hash(endpoint, request),
            endpoint: endpoint.model_name.clone(),
            prompt: TranscriptPrompt {
                system: request.system.clone(),
                user: request.user.clone(),
                seed: request.seed,
            },
            response: result.as_ref().ok().map(|r| r.text.clone()),
            attempt: request.attempt,
            error: result.as_ref().err().map(|e| e.to_string()),
        }
    }
}

pub fn read_transcript(path: &Path) -> Result<Vec<TranscriptEntry>, LlmError> {
    let file = fs::File::open(path)
        .map_err(|e| LlmError::Transcript(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| LlmError::Transcript(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry = serde_json::from_str(&line)
            .map_err(|e| LlmError::Transcript(format!("{} line {}: {e}", path.display(), i + 1)))?;
        out.push(entry);
    }
    Ok(out)
}

/// Answers requests from a recorded transcript. Read-only, so fully parallel.
pub struct ReplayBackend {
    responses: BTreeMap<String, Result<String, String>>,
}

impl ReplayBackend {
    pub fn from_entries(entries: impl IntoIterator<Item = TranscriptEntry>) -> Self {
        let mut responses = BTreeMap::new();
        for e in entries {
            let outcome = match e.response {
                Some(text) => Ok(text),
                None => Err(e.error.unwrap_or_else(|| "recorded failure".into())),
            };
            responses.entry(e.request_hash).or_insert(outcome);
        }
        Self { responses }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LlmError> {
        Ok(Self::from_entries(read_transcript(path.as_ref())?))
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl ChatBackend for ReplayBackend {
    fn complete(
        &self,
        endpoint: &ModelEndpoint,
        request: &CompletionRequest,
    ) -> Result<CompletionResponse, LlmError> {
        let hash = request_hash(endpoint, request);
        match self.responses.get(&hash) {
            Some(Ok(text)) => Ok(CompletionResponse::text(text.clone())),
            Some(Err(e)) => Err(LlmError::Transport(format!("replayed failure: {e}"))),
            None => Err(LlmError::ReplayMiss { hash }),
        }
    }
}

/// Forwards to an inner backend and records every call.
pub struct RecordingBackend<B> {
    inner: B,
    entries: Mutex<Vec<TranscriptEntry>>,
}

impl<B: ChatBackend> RecordingBackend<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            entries: Mutex::new(Vec::new()),
        }
    }

    /// Recorded entries ordered by (request hash, attempt), independent of
    /// the order in which concurrent calls completed.
    pub fn entries(&self) -> Vec<TranscriptEntry> {
        let mut entries = self.entries.lock().unwrap().clone();
        entries.sort_by(|a, b| {
            (a.request_hash.as_str(), a.attempt).cmp(&(b.request_hash.as_str(), b.attempt))
        });
        entries.dedup_by(|a, b| a.request_hash == b.request_hash);
        entries
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), LlmError> {
        let path = path.as_ref();
        let err = |e: std::io::Error| LlmError::Transcript(format!("{}: {e}", path.display()));
        let mut out = std::io::BufWriter::new(fs::File::create(path).map_err(err)?);
        for e in self.entries() {
            let line = serde_json::to_string(&e).expect("transcript entries serialize");
            writeln!(out, "{line}").map_err(err)?;
        }
        out.flush().map_err(err)
    }
}

impl<B: ChatBackend> ChatBackend for RecordingBackend<B> {
    fn complete(
        &self,
        endpoint: &ModelEndpoint,
        request: &CompletionRequest,
    ) -> Result<CompletionResponse, LlmError> {
        let result = self.inner.complete(endpoint, request);
        self.entries
            .lock()
            .unwrap()
            .push(TranscriptEntry::new(endpoint, request, &result));
        result
    }
}

#[derive(Debug, Clone)]
pub enum ScriptStep {
    Reply(String),
    Fail(LlmError),
}

/// Returns scripted replies in order and logs which model each call targeted.
pub struct ScriptedBackend {
    steps: Mutex<VecDeque<ScriptStep>>,
    calls: Mutex<Vec<(String, CompletionRequest)>>,
}

impl ScriptedBackend {
    pub fn new(steps: impl IntoIterator<Item = ScriptStep>) -> Self {
        Self {
            steps: Mutex::new(steps.into_iter().collect()),
            calls: Mutex::new(Vec::new()),
        }
    }

    pub fn replies<S: Into<String>>(replies: impl IntoIterator<Item = S>) -> Self {
        Self::new(replies.into_iter().map(|s| ScriptStep::Reply(s.into())))
    }

    /// `(model name, request)` for every call made so far.
    pub fn calls(&self) -> Vec<(String, CompletionRequest)> {
        self.calls.lock().unwrap().clone()
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(
        &self,
        endpoint: &ModelEndpoint,
        request: &CompletionRequest,
    ) -> Result<CompletionResponse, LlmError> {
        self.calls
            .lock()
            .unwrap()
            .push((endpoint.model_name.clone(), request.clone()));
        match self.steps.lock().unwrap().pop_front() {
            Some(ScriptStep::Reply(text)) => Ok(CompletionResponse::text(text)),
            Some(ScriptStep::Fail(e)) => Err(e),
            None => Err(LlmError::ScriptExhausted),
        }
    }
}

impl<T: ChatBackend + ?Sized> ChatBackend for Arc<T> {
    fn complete(
        &self,
        endpoint: &ModelEndpoint,
        request: &CompletionRequest,
    ) -> Result<CompletionResponse, LlmError> {
        (**self).complete(endpoint, request)
    }
}

/// Backend computed by a closure; useful for deterministic simulated models.
pub struct FnBackend<F>(pub F);

impl<F> ChatBackend for FnBackend<F>
where
    F: Fn(&ModelEndpoint, &CompletionRequest) -> Result<String, LlmError> + Send + Sync,
{
    fn complete(
        &self,
        endpoint: &ModelEndpoint,
        request: &CompletionRequest,
    ) -> Result<CompletionResponse, LlmError> {
        (self.0)(endpoint, request).map(CompletionResponse::text)
    }
}
