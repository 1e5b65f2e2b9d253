//! Chat-completion providers: an HTTP client for OpenAI-style endpoints and
//! a scripted stub that replays fixtures keyed by prompt hash.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::artifact::codec::{canonical_json, sha256_hex};
use crate::artifact::{ChatMessage, LlmRequest, LlmResponse, Role, TokenUsage, Validate};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProviderError {
    #[error("provider unavailable: {0}")]
    Unavailable(String),
    #[error("no fixture for prompt hash {0}")]
    FixtureMiss(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("malformed provider response: {0}")]
    Malformed(String),
}

pub trait LlmProvider: Send + Sync {
    fn id(&self) -> &str;

    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, ProviderError>;

    /// Cheap reachability check bounded by `timeout`.
    fn probe(&self, _timeout: Duration) -> bool {
        true
    }
}

/// Hex SHA-256 of the canonical JSON encoding of the messages.
pub fn prompt_hash(messages: &[ChatMessage]) -> String {
    let value = serde_json::to_value(messages).unwrap_or(Value::Null);
    sha256_hex(canonical_json(&value).as_bytes())
}

fn rough_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StubReply {
    One(String),
    /// Chosen by `seed % len`, so seeded samples can differ.
    Many(Vec<String>),
}

/// A prompt the stub had no fixture for.
#[derive(Debug, Clone, PartialEq)]
pub struct FixtureMissRecord {
    pub hash: String,
    pub hint: Option<String>,
    pub messages: Vec<ChatMessage>,
    pub seed: Option<u64>,
}

/// Deterministic provider replaying completions from a fixture map.
#[derive(Debug, Default)]
pub struct StubProvider {
    fixtures: HashMap<String, StubReply>,
    misses: Mutex<Vec<FixtureMissRecord>>,
}

impl StubProvider {
    pub fn new(fixtures: HashMap<String, StubReply>) -> Self {
        Self {
            fixtures,
            misses: Mutex::new(Vec::new()),
        }
    }

    /// Fixture file: JSON object mapping prompt hash → completion string or
    /// list of completions.
    pub fn from_file(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let fixtures =
            serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        Ok(Self::new(fixtures))
    }

    pub fn insert(&mut self, hash: impl Into<String>, reply: StubReply) {
        self.fixtures.insert(hash.into(), reply);
    }

    pub fn fixtures(&self) -> &HashMap<String, StubReply> {
        &self.fixtures
    }

    /// Prompts requested so far without a fixture.
    pub fn misses(&self) -> Vec<FixtureMissRecord> {
        self.misses.lock().map(|m| m.clone()).unwrap_or_default()
    }
}

impl LlmProvider for StubProvider {
    fn id(&self) -> &str {
        "stub"
    }

    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, ProviderError> {
        request
            .validate()
            .map_err(|e| ProviderError::InvalidRequest(e.to_string()))?;
        let hash = prompt_hash(&request.messages);
        let content = match self.fixtures.get(&hash) {
            Some(StubReply::One(s)) => s.clone(),
            Some(StubReply::Many(list)) if !list.is_empty() => {
                list[(request.seed.unwrap_or(0) % list.len() as u64) as usize].clone()
            }
            _ => {
                if let Ok(mut m) = self.misses.lock() {
                    m.push(FixtureMissRecord {
                        hash: hash.clone(),
                        hint: request.response_format_hint.clone(),
                        messages: request.messages.clone(),
                        seed: request.seed,
                    });
                }
                return Err(ProviderError::FixtureMiss(hash));
            }
        };
        let prompt_tokens = request.messages.iter().map(|m| rough_tokens(&m.content)).sum();
        Ok(LlmResponse {
            usage: TokenUsage {
                prompt_tokens,
                completion_tokens: rough_tokens(&content),
            },
            content,
            provider_id: self.id().to_string(),
        })
    }
}

/// A provider that always fails, e.g. when none is configured.
#[derive(Debug, Clone, Default)]
pub struct UnavailableProvider;

impl LlmProvider for UnavailableProvider {
    fn id(&self) -> &str {
        "unavailable"
    }

    fn complete(&self, _request: &LlmRequest) -> Result<LlmResponse, ProviderError> {
        Err(ProviderError::Unavailable("no provider configured".into()))
    }

    fn probe(&self, _timeout: Duration) -> bool {
        false
    }
}

#[derive(Debug, Clone)]
pub struct HttpProviderConfig {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub model: String,
    pub call_timeout: Duration,
    /// Retries after the first attempt.
    pub retries: u32,
    /// First backoff delay; doubled after each retry.
    pub backoff_base: Duration,
}

impl HttpProviderConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            api_key: None,
            model: "gpt-4o-mini".into(),
            call_timeout: Duration::from_secs(60),
            retries: 3,
            backoff_base: Duration::from_secs(1),
        }
    }
}

/// Client for chat-completion endpoints speaking the messages/choices shape.
pub struct HttpProvider {
    config: HttpProviderConfig,
    agent: ureq::Agent,
}

enum Attempt {
    Retryable(String),
    Fatal(ProviderError),
}

impl HttpProvider {
    pub fn new(config: HttpProviderConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.call_timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { config, agent }
    }

    fn body(&self, request: &LlmRequest) -> Value {
        let messages: Vec<Value> = request
            .messages
            .iter()
            .map(|m| {
                let role = match m.role {
                    Role::System => "system",
                    Role::User => "user",
                    Role::Assistant => "assistant",
                };
                json!({"role": role, "content": m.content})
            })
            .collect();
        let mut body = json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        if let Some(seed) = request.seed {
            body["seed"] = json!(seed);
        }
        body
    }

    fn attempt(&self, body: &Value) -> Result<LlmResponse, Attempt> {
        let mut req = self.agent.post(&self.config.endpoint);
        if let Some(key) = &self.config.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(body).map_err(|e| Attempt::Retryable(e.to_string()))?;
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(Attempt::Retryable(format!("HTTP {status}")));
        }
        if status != 200 {
            return Err(Attempt::Fatal(ProviderError::Unavailable(format!("HTTP {status}"))));
        }
        let value: Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| Attempt::Fatal(ProviderError::Malformed(e.to_string())))?;
        let content = value
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| Attempt::Fatal(ProviderError::Malformed("missing choices[0].message.content".into())))?;
        let usage = |k: &str| value.pointer(&format!("/usage/{k}")).and_then(Value::as_u64).unwrap_or(0);
        Ok(LlmResponse {
            content: content.to_string(),
            provider_id: format!("http:{}", self.config.model),
            usage: TokenUsage {
                prompt_tokens: usage("prompt_tokens"),
                completion_tokens: usage("completion_tokens"),
            },
        })
    }
}

impl LlmProvider for HttpProvider {
    fn id(&self) -> &str {
        "http"
    }

    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, ProviderError> {
        request
            .validate()
            .map_err(|e| ProviderError::InvalidRequest(e.to_string()))?;
        let body = self.body(request);
        let mut delay = self.config.backoff_base;
        let mut last = String::new();
        for attempt in 0..=self.config.retries {
            if attempt > 0 {
                std::thread::sleep(delay);
                delay *= 2;
            }
            match self.attempt(&body) {
                Ok(r) => return Ok(r),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retryable(msg)) => {
                    tracing::debug!(attempt, error = %msg, "provider call failed");
                    last = msg;
                }
            }
        }
        Err(ProviderError::Unavailable(format!(
            "{} attempts failed, last error: {last}",
            self.config.retries + 1
        )))
    }

    fn probe(&self, timeout: Duration) -> bool {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        agent.get(&self.config.endpoint).call().is_ok()
    }
}

/// Fails fast once the wrapped provider has reported itself unavailable.
pub struct CircuitBreaker<'a> {
    inner: &'a dyn LlmProvider,
    open: AtomicBool,
}

impl<'a> CircuitBreaker<'a> {
    pub fn new(inner: &'a dyn LlmProvider) -> Self {
        Self {
            inner,
            open: AtomicBool::new(false),
        }
    }

    pub fn tripped(&self) -> bool {
        self.open.load(Ordering::SeqCst)
    }
}

impl LlmProvider for CircuitBreaker<'_> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, ProviderError> {
        if self.tripped() {
            return Err(ProviderError::Unavailable("circuit open after earlier failure".into()));
        }
        let result = self.inner.complete(request);
        if let Err(ProviderError::Unavailable(_)) = &result {
            self.open.store(true, Ordering::SeqCst);
        }
        result
    }

    fn probe(&self, timeout: Duration) -> bool {
        self.inner.probe(timeout)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request(text: &str, seed: Option<u64>) -> LlmRequest {
        LlmRequest {
            messages: vec![ChatMessage::user(text)],
            temperature: 0.0,
            max_tokens: 16,
            response_format_hint: None,
            seed,
        }
    }

    #[test]
    fn stub_replays_and_reports_misses() {
        let r = request("hello", None);
        let hash = prompt_hash(&r.messages);
        let mut stub = StubProvider::default();
        stub.insert(hash.clone(), StubReply::One("world".into()));
        assert_eq!(stub.complete(&r).unwrap().content, "world");
        let miss = stub.complete(&request("other", None)).unwrap_err();
        assert!(matches!(&miss, ProviderError::FixtureMiss(h) if h.len() == 64 && *h != hash));
        assert!(miss.to_string().contains("prompt hash"));
        assert_eq!(stub.misses().len(), 1);
    }

    #[test]
    fn stub_lists_are_indexed_by_seed() {
        let r = request("pick", Some(7));
        let mut stub = StubProvider::default();
        stub.insert(prompt_hash(&r.messages), StubReply::Many(vec!["a".into(), "b".into(), "c".into()]));
        assert_eq!(stub.complete(&r).unwrap().content, "b");
    }

    #[test]
    fn breaker_opens_on_unavailable() {
        let down = UnavailableProvider;
        let breaker = CircuitBreaker::new(&down);
        assert!(breaker.complete(&request("x", None)).is_err());
        assert!(breaker.tripped());
    }
}
