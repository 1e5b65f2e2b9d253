//! Structured calls: build a request, parse JSON, repair on malformed output.

use serde::de::DeserializeOwned;

use super::json::parse_completion;
use super::prompts::{REPAIR, SYSTEM};
use super::provider::{LlmProvider, ProviderError};
use crate::artifact::{ChatMessage, LlmRequest};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CallError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("unparseable completion after repairs: {error}")]
    Unparseable { raw: String, error: String },
}

pub const DEFAULT_MAX_TOKENS: u32 = 1024;

pub fn structured_request(user: String, hint: &str, temperature: f64, seed: Option<u64>) -> LlmRequest {
    LlmRequest {
        messages: vec![ChatMessage::system(SYSTEM.render(&[])), ChatMessage::user(user)],
        temperature,
        max_tokens: DEFAULT_MAX_TOKENS,
        response_format_hint: Some(hint.to_string()),
        seed,
    }
}

/// Completes `request` and parses its first JSON object, retrying up to
/// `max_repairs` times with a repair instruction appended.
pub fn complete_json<T: DeserializeOwned>(
    provider: &dyn LlmProvider,
    mut request: LlmRequest,
    max_repairs: u32,
) -> Result<(T, String), CallError> {
    let mut attempt = 0;
    loop {
        let raw = provider.complete(&request)?.content;
        match parse_completion::<T>(&raw) {
            Ok(v) => return Ok((v, raw)),
            Err(error) if attempt >= max_repairs => return Err(CallError::Unparseable { raw, error }),
            Err(error) => {
                request.messages.push(ChatMessage::assistant(raw));
                request.messages.push(ChatMessage::user(REPAIR.render(&[("error", &error)])));
                attempt += 1;
            }
        }
    }
}
