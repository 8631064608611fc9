//! Chat-model backends.
//!
//! Everything upstream of the optimizer goes through the [`Backend`] trait, so
//! an experiment can run against a live HTTP endpoint, a deterministic
//! scripted stand-in, or a replay cache without changing any pipeline code.

mod cache;
mod http;
mod scripted;
mod template;

pub use cache::{CachedBackend, ReplayCache};
pub use http::{HttpBackend, HttpConfig, RetrySchedule};
pub use scripted::{Matcher, ScriptRule, ScriptedBackend};
pub use template::fill_template;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Sampling parameters sent with every completion request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
}

impl Default for GenParams {
    /// Greedy decoding with a short budget — the right default for scoring.
    fn default() -> Self {
        GenParams {
            temperature: 0.0,
            top_p: 1.0,
            max_tokens: 100,
        }
    }
}

/// One single-turn completion request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub params: GenParams,
}

impl CompletionRequest {
    pub fn new(prompt: impl Into<String>, params: GenParams) -> Self {
        CompletionRequest {
            prompt: prompt.into(),
            params,
        }
    }
}

/// A chat model that completes single-turn prompts.
///
/// Implementations must be shareable across threads and count every upstream
/// request they make (cache hits do not count as upstream calls).
pub trait Backend: Send + Sync {
    /// Model identifier, included in cache digests.
    fn model(&self) -> &str;

    /// Complete one request, returning the assistant text.
    fn complete(&self, request: &CompletionRequest) -> Result<String>;

    /// Number of completions served so far (after any caching).
    fn calls(&self) -> usize;
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn model(&self) -> &str {
        (**self).model()
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String> {
        (**self).complete(request)
    }

    fn calls(&self) -> usize {
        (**self).calls()
    }
}

/// Convenience wrapper: build the request and return the trimmed completion.
pub fn complete_text(backend: &dyn Backend, prompt: &str, params: GenParams) -> Result<String> {
    let request = CompletionRequest::new(prompt, params);
    Ok(backend.complete(&request)?.trim().to_string())
}

/// Content digest of a request against a given model: hex SHA-256 of the
/// canonical JSON of `(model, prompt, params)`.
///
/// Used as the replay-cache key and for script rules that pin an exact request.
pub fn request_digest(model: &str, request: &CompletionRequest) -> String {
    use sha2::{Digest, Sha256};
    let canonical = serde_json::json!({
        "model": model,
        "prompt": request.prompt,
        "params": {
            "temperature": request.params.temperature,
            "top_p": request.params.top_p,
            "max_tokens": request.params.max_tokens,
        },
    });
    let bytes = serde_json::to_vec(&canonical).expect("digest payload serializes");
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    hex::encode(hasher.finalize())
}
