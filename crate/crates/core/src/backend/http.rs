//! HTTP backend for OpenAI-compatible chat-completion endpoints.
//!
//! Sends `POST {endpoint}/chat/completions` with a single user message and
//! reads `choices[0].message.content` back. Transient failures (transport
//! errors, 429, 5xx) are retried on a fixed backoff schedule; other client
//! errors fail immediately. The API key is read from an environment variable
//! at construction time and never appears in logs or error messages.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Backend, CompletionRequest};

/// Fixed backoff schedule: one retry per delay, so `delays_ms.len() + 1`
/// attempts in total.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RetrySchedule {
    pub delays_ms: Vec<u64>,
}

impl Default for RetrySchedule {
    fn default() -> Self {
        RetrySchedule {
            delays_ms: vec![500, 1000, 2000, 4000],
        }
    }
}

/// Connection settings for [`HttpBackend`].
#[derive(Debug, Clone)]
pub struct HttpConfig {
    /// Base URL; `/chat/completions` is appended.
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub retry: RetrySchedule,
    /// Maximum concurrent in-flight requests.
    pub max_in_flight: usize,
    /// Per-request timeout.
    pub timeout: Duration,
}

impl HttpConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, api_key_env: impl Into<String>) -> Self {
        HttpConfig {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key_env: api_key_env.into(),
            retry: RetrySchedule::default(),
            max_in_flight: 4,
            timeout: Duration::from_secs(60),
        }
    }
}

/// Counting semaphore bounding concurrent requests.
struct Semaphore {
    permits: Mutex<usize>,
    available: Condvar,
}

impl Semaphore {
    fn new(permits: usize) -> Self {
        Semaphore {
            permits: Mutex::new(permits),
            available: Condvar::new(),
        }
    }

    fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut permits = self.permits.lock().expect("semaphore lock");
        while *permits == 0 {
            permits = self.available.wait(permits).expect("semaphore wait");
        }
        *permits -= 1;
        SemaphoreGuard { semaphore: self }
    }
}

struct SemaphoreGuard<'a> {
    semaphore: &'a Semaphore,
}

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        let mut permits = self.semaphore.permits.lock().expect("semaphore lock");
        *permits += 1;
        self.semaphore.available.notify_one();
    }
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatBody<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
    top_p: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: MessageOut,
}

#[derive(Deserialize)]
struct MessageOut {
    content: String,
}

/// Live chat-completion backend.
pub struct HttpBackend {
    config: HttpConfig,
    api_key: String,
    client: reqwest::blocking::Client,
    semaphore: Semaphore,
    calls: AtomicUsize,
}

impl HttpBackend {
    /// Build a backend, reading the API key from `config.api_key_env`.
    pub fn new(config: HttpConfig) -> Result<Self> {
        let api_key = std::env::var(&config.api_key_env).map_err(|_| Error::MissingApiKey {
            name: config.api_key_env.clone(),
        })?;
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| Error::Transport {
                attempts: 0,
                log: vec![format!("client construction: {e}")],
            })?;
        let semaphore = Semaphore::new(config.max_in_flight.max(1));
        Ok(HttpBackend {
            config,
            api_key,
            client,
            semaphore,
            calls: AtomicUsize::new(0),
        })
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.config.endpoint.trim_end_matches('/'))
    }

    /// One POST attempt. `Ok(Ok(text))` is success, `Ok(Err(note))` is a
    /// retriable failure, `Err(note)` is a permanent one. Notes never contain
    /// the API key: they are built only from status codes and transport error
    /// descriptions.
    fn attempt(&self, request: &CompletionRequest) -> std::result::Result<std::result::Result<String, String>, String> {
        let body = ChatBody {
            model: &self.config.model,
            messages: vec![ChatMessage {
                role: "user",
                content: &request.prompt,
            }],
            temperature: request.params.temperature,
            top_p: request.params.top_p,
            max_tokens: request.params.max_tokens,
        };
        let response = self
            .client
            .post(self.url())
            .bearer_auth(&self.api_key)
            .json(&body)
            .send();
        let response = match response {
            Ok(r) => r,
            // Transport-level failure: retriable.
            Err(e) => return Ok(Err(format!("transport: {}", sanitize(&e.to_string(), &self.api_key)))),
        };
        let status = response.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Ok(Err(format!("HTTP {}", status.as_u16())));
        }
        if !status.is_success() {
            return Err(format!("HTTP {}", status.as_u16()));
        }
        let parsed: ChatResponse = match response.json() {
            Ok(p) => p,
            Err(e) => return Err(format!("bad response body: {}", sanitize(&e.to_string(), &self.api_key))),
        };
        match parsed.choices.into_iter().next() {
            Some(choice) => Ok(Ok(choice.message.content)),
            None => Err("response had no choices".to_string()),
        }
    }
}

/// Belt-and-braces scrub: no error note may carry the key even if a library
/// ever echoes request details.
fn sanitize(message: &str, api_key: &str) -> String {
    if api_key.is_empty() {
        return message.to_string();
    }
    message.replace(api_key, "[redacted]")
}

impl Backend for HttpBackend {
    fn model(&self) -> &str {
        &self.config.model
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String> {
        let _permit = self.semaphore.acquire();
        self.calls.fetch_add(1, Ordering::SeqCst);
        let mut log = Vec::new();
        let max_attempts = self.config.retry.delays_ms.len() + 1;
        for attempt in 0..max_attempts {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(self.config.retry.delays_ms[attempt - 1]));
            }
            match self.attempt(request) {
                Ok(Ok(text)) => return Ok(text),
                Ok(Err(note)) => log.push(format!("attempt {}: {note}", attempt + 1)),
                Err(note) => {
                    log.push(format!("attempt {}: {note}", attempt + 1));
                    return Err(Error::Transport {
                        attempts: attempt + 1,
                        log,
                    });
                }
            }
        }
        Err(Error::Transport {
            attempts: max_attempts,
            log,
        })
    }

    fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}
