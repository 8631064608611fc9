//! Shared scaffolding for integration tests: deterministic sentiment-style
//! fixtures, a rule-driven stand-in model, and a minimal chat-completions
//! stub server.

use std::io::{Read as _, Write as _};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use promptgen_core::backend::{Backend, CompletionRequest};
use promptgen_core::data::{Example, Group, MetricKind};

/// Substring shared by every meta prompt (both standard templates end their
/// preamble with it), used to route meta requests in stand-in models.
pub const META_MARKER: &str = "The instruction is to";

/// A labeled sentiment group: even-indexed examples are "good {name} text {i}"
/// (positive), odd-indexed are "bad {name} text {i}" (negative).
pub fn sentiment_group(name: &str, n: usize) -> Group {
    Group {
        name: name.to_string(),
        label_space: Some(vec!["positive".to_string(), "negative".to_string()]),
        metric: MetricKind::Accuracy,
        examples: (0..n)
            .map(|i| {
                let (tone, label) = if i % 2 == 0 {
                    ("good", "positive")
                } else {
                    ("bad", "negative")
                };
                Example::labeled(
                    format!("{name}:{i}"),
                    format!("{tone} {name} text {i}"),
                    label,
                )
            })
            .collect(),
    }
}

/// Unlabeled inputs in the same shape as [`sentiment_group`].
pub fn unlabeled_inputs(name: &str, n: usize) -> Vec<Example> {
    (0..n)
        .map(|i| {
            let tone = if i % 2 == 0 { "good" } else { "bad" };
            Example::unlabeled(format!("{name}:{i}"), format!("{tone} {name} text {i}"))
        })
        .collect()
}

/// Reply logic shared by [`RuleModel`] and the stub server.
///
/// Meta prompts get numbered instructions `decide sentiment v{n}` (`n` from
/// `meta_seen`, advanced per meta request). Inference prompts are answered
/// from the input text — "bad" means negative, anything else positive —
/// except that instruction versions listed in `sycophants` always answer
/// positive, whatever the input says.
pub fn sentiment_reply(prompt: &str, sycophants: &[usize], meta_seen: &AtomicUsize) -> String {
    if prompt.contains(META_MARKER) {
        let n = meta_seen.fetch_add(1, Ordering::SeqCst);
        return format!("decide sentiment v{n}");
    }
    let version: Option<usize> = prompt
        .strip_prefix("decide sentiment v")
        .and_then(|rest| rest.split_whitespace().next())
        .and_then(|tok| tok.parse().ok());
    if let Some(v) = version {
        if sycophants.contains(&v) {
            return "positive".to_string();
        }
    }
    if prompt.contains("bad") {
        "negative".to_string()
    } else {
        "positive".to_string()
    }
}

/// Deterministic in-process stand-in model (see [`sentiment_reply`]).
pub struct RuleModel {
    sycophants: Vec<usize>,
    calls: AtomicUsize,
    meta_seen: AtomicUsize,
    log: Mutex<Vec<String>>,
}

impl RuleModel {
    pub fn new(sycophants: Vec<usize>) -> Self {
        RuleModel {
            sycophants,
            calls: AtomicUsize::new(0),
            meta_seen: AtomicUsize::new(0),
            log: Mutex::new(Vec::new()),
        }
    }

    /// A model with no sycophant instruction versions.
    pub fn honest() -> Self {
        Self::new(Vec::new())
    }

    /// Every prompt served so far, in request order.
    pub fn prompts(&self) -> Vec<String> {
        self.log.lock().unwrap().clone()
    }
}

impl Backend for RuleModel {
    fn model(&self) -> &str {
        "rule-model"
    }

    fn complete(&self, request: &CompletionRequest) -> promptgen_core::Result<String> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.log.lock().unwrap().push(request.prompt.clone());
        Ok(sentiment_reply(
            &request.prompt,
            &self.sycophants,
            &self.meta_seen,
        ))
    }

    fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

/// Spawn a chat-completions stub that answers every request through
/// [`sentiment_reply`] (honest variant). Returns the endpoint base URL and a
/// counter of requests actually served over the wire.
pub fn spawn_chat_server() -> (String, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind stub server");
    let addr = listener.local_addr().expect("stub server address");
    let hits = Arc::new(AtomicUsize::new(0));
    let hits_clone = hits.clone();
    std::thread::spawn(move || {
        let meta_seen = AtomicUsize::new(0);
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { break };
            hits_clone.fetch_add(1, Ordering::SeqCst);
            // Drain the request: headers, then content-length bytes.
            let mut buf = Vec::new();
            let mut byte = [0u8; 1];
            while !buf.ends_with(b"\r\n\r\n") && stream.read(&mut byte).map_or(false, |n| n > 0) {
                buf.push(byte[0]);
            }
            let headers = String::from_utf8_lossy(&buf);
            let content_length: usize = headers
                .lines()
                .find_map(|l| {
                    l.to_lowercase()
                        .strip_prefix("content-length:")
                        .map(|v| v.trim().parse().expect("content length"))
                })
                .unwrap_or(0);
            let mut body_buf = vec![0u8; content_length];
            stream.read_exact(&mut body_buf).ok();
            let request: serde_json::Value =
                serde_json::from_slice(&body_buf).unwrap_or(serde_json::Value::Null);
            let prompt = request["messages"][0]["content"].as_str().unwrap_or("");
            let content = sentiment_reply(prompt, &[], &meta_seen);
            let body = serde_json::json!({
                "choices": [{"message": {"role": "assistant", "content": content}}]
            })
            .to_string();
            let response = format!(
                "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(response.as_bytes()).ok();
        }
    });
    (format!("http://{addr}"), hits)
}
