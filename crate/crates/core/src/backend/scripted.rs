//! Deterministic scripted backend for offline runs and tests.
//!
//! Rules come from a JSONL script: each line holds a `match` clause plus the
//! `response` to return. A rule matches when every string in
//! `prompt_contains` appears in the request prompt, or when `digest` equals
//! the request digest exactly. First matching rule wins; a `fallback` line
//! (no `match`) catches everything else. Unmatched requests are errors, which
//! keeps tests honest about exactly what the pipeline asks for.

use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{request_digest, Backend, CompletionRequest};

/// One scripted stimulus-response rule.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScriptRule {
    #[serde(rename = "match")]
    pub matcher: Matcher,
    pub response: String,
}

/// What a rule matches on.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Matcher {
    /// All strings must occur in the request prompt.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_contains: Option<Vec<String>>,
    /// Exact request digest (see [`request_digest`]).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub digest: Option<String>,
}

#[derive(Deserialize)]
struct RawLine {
    #[serde(rename = "match")]
    matcher: Option<Matcher>,
    #[serde(default)]
    fallback: Option<bool>,
    response: String,
}

/// Backend that replies from a fixed rule list and logs every request.
pub struct ScriptedBackend {
    model: String,
    rules: Vec<ScriptRule>,
    fallback: Option<String>,
    calls: AtomicUsize,
    log: Mutex<Vec<CompletionRequest>>,
}

impl ScriptedBackend {
    pub fn new(model: impl Into<String>, rules: Vec<ScriptRule>, fallback: Option<String>) -> Self {
        ScriptedBackend {
            model: model.into(),
            rules,
            fallback,
            calls: AtomicUsize::new(0),
            log: Mutex::new(Vec::new()),
        }
    }

    /// Load rules from a JSONL script file.
    pub fn from_script(model: impl Into<String>, path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut rules = Vec::new();
        let mut fallback = None;
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let raw: RawLine = serde_json::from_str(line).map_err(|e| Error::ScriptLine {
                path: path.to_path_buf(),
                line: idx + 1,
                message: e.to_string(),
            })?;
            match (raw.matcher, raw.fallback) {
                (Some(matcher), _) => rules.push(ScriptRule {
                    matcher,
                    response: raw.response,
                }),
                (None, Some(true)) => fallback = Some(raw.response),
                (None, _) => {
                    return Err(Error::ScriptLine {
                        path: path.to_path_buf(),
                        line: idx + 1,
                        message: "line has neither a match clause nor fallback: true".to_string(),
                    })
                }
            }
        }
        Ok(ScriptedBackend::new(model, rules, fallback))
    }

    /// Every request received so far, in order.
    pub fn request_log(&self) -> Vec<CompletionRequest> {
        self.log.lock().expect("log lock").clone()
    }

    fn matches(&self, rule: &ScriptRule, request: &CompletionRequest) -> bool {
        if let Some(needles) = &rule.matcher.prompt_contains {
            if !needles.iter().all(|n| request.prompt.contains(n)) {
                return false;
            }
        }
        if let Some(digest) = &rule.matcher.digest {
            if *digest != request_digest(&self.model, request) {
                return false;
            }
        }
        rule.matcher.prompt_contains.is_some() || rule.matcher.digest.is_some()
    }
}

impl Backend for ScriptedBackend {
    fn model(&self) -> &str {
        &self.model
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.log.lock().expect("log lock").push(request.clone());
        for rule in &self.rules {
            if self.matches(rule, request) {
                return Ok(rule.response.clone());
            }
        }
        if let Some(fallback) = &self.fallback {
            return Ok(fallback.clone());
        }
        Err(Error::UnscriptedRequest {
            digest: request_digest(&self.model, request),
        })
    }

    fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}
