//! Shared fixtures for unit tests: a deterministic in-memory model and small
//! sentiment-style datasets.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::backend::{Backend, CompletionRequest};
use crate::data::{Example, Group, MetricKind};

/// Deterministic stand-in model.
///
/// Meta prompts (anything containing "The instruction is to") get numbered
/// instructions `decide sentiment v{n}`. Inference prompts are answered from
/// the input text: "bad" means negative, anything else positive — except for
/// instruction versions listed in `sycophants`, which always say positive.
pub struct TestModel {
    calls: AtomicUsize,
    meta_count: AtomicUsize,
    log: Mutex<Vec<String>>,
    pub sycophants: Vec<usize>,
}

impl TestModel {
    pub fn new(sycophants: Vec<usize>) -> Self {
        TestModel {
            calls: AtomicUsize::new(0),
            meta_count: AtomicUsize::new(0),
            log: Mutex::new(Vec::new()),
            sycophants,
        }
    }

    pub fn prompts(&self) -> Vec<String> {
        self.log.lock().unwrap().clone()
    }
}

impl Backend for TestModel {
    fn model(&self) -> &str {
        "test-model"
    }

    fn complete(&self, request: &CompletionRequest) -> crate::error::Result<String> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.log.lock().unwrap().push(request.prompt.clone());
        let p = &request.prompt;
        if p.contains("The instruction is to") {
            let n = self.meta_count.fetch_add(1, Ordering::SeqCst);
            return Ok(format!("decide sentiment v{n}"));
        }
        let version: Option<usize> = p
            .strip_prefix("decide sentiment v")
            .and_then(|rest| rest.split_whitespace().next())
            .and_then(|tok| tok.parse().ok());
        if let Some(v) = version {
            if self.sycophants.contains(&v) {
                return Ok("positive".to_string());
            }
        }
        if p.contains("bad") {
            Ok("negative".to_string())
        } else {
            Ok("positive".to_string())
        }
    }

    fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

/// A labeled sentiment group: even ids are "good ... positive", odd are
/// "bad ... negative".
pub fn sentiment_group(name: &str, n: usize) -> Group {
    Group {
        name: name.to_string(),
        label_space: Some(vec!["positive".to_string(), "negative".to_string()]),
        metric: MetricKind::Accuracy,
        examples: (0..n)
            .map(|i| {
                if i % 2 == 0 {
                    Example::labeled(format!("{name}:{i}"), format!("good {name} text {i}"), "positive")
                } else {
                    Example::labeled(format!("{name}:{i}"), format!("bad {name} text {i}"), "negative")
                }
            })
            .collect(),
    }
}

/// Unlabeled inputs in the same shape as [`sentiment_group`].
pub fn unlabeled_targets(n: usize) -> Vec<Example> {
    (0..n)
        .map(|i| {
            let tone = if i % 2 == 0 { "good" } else { "bad" };
            Example::unlabeled(format!("tgt:{i}"), format!("{tone} target text {i}"))
        })
        .collect()
}
