//! Replay cache: record completions once, replay them forever.
//!
//! The cache is an append-only JSONL file keyed by request digest. Wrapping
//! any backend in [`CachedBackend`] makes repeated runs free and exactly
//! reproducible: a warm cache serves every request without touching the
//! upstream backend at all.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{request_digest, Backend, CompletionRequest};

#[derive(Debug, Serialize, Deserialize)]
struct CacheLine {
    digest: String,
    model: String,
    response: String,
}

/// On-disk store of completed requests, keyed by digest.
pub struct ReplayCache {
    path: PathBuf,
    entries: Mutex<BTreeMap<String, String>>,
}

impl ReplayCache {
    /// Open (or create) a cache file, loading any existing entries.
    pub fn open(path: &Path) -> Result<Self> {
        let mut entries = BTreeMap::new();
        match fs::read_to_string(path) {
            Ok(text) => {
                for (idx, line) in text.lines().enumerate() {
                    if line.trim().is_empty() {
                        continue;
                    }
                    let parsed: CacheLine =
                        serde_json::from_str(line).map_err(|_| Error::CacheLine {
                            path: path.to_path_buf(),
                            line: idx + 1,
                        })?;
                    // Later lines win, so re-recorded entries supersede old ones.
                    entries.insert(parsed.digest, parsed.response);
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(source) => {
                return Err(Error::Io {
                    path: path.to_path_buf(),
                    source,
                })
            }
        }
        Ok(ReplayCache {
            path: path.to_path_buf(),
            entries: Mutex::new(entries),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, digest: &str) -> Option<String> {
        self.entries.lock().expect("cache lock").get(digest).cloned()
    }

    /// Record one completion, appending to the file immediately.
    pub fn put(&self, digest: &str, model: &str, response: &str) -> Result<()> {
        let line = CacheLine {
            digest: digest.to_string(),
            model: model.to_string(),
            response: response.to_string(),
        };
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|source| Error::Io {
                path: self.path.clone(),
                source,
            })?;
        let mut bytes = serde_json::to_vec(&line).expect("cache line serializes");
        bytes.push(b'\n');
        file.write_all(&bytes).map_err(|source| Error::Io {
            path: self.path.clone(),
            source,
        })?;
        self.entries
            .lock()
            .expect("cache lock")
            .insert(digest.to_string(), response.to_string());
        Ok(())
    }
}

/// Backend wrapper that answers from a [`ReplayCache`] when possible and
/// records upstream completions when not.
pub struct CachedBackend<B> {
    upstream: B,
    cache: ReplayCache,
    hits: AtomicUsize,
    misses: AtomicUsize,
}

impl<B: Backend> CachedBackend<B> {
    pub fn new(upstream: B, cache: ReplayCache) -> Self {
        CachedBackend {
            upstream,
            cache,
            hits: AtomicUsize::new(0),
            misses: AtomicUsize::new(0),
        }
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }

    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::SeqCst)
    }

    /// Upstream calls actually made (equals misses).
    pub fn upstream_calls(&self) -> usize {
        self.upstream.calls()
    }
}

impl<B: Backend> Backend for CachedBackend<B> {
    fn model(&self) -> &str {
        self.upstream.model()
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String> {
        let digest = request_digest(self.upstream.model(), request);
        if let Some(response) = self.cache.get(&digest) {
            self.hits.fetch_add(1, Ordering::SeqCst);
            return Ok(response);
        }
        let response = self.upstream.complete(request)?;
        self.cache.put(&digest, self.upstream.model(), &response)?;
        self.misses.fetch_add(1, Ordering::SeqCst);
        Ok(response)
    }

    /// Completions served, from cache or upstream.
    fn calls(&self) -> usize {
        self.hits() + self.misses()
    }
}
