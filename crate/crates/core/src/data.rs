//! Dataset loading, splitting, sampling, and label corruption.
//!
//! Datasets live on disk as JSONL: one `{"input": ..., "output": ..., "meta": ...}`
//! object per line. A [`Manifest`] maps group names (e.g. `"yelp"`, `"flipkart"`)
//! to files plus the task-level facts the pipeline needs: the label space for
//! classification groups and which metric scores the task.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::task_metrics::normalize_answer;

/// One dataset record. `output` is `None` for unlabeled target inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    /// Stable identifier, `<group>:<line>` when the file does not carry one.
    pub id: String,
    pub input: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, serde_json::Value>,
}

impl Example {
    pub fn labeled(id: impl Into<String>, input: impl Into<String>, output: impl Into<String>) -> Self {
        Example {
            id: id.into(),
            input: input.into(),
            output: Some(output.into()),
            meta: BTreeMap::new(),
        }
    }

    pub fn unlabeled(id: impl Into<String>, input: impl Into<String>) -> Self {
        Example {
            id: id.into(),
            input: input.into(),
            output: None,
            meta: BTreeMap::new(),
        }
    }

    /// The label, or an error naming the example.
    pub fn require_output(&self) -> Result<&str> {
        self.output
            .as_deref()
            .ok_or_else(|| Error::UnlabeledExample { id: self.id.clone() })
    }
}

/// Which metric scores a task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Accuracy,
    TokenF1,
}

/// A named dataset with optional label space (classification) and its metric.
#[derive(Debug, Clone)]
pub struct Group {
    pub name: String,
    /// `Some` for classification groups; `None` for open-ended generation.
    pub label_space: Option<Vec<String>>,
    pub metric: MetricKind,
    pub examples: Vec<Example>,
}

impl Group {
    /// Label distribution over `label_space` with add-one smoothing.
    ///
    /// Every example must be labeled and every normalized label must sit in the
    /// normalized label space (guaranteed by [`load_group`] for loaded groups).
    pub fn label_distribution(&self) -> Result<BTreeMap<String, f64>> {
        let space = self
            .label_space
            .as_ref()
            .ok_or_else(|| Error::NoLabelSpace { group: self.name.clone() })?;
        let mut counts: BTreeMap<String, usize> =
            space.iter().map(|l| (normalize_answer(l), 0)).collect();
        for ex in &self.examples {
            let out = ex.output.as_deref().ok_or_else(|| Error::UnlabeledGroup {
                group: self.name.clone(),
            })?;
            *counts.entry(normalize_answer(out)).or_insert(0) += 1;
        }
        let total = self.examples.len() + counts.len();
        Ok(counts
            .into_iter()
            .map(|(label, c)| (label, (c + 1) as f64 / total as f64))
            .collect())
    }

    pub fn inputs(&self) -> Vec<&str> {
        self.examples.iter().map(|e| e.input.as_str()).collect()
    }
}

/// Manifest entry as written on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_space: Option<Vec<String>>,
    pub task_metric: MetricKind,
}

/// Collection of dataset groups, loaded from a JSON manifest.
#[derive(Debug, Clone)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
    /// Directory paths in entries are resolved against.
    base_dir: PathBuf,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let entries: Vec<ManifestEntry> =
            serde_json::from_str(&text).map_err(|e| Error::Manifest {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
        let base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Ok(Manifest { entries, base_dir })
    }

    pub fn entry(&self, name: &str) -> Result<&ManifestEntry> {
        self.entries
            .iter()
            .find(|e| e.name == name)
            .ok_or_else(|| Error::GroupNotFound { name: name.to_string() })
    }

    /// Load one group by name, validating labels against its label space.
    pub fn load_group(&self, name: &str) -> Result<Group> {
        let entry = self.entry(name)?;
        let path = if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            self.base_dir.join(&entry.path)
        };
        load_group(&path, &entry.name, entry.label_space.clone(), entry.task_metric)
    }
}

#[derive(Deserialize)]
struct RawExample {
    #[serde(default)]
    id: Option<String>,
    input: String,
    #[serde(default)]
    output: Option<String>,
    #[serde(default)]
    meta: BTreeMap<String, serde_json::Value>,
}

/// Read a JSONL dataset file into a [`Group`].
///
/// Missing ids become `<name>:<line>` (1-based). Labeled outputs of
/// classification groups must normalize into the label space; violations are
/// collected and reported together.
pub fn load_group(
    path: &Path,
    name: &str,
    label_space: Option<Vec<String>>,
    metric: MetricKind,
) -> Result<Group> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut examples = Vec::new();
    let mut seen = BTreeSet::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawExample = serde_json::from_str(line).map_err(|e| Error::ParseLine {
            path: path.to_path_buf(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        let id = raw.id.unwrap_or_else(|| format!("{}:{}", name, idx + 1));
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId {
                group: name.to_string(),
                id,
            });
        }
        if raw.input.trim().is_empty() {
            return Err(Error::EmptyInput { id });
        }
        examples.push(Example {
            id,
            input: raw.input,
            output: raw.output,
            meta: raw.meta,
        });
    }
    if examples.is_empty() {
        return Err(Error::EmptyFile {
            path: path.to_path_buf(),
        });
    }
    if let Some(space) = &label_space {
        let normalized: BTreeSet<String> = space.iter().map(|l| normalize_answer(l)).collect();
        let bad: Vec<String> = examples
            .iter()
            .filter(|e| {
                e.output
                    .as_deref()
                    .is_some_and(|o| !normalized.contains(&normalize_answer(o)))
            })
            .map(|e| e.id.clone())
            .collect();
        if !bad.is_empty() {
            return Err(Error::LabelValidation {
                group: name.to_string(),
                ids: bad,
            });
        }
    }
    Ok(Group {
        name: name.to_string(),
        label_space,
        metric,
        examples,
    })
}

/// Write examples back out as JSONL (one object per line).
pub fn write_jsonl(path: &Path, examples: &[Example]) -> Result<()> {
    let mut out = Vec::new();
    for ex in examples {
        serde_json::to_writer(&mut out, ex).expect("example serializes");
        out.push(b'\n');
    }
    let mut file = fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    file.write_all(&out).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// How to carve a group into a train pool and a validation pool.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Examples in the train pool; the rest become validation.
    pub train_size: usize,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_size: 1000,
            seed: 0,
        }
    }
}

/// A seeded shuffle-then-cut split.
///
/// Returns `(train, validation)`. The validation pool must be non-empty.
pub fn split_train_val(examples: &[Example], spec: SplitSpec) -> Result<(Vec<Example>, Vec<Example>)> {
    if examples.len() <= spec.train_size {
        return Err(Error::SplitTooSmall {
            size: examples.len(),
            train_size: spec.train_size,
        });
    }
    let mut shuffled = examples.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    shuffled.shuffle(&mut rng);
    let val = shuffled.split_off(spec.train_size);
    Ok((shuffled, val))
}

/// Sample `n` examples without replacement, in random order.
pub fn sample_shots(pool: &[Example], n: usize, seed: u64) -> Result<Vec<Example>> {
    if pool.len() < n {
        return Err(Error::PoolTooSmall {
            pool: "shot",
            have: pool.len(),
            need: n,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(rand::seq::index::sample(&mut rng, pool.len(), n)
        .into_iter()
        .map(|i| pool[i].clone())
        .collect())
}

/// Resample a set to exactly `target` items.
///
/// A smaller set grows by appending seeded with-replacement duplicates, with
/// the originals kept first and in order, so every input example appears at
/// least once. A larger set shrinks by seeded sampling without replacement.
pub fn upsample_to(examples: &[Example], target: usize, seed: u64) -> Result<Vec<Example>> {
    if examples.is_empty() {
        return Err(Error::NothingToUpsample);
    }
    if target < examples.len() {
        return sample_shots(examples, target, seed);
    }
    let mut out = examples.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    use rand::Rng;
    while out.len() < target {
        let idx = rng.gen_range(0..examples.len());
        out.push(examples[idx].clone());
    }
    Ok(out)
}

/// Replace the labels of a seeded subset with uniformly chosen *different* labels.
///
/// `fraction` of the examples, rounded half-up, get corrupted. The corrupted
/// subset is a prefix of one fixed seeded shuffle of the indices, so the sets
/// are nested across fractions under the same seed: everything corrupted at
/// 0.5 is still corrupted at 0.9.
pub fn corrupt_labels(
    examples: &[Example],
    label_space: &[String],
    fraction: f64,
    seed: u64,
) -> Result<Vec<Example>> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::CorruptLabels {
            message: format!("fraction {fraction} outside [0, 1]"),
        });
    }
    if label_space.len() < 2 {
        return Err(Error::CorruptLabels {
            message: "need at least 2 labels to corrupt".to_string(),
        });
    }
    let n = examples.len();
    let n_corrupt = (fraction * n as f64 + 0.5).floor() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut out = examples.to_vec();
    use rand::Rng;
    for &idx in order.iter().take(n_corrupt) {
        let current = out[idx].require_output()?.to_string();
        let current_norm = normalize_answer(&current);
        let alternatives: Vec<&String> = label_space
            .iter()
            .filter(|l| normalize_answer(l) != current_norm)
            .collect();
        if alternatives.is_empty() {
            return Err(Error::CorruptLabels {
                message: format!("no alternative label for '{current}'"),
            });
        }
        let pick = alternatives[rng.gen_range(0..alternatives.len())];
        out[idx].output = Some(pick.clone());
    }
    Ok(out)
}

/// Derive a sub-seed from a base seed and a short tag.
///
/// Keeps independent random streams (test split, shot sampling, upsampling...)
/// from colliding while remaining reproducible from one base seed.
pub fn derive_seed(base: u64, tag: &str) -> u64 {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    hasher.update(base.to_le_bytes());
    hasher.update(tag.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}
