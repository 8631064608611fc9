//! Crate-wide error type.

use std::path::PathBuf;

/// Convenience alias used throughout the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    // --- dataset ingestion ---
    #[error("{path}:{line}: malformed JSON line: {message}")]
    ParseLine {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("no examples in {path}")]
    EmptyFile { path: PathBuf },
    #[error("group '{group}': outputs not in label space after normalization: {ids:?}")]
    LabelValidation { group: String, ids: Vec<String> },
    #[error("group '{group}': duplicate example id '{id}'")]
    DuplicateId { group: String, id: String },
    #[error("example '{id}': input is empty")]
    EmptyInput { id: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("group '{name}' not found in manifest")]
    GroupNotFound { name: String },

    // --- splitting / sampling ---
    #[error("group has {size} examples but train_size is {train_size}; validation remainder would be empty")]
    SplitTooSmall { size: usize, train_size: usize },
    #[error("{pool} pool has {have} examples, need {need}")]
    PoolTooSmall {
        pool: &'static str,
        have: usize,
        need: usize,
    },
    #[error("nothing to upsample")]
    NothingToUpsample,
    #[error("corrupt_labels: {message}")]
    CorruptLabels { message: String },

    // --- shift metrics ---
    #[error("group '{group}' has unlabeled examples; label distribution undefined")]
    UnlabeledGroup { group: String },
    #[error("group '{group}' has no label space")]
    NoLabelSpace { group: String },
    #[error("label distributions have different key sets")]
    KeySetMismatch,
    #[error("rank correlation undefined: {side} rank vector has zero variance")]
    UndefinedCorrelation { side: &'static str },
    #[error("n-gram union over all corpora is empty")]
    EmptyNgramUnion,
    #[error("target corpus has no n-grams")]
    EmptyTargetNgrams,
    #[error("need at least {need} corpora, got {have}")]
    TooFewCorpora { need: usize, have: usize },
    #[error("corpus index {index} out of range for {len} corpora")]
    CorpusIndex { index: usize, len: usize },
    #[error("shift matrix needs at least 2 groups, got {have}")]
    TooFewGroups { have: usize },

    // --- task metrics ---
    #[error("prediction/gold length mismatch: {preds} vs {golds}")]
    LengthMismatch { preds: usize, golds: usize },
    #[error("cannot score an empty example list")]
    EmptyScores,

    // --- backend ---
    #[error("request failed after {attempts} attempt(s): {log:?}")]
    Transport { attempts: usize, log: Vec<String> },
    #[error("unscripted request with digest {digest}")]
    UnscriptedRequest { digest: String },
    #[error("{path}:{line}: corrupted cache line")]
    CacheLine { path: PathBuf, line: usize },
    #[error("{path}:{line}: bad script line: {message}")]
    ScriptLine {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("environment variable '{name}' is not set")]
    MissingApiKey { name: String },
    #[error("template is missing slots for placeholders: {names:?}")]
    MissingSlots { names: Vec<String> },
    #[error("{kind} template must contain the {placeholders:?} placeholder(s)")]
    TemplateShape {
        kind: &'static str,
        placeholders: Vec<&'static str>,
    },
    #[error("backend returned an unexpected response shape: {message}")]
    ResponseShape { message: String },

    // --- optimizer / gpo ---
    #[error("invalid configuration: {message}")]
    InvalidConfig { message: String },
    #[error("example '{id}' is unlabeled")]
    UnlabeledExample { id: String },
    #[error("example '{id}' is labeled; target inputs must be unlabeled")]
    LabeledTarget { id: String },
    #[error("split {split}: backend returned an empty completion (degenerate candidate)")]
    DegenerateCandidate { split: usize },
    #[error("split {split}: {source}")]
    CandidateGeneration {
        split: usize,
        source: Box<Error>,
    },
    #[error("evaluating '{context}': {source}")]
    Evaluation {
        context: String,
        source: Box<Error>,
    },
    #[error("candidate from split {split} has no validation score")]
    UnevaluatedCandidate { split: usize },
    #[error("no candidates to select from")]
    NoCandidates,
    #[error("validation set is empty")]
    EmptyValidation,
    #[error("labeling example '{id}': {source}")]
    Labeling { id: String, source: Box<Error> },
    #[error("consistency threshold rejected all target examples; lower t")]
    AllRejected,
    #[error("no gold output for pseudo-labeled example '{id}'")]
    GoldMismatch { id: String },

    // --- harness ---
    #[error("groups use different task metrics; a grid needs a single metric")]
    MetricMismatch,
    #[error("run {run} failed: {source}")]
    RunFailed { run: usize, source: Box<Error> },
    #[error("ensemble testing needs more than one prompt")]
    EnsembleNeedsPrompts,
    #[error("prompt text is empty")]
    EmptyPrompt,
}
