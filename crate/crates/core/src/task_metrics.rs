//! Answer normalization and task-level scoring.
//!
//! Chat models answer in free text, so every comparison first runs through
//! [`normalize_answer`]: lowercase, strip ASCII punctuation, drop the English
//! articles, collapse whitespace. Classification tasks additionally map a
//! free-text completion onto the label space with [`match_label`].

use crate::data::MetricKind;
use crate::error::{Error, Result};

/// Canonical form used for every string comparison.
///
/// Lowercase, then delete ASCII punctuation, then drop the articles
/// `a`/`an`/`the` token-wise, then collapse runs of whitespace to single
/// spaces (trimming the ends).
pub fn normalize_answer(text: &str) -> String {
    let lower = text.to_lowercase();
    let no_punct: String = lower
        .chars()
        .filter(|c| !c.is_ascii_punctuation())
        .collect();
    no_punct
        .split_whitespace()
        .filter(|tok| !matches!(*tok, "a" | "an" | "the"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Map a free-text completion onto the label space, if possible.
///
/// Stage 1: the normalized completion equals a normalized label exactly.
/// Stage 2: exactly one label appears as a contiguous token subsequence of the
/// normalized completion. Anything else (no label, or several) is `None`.
pub fn match_label(completion: &str, label_space: &[String]) -> Option<String> {
    let norm = normalize_answer(completion);
    for label in label_space {
        if normalize_answer(label) == norm {
            return Some(label.clone());
        }
    }
    let tokens: Vec<&str> = norm.split(' ').filter(|t| !t.is_empty()).collect();
    let mut hits = Vec::new();
    for label in label_space {
        let label_norm = normalize_answer(label);
        let label_tokens: Vec<&str> = label_norm.split(' ').filter(|t| !t.is_empty()).collect();
        if label_tokens.is_empty() {
            continue;
        }
        let found = tokens
            .windows(label_tokens.len())
            .any(|w| w == label_tokens.as_slice());
        if found {
            hits.push(label.clone());
        }
    }
    if hits.len() == 1 {
        hits.pop()
    } else {
        None
    }
}

/// Exact-match accuracy of one prediction against one gold answer.
pub fn exact_match(prediction: &str, gold: &str) -> f64 {
    if normalize_answer(prediction) == normalize_answer(gold) {
        1.0
    } else {
        0.0
    }
}

/// Multiset token F1 between a prediction and a gold answer.
///
/// Tokens come from the normalized strings. Both empty scores 1, exactly one
/// empty scores 0; otherwise the harmonic mean of precision and recall over
/// the token multisets.
pub fn token_f1(prediction: &str, gold: &str) -> f64 {
    let pred_tokens: Vec<String> = normalize_answer(prediction)
        .split(' ')
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect();
    let gold_tokens: Vec<String> = normalize_answer(gold)
        .split(' ')
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect();
    if pred_tokens.is_empty() && gold_tokens.is_empty() {
        return 1.0;
    }
    if pred_tokens.is_empty() || gold_tokens.is_empty() {
        return 0.0;
    }
    let mut gold_counts = std::collections::BTreeMap::new();
    for tok in &gold_tokens {
        *gold_counts.entry(tok.as_str()).or_insert(0usize) += 1;
    }
    let mut overlap = 0usize;
    for tok in &pred_tokens {
        if let Some(count) = gold_counts.get_mut(tok.as_str()) {
            if *count > 0 {
                *count -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let precision = overlap as f64 / pred_tokens.len() as f64;
    let recall = overlap as f64 / gold_tokens.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Score one prediction under the given metric.
pub fn score_one(metric: MetricKind, prediction: &str, gold: &str) -> f64 {
    match metric {
        MetricKind::Accuracy => exact_match(prediction, gold),
        MetricKind::TokenF1 => token_f1(prediction, gold),
    }
}

/// Mean score of parallel prediction and gold lists.
pub fn score(metric: MetricKind, predictions: &[String], golds: &[String]) -> Result<f64> {
    if predictions.len() != golds.len() {
        return Err(Error::LengthMismatch {
            preds: predictions.len(),
            golds: golds.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::EmptyScores);
    }
    let total: f64 = predictions
        .iter()
        .zip(golds)
        .map(|(p, g)| score_one(metric, p, g))
        .sum();
    Ok(total / predictions.len() as f64)
}
