//! Distribution-shift diagnostics between dataset groups.
//!
//! Three lenses on how far a target group sits from a source group:
//! label-distribution KL divergence, rank correlation of input word
//! frequencies, and n-gram overlap (diversity and coverage).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::data::Group;
use crate::error::{Error, Result};

/// KL divergence `sum_y p(y) ln(p(y) / q(y))` between two distributions
/// sharing the same key set (natural log).
///
/// Callers are expected to pass smoothed distributions (see
/// [`Group::label_distribution`]) so that no `q(y)` is zero.
pub fn kl_divergence(p: &BTreeMap<String, f64>, q: &BTreeMap<String, f64>) -> Result<f64> {
    if p.len() != q.len() || p.keys().zip(q.keys()).any(|(a, b)| a != b) {
        return Err(Error::KeySetMismatch);
    }
    let mut total = 0.0;
    for (key, &p_y) in p {
        let q_y = q[key];
        if p_y > 0.0 {
            total += p_y * (p_y / q_y).ln();
        }
    }
    Ok(total)
}

/// Label KL divergence from a source group to a target group.
///
/// Both groups get add-one smoothing over their (normalized) label space, so
/// the divergence is always finite. The groups must share a label space.
pub fn label_kl(source: &Group, target: &Group) -> Result<f64> {
    let p = source.label_distribution()?;
    let q = target.label_distribution()?;
    kl_divergence(&p, &q)
}

/// Spearman rank correlation of two equal-length value vectors.
///
/// Ties receive their average rank. Errors if either side has zero rank
/// variance (correlation undefined).
pub fn spearman_rho(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            preds: a.len(),
            golds: b.len(),
        });
    }
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    pearson(&ra, &rb)
}

/// Average ranks (1-based) with ties sharing the mean of their positions.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).expect("finite values"));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j (0-based) share rank mean of (i+1)..=(j+1)
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (x, y) in a.iter().zip(b) {
        let dx = x - mean_a;
        let dy = y - mean_b;
        cov += dx * dy;
        var_a += dx * dx;
        var_b += dy * dy;
    }
    if var_a == 0.0 {
        return Err(Error::UndefinedCorrelation { side: "first" });
    }
    if var_b == 0.0 {
        return Err(Error::UndefinedCorrelation { side: "second" });
    }
    Ok(cov / (var_a.sqrt() * var_b.sqrt()))
}

/// Word tokenization used for input-frequency vectors and word n-grams:
/// lowercase, strip ASCII punctuation, split on whitespace.
pub fn words(text: &str) -> Vec<String> {
    text.to_lowercase()
        .chars()
        .filter(|c| !c.is_ascii_punctuation())
        .collect::<String>()
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

/// Result of [`input_similarity`]: the rank correlation plus the vocabulary
/// size it was computed over.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct InputSimilarity {
    pub rho: f64,
    /// Distinct words in the target sample (the comparison vocabulary).
    pub vocab_size: usize,
}

/// Rank correlation of word frequencies between source and target inputs.
///
/// The vocabulary is the set of distinct words appearing in the *target*
/// texts; each side is reduced to a count vector over that vocabulary and the
/// two vectors are compared with Spearman's rho.
pub fn input_similarity(source_texts: &[&str], target_texts: &[&str]) -> Result<InputSimilarity> {
    let mut vocab = BTreeSet::new();
    let mut target_counts: BTreeMap<String, f64> = BTreeMap::new();
    for text in target_texts {
        for word in words(text) {
            *target_counts.entry(word.clone()).or_insert(0.0) += 1.0;
            vocab.insert(word);
        }
    }
    if vocab.is_empty() {
        return Err(Error::EmptyTargetNgrams);
    }
    let mut source_counts: BTreeMap<&str, f64> =
        vocab.iter().map(|w| (w.as_str(), 0.0)).collect();
    for text in source_texts {
        for word in words(text) {
            if let Some(c) = source_counts.get_mut(word.as_str()) {
                *c += 1.0;
            }
        }
    }
    let vs: Vec<f64> = vocab.iter().map(|w| source_counts[w.as_str()]).collect();
    let vt: Vec<f64> = vocab.iter().map(|w| target_counts[w.as_str()]).collect();
    let rho = spearman_rho(&vs, &vt)?;
    Ok(InputSimilarity {
        rho,
        vocab_size: vocab.len(),
    })
}

/// Which n-gram extraction feeds the diversity and coverage statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NgramMode {
    /// Distinct words (word-level 1-grams).
    Word1,
    /// Distinct 4-character windows within each text, lowercased.
    Char4,
}

/// The set of n-grams in one corpus under the given mode.
pub fn ngram_set(texts: &[&str], mode: NgramMode) -> BTreeSet<String> {
    let mut set = BTreeSet::new();
    match mode {
        NgramMode::Word1 => {
            for text in texts {
                set.extend(words(text));
            }
        }
        NgramMode::Char4 => {
            for text in texts {
                let chars: Vec<char> = text.to_lowercase().chars().collect();
                if chars.len() < 4 {
                    continue;
                }
                for window in chars.windows(4) {
                    set.insert(window.iter().collect());
                }
            }
        }
    }
    set
}

/// Per-corpus unique n-gram proportions: `|ngrams(x_i)| / |ngrams(union)|`.
///
/// Needs at least two corpora and a non-empty union.
pub fn ngram_diversity(corpora: &[Vec<&str>], mode: NgramMode) -> Result<Vec<f64>> {
    if corpora.len() < 2 {
        return Err(Error::TooFewCorpora {
            need: 2,
            have: corpora.len(),
        });
    }
    let sets: Vec<BTreeSet<String>> = corpora.iter().map(|c| ngram_set(c, mode)).collect();
    let mut union = BTreeSet::new();
    for set in &sets {
        union.extend(set.iter().cloned());
    }
    if union.is_empty() {
        return Err(Error::EmptyNgramUnion);
    }
    Ok(sets
        .iter()
        .map(|s| s.len() as f64 / union.len() as f64)
        .collect())
}

/// Fraction of the target's n-grams that also appear in the source:
/// `|ngrams(s) ∩ ngrams(t)| / |ngrams(t)|`.
pub fn ngram_coverage(source_texts: &[&str], target_texts: &[&str], mode: NgramMode) -> Result<f64> {
    let source = ngram_set(source_texts, mode);
    let target = ngram_set(target_texts, mode);
    if target.is_empty() {
        return Err(Error::EmptyTargetNgrams);
    }
    let hit = target.iter().filter(|g| source.contains(*g)).count();
    Ok(hit as f64 / target.len() as f64)
}

/// Shift statistic to tabulate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftStat {
    LabelKl,
    InputSimilarity,
    Coverage,
    /// Per-group unique n-gram proportion (not pairwise; see
    /// [`diversity_table`]).
    Diversity,
}

/// A rows-by-columns table of pairwise statistics; `None` marks absent cells
/// (e.g. the diagonal of a self-comparison table when skipped).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShiftMatrix {
    pub stat: ShiftStat,
    /// `Word1`/`Char4` for coverage; ignored by the other statistics.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ngram_mode: Option<NgramMode>,
    pub row_names: Vec<String>,
    pub col_names: Vec<String>,
    pub cells: Vec<Vec<Option<f64>>>,
    /// Per column: row index of the best (maximal) present value, if any.
    pub col_best: Vec<Option<usize>>,
}

impl ShiftMatrix {
    pub fn cell(&self, row: &str, col: &str) -> Option<f64> {
        let r = self.row_names.iter().position(|n| n == row)?;
        let c = self.col_names.iter().position(|n| n == col)?;
        self.cells[r][c]
    }
}

fn col_best(cells: &[Vec<Option<f64>>], n_cols: usize) -> Vec<Option<usize>> {
    (0..n_cols)
        .map(|c| {
            let mut best: Option<(usize, f64)> = None;
            for (r, row) in cells.iter().enumerate() {
                if let Some(v) = row[c] {
                    if best.map_or(true, |(_, bv)| v > bv) {
                        best = Some((r, v));
                    }
                }
            }
            best.map(|(r, _)| r)
        })
        .collect()
}

/// All-pairs table of one statistic over the given groups (rows = source,
/// columns = target). `include_diagonal` controls whether each group is also
/// compared to itself.
pub fn shift_matrix(groups: &[&Group], stat: ShiftStat, mode: NgramMode, include_diagonal: bool) -> Result<ShiftMatrix> {
    if groups.len() < 2 {
        return Err(Error::TooFewGroups { have: groups.len() });
    }
    let names: Vec<String> = groups.iter().map(|g| g.name.clone()).collect();
    let mut cells = Vec::with_capacity(groups.len());
    for (r, source) in groups.iter().enumerate() {
        let mut row = Vec::with_capacity(groups.len());
        for (c, target) in groups.iter().enumerate() {
            if r == c && !include_diagonal {
                row.push(None);
                continue;
            }
            let value = match stat {
                ShiftStat::LabelKl => label_kl(source, target)?,
                ShiftStat::InputSimilarity => {
                    input_similarity(&source.inputs(), &target.inputs())?.rho
                }
                ShiftStat::Coverage => {
                    ngram_coverage(&source.inputs(), &target.inputs(), mode)?
                }
                ShiftStat::Diversity => {
                    return Err(Error::InvalidConfig {
                        message: "diversity is per-group, not pairwise; use diversity_table"
                            .to_string(),
                    })
                }
            };
            row.push(Some(value));
        }
        cells.push(row);
    }
    let best = col_best(&cells, groups.len());
    Ok(ShiftMatrix {
        stat,
        ngram_mode: (stat == ShiftStat::Coverage).then_some(mode),
        row_names: names.clone(),
        col_names: names,
        cells,
        col_best: best,
    })
}

/// One-row-per-group table of unique n-gram proportions (a single-column
/// matrix, kept in the same shape for uniform rendering).
pub fn diversity_table(groups: &[&Group], mode: NgramMode) -> Result<ShiftMatrix> {
    let corpora: Vec<Vec<&str>> = groups.iter().map(|g| g.inputs()).collect();
    let props = ngram_diversity(&corpora, mode)?;
    let cells: Vec<Vec<Option<f64>>> = props.iter().map(|&p| vec![Some(p)]).collect();
    let best = col_best(&cells, 1);
    Ok(ShiftMatrix {
        stat: ShiftStat::Diversity,
        ngram_mode: Some(mode),
        row_names: groups.iter().map(|g| g.name.clone()).collect(),
        col_names: vec!["unique_ngram_proportion".to_string()],
        cells,
        col_best: best,
    })
}
