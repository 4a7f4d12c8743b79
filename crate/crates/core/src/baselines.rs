//! Classical string-similarity baselines.
//!
//! Every metric maps a sentence pair to `[0, 1]`, is symmetric and returns
//! `1.0` for identical inputs. Correlation against the reference scores is
//! computed on the metric's native scale; Pearson is invariant under the
//! positive-affine map to `[0, 4]`, so no rescaling happens.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::exec::Executor;
use crate::stats::{pearson_slices, CorrelationResult, StatsError};

pub const DEFAULT_Q: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("q must be at least 1")]
    InvalidQ,
    #[error("test split is empty")]
    EmptyTestSplit,
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Levenshtein,
    JaccardTokens,
    Qgram,
    CosineQgram,
}

impl Metric {
    pub const ALL: [Metric; 4] = [
        Metric::Levenshtein,
        Metric::JaccardTokens,
        Metric::Qgram,
        Metric::CosineQgram,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Levenshtein => "levenshtein",
            Metric::JaccardTokens => "jaccard_tokens",
            Metric::Qgram => "qgram",
            Metric::CosineQgram => "cosine_qgram",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown metric `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tokenizer {
    /// Split on Unicode whitespace, tokens kept as-is.
    Whitespace,
    /// Lowercase, split on whitespace, strip leading and trailing punctuation.
    #[default]
    LowercaseWhitespace,
}

impl FromStr for Tokenizer {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "whitespace" => Ok(Tokenizer::Whitespace),
            "lowercase_whitespace" => Ok(Tokenizer::LowercaseWhitespace),
            other => Err(format!("unknown tokenizer `{other}`")),
        }
    }
}

impl Tokenizer {
    pub fn tokens(self, text: &str) -> BTreeSet<String> {
        match self {
            Tokenizer::Whitespace => text.split_whitespace().map(str::to_string).collect(),
            Tokenizer::LowercaseWhitespace => text
                .split_whitespace()
                .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()))
                .filter(|t| !t.is_empty())
                .map(str::to_lowercase)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineSpec {
    pub metric: Metric,
    pub q: usize,
    pub tokenizer: Tokenizer,
}

impl BaselineSpec {
    pub fn new(metric: Metric) -> Self {
        BaselineSpec {
            metric,
            q: DEFAULT_Q,
            tokenizer: Tokenizer::default(),
        }
    }

    pub fn score(&self, a: &str, b: &str) -> f64 {
        match self.metric {
            Metric::Levenshtein => levenshtein_similarity(a, b),
            Metric::JaccardTokens => jaccard_similarity(a, b, self.tokenizer),
            Metric::Qgram => qgram_similarity(a, b, self.q),
            Metric::CosineQgram => cosine_qgram_similarity(a, b, self.q),
        }
    }
}

/// Character-level edit distance using two rolling rows.
pub fn levenshtein_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    // Keep the shorter string along the row.
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    if short.is_empty() {
        return long.len();
    }
    let mut prev: Vec<usize> = (0..=short.len()).collect();
    let mut cur = vec![0; short.len() + 1];
    for (i, lc) in long.iter().enumerate() {
        cur[0] = i + 1;
        for (j, sc) in short.iter().enumerate() {
            let substitution = prev[j] + usize::from(lc != sc);
            cur[j + 1] = substitution.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[short.len()]
}

/// `1 - distance / max(len)`, with two empty strings fully similar.
pub fn levenshtein_similarity(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein_distance(a, b) as f64 / longest as f64
}

fn set_jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

pub fn jaccard_similarity(a: &str, b: &str, tokenizer: Tokenizer) -> f64 {
    set_jaccard(&tokenizer.tokens(a), &tokenizer.tokens(b))
}

/// Character q-gram counts. A non-empty string shorter than `q` is a single
/// gram; the empty string has none.
pub fn qgram_counts(text: &str, q: usize) -> BTreeMap<String, u64> {
    assert!(q >= 1, "q must be at least 1");
    let chars: Vec<char> = text.chars().collect();
    let mut counts = BTreeMap::new();
    if chars.is_empty() {
        return counts;
    }
    if chars.len() < q {
        counts.insert(text.to_string(), 1);
        return counts;
    }
    for w in chars.windows(q) {
        *counts.entry(w.iter().collect::<String>()).or_insert(0) += 1;
    }
    counts
}

/// Jaccard over the sets of character q-grams.
pub fn qgram_similarity(a: &str, b: &str, q: usize) -> f64 {
    let ga: BTreeSet<String> = qgram_counts(a, q).into_keys().collect();
    let gb: BTreeSet<String> = qgram_counts(b, q).into_keys().collect();
    set_jaccard(&ga, &gb)
}

/// Cosine of q-gram count vectors. Zero when exactly one side has no grams,
/// one when both are empty.
pub fn cosine_qgram_similarity(a: &str, b: &str, q: usize) -> f64 {
    let ca = qgram_counts(a, q);
    let cb = qgram_counts(b, q);
    match (ca.is_empty(), cb.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    // Integer accumulation keeps identical inputs at exactly 1.0.
    let dot: u64 = ca
        .iter()
        .filter_map(|(g, x)| cb.get(g).map(|y| x * y))
        .sum();
    let na: u64 = ca.values().map(|x| x * x).sum();
    let nb: u64 = cb.values().map(|y| y * y).sum();
    dot as f64 / ((na as f64) * (nb as f64)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineResult {
    pub spec: BaselineSpec,
    pub correlation: CorrelationResult,
    /// Metric value per test pair, in test-split order.
    pub values: Vec<(u64, f64)>,
}

/// Scores every test pair with the metric and correlates against the references.
pub fn baseline_correlation(
    dataset: &Dataset,
    spec: &BaselineSpec,
    executor: &Executor,
) -> Result<BaselineResult, BaselineError> {
    if spec.q == 0 {
        return Err(BaselineError::InvalidQ);
    }
    if dataset.test.is_empty() {
        return Err(BaselineError::EmptyTestSplit);
    }
    let scores = executor.map(&dataset.test, |p| spec.score(&p.sentence1, &p.sentence2));
    let refs: Vec<f64> = dataset.test.iter().map(|p| p.reference_score).collect();
    let correlation = pearson_slices(&scores, &refs, spec.metric.as_str(), "reference")?;
    Ok(BaselineResult {
        spec: *spec,
        correlation,
        values: dataset.test.iter().map(|p| p.id).zip(scores).collect(),
    })
}
