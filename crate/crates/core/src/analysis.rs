//! Edit analysis, classifier evaluation, and the descriptive statistics
//! behind the report tables.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scorer::{codeness, normalize_token, Label, Query};
use crate::session::{term_delta, TaskSession};
use crate::tag_corpus::TokenScoreTable;

/// How a reformulation changed the term set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EditKind {
    OnlyAdd,
    OnlyDelete,
    Mixed,
    NoChange,
}

impl EditKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EditKind::OnlyAdd => "only_add",
            EditKind::OnlyDelete => "only_delete",
            EditKind::Mixed => "mixed",
            EditKind::NoChange => "no_change",
        }
    }
}

/// Added/deleted term sets between consecutive queries plus the edit kind
/// and the codeness difference (reformulated minus original).
#[derive(Debug, Clone, PartialEq)]
pub struct EditDelta {
    pub added: BTreeSet<String>,
    pub deleted: BTreeSet<String>,
    /// Added tokens in the order they appear in the new query.
    pub added_seq: Vec<String>,
    /// Deleted tokens in the order they appeared in the old query.
    pub deleted_seq: Vec<String>,
    pub kind: EditKind,
    pub delta_codeness: f64,
}

/// Compare consecutive queries: term delta, edit kind, and
/// `codeness(curr) - codeness(prev)`.
pub fn delta_codeness(prev: &Query, curr: &Query, table: &TokenScoreTable) -> EditDelta {
    let delta = term_delta(prev, curr);
    let kind = match (delta.added.is_empty(), delta.deleted.is_empty()) {
        (true, true) => EditKind::NoChange,
        (false, true) => EditKind::OnlyAdd,
        (true, false) => EditKind::OnlyDelete,
        (false, false) => EditKind::Mixed,
    };
    EditDelta {
        added: delta.added,
        deleted: delta.deleted,
        added_seq: delta.added_seq,
        deleted_seq: delta.deleted_seq,
        kind,
        delta_codeness: codeness(table, curr) - codeness(table, prev),
    }
}

/// One point of a threshold sweep with the full confusion matrix.
/// Metrics are `None` where the denominator is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub threshold: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub true_pos: u64,
    pub false_pos: u64,
    pub false_neg: u64,
    pub true_neg: u64,
}

/// Sweep the classifier over `thresholds` against gold labels, with Code
/// as the positive class. Thresholds must be non-negative and ascending.
pub fn evaluate_classifier(
    labeled: &[(Query, Label)],
    table: &TokenScoreTable,
    thresholds: &[f64],
) -> Result<Vec<EvalPoint>> {
    if labeled.is_empty() {
        return Err(Error::validation("no labeled queries to evaluate"));
    }
    if let Some(bad) = thresholds.iter().find(|t| t.is_nan() || **t < 0.0) {
        return Err(Error::validation(format!(
            "thresholds must be non-negative numbers, got {bad}"
        )));
    }
    for pair in thresholds.windows(2) {
        if pair[0] > pair[1] {
            return Err(Error::validation(format!(
                "thresholds must be sorted ascending, found {} before {}",
                pair[0], pair[1]
            )));
        }
    }

    let scored: Vec<(f64, Label)> = labeled
        .iter()
        .map(|(query, gold)| (codeness(table, query), *gold))
        .collect();

    let mut points = Vec::with_capacity(thresholds.len());
    for &threshold in thresholds {
        let mut tp = 0u64;
        let mut fp = 0u64;
        let mut fn_ = 0u64;
        let mut tn = 0u64;
        for &(score, gold) in &scored {
            let predicted_code = score > threshold;
            match (predicted_code, gold) {
                (true, Label::Code) => tp += 1,
                (true, Label::NonCode) => fp += 1,
                (false, Label::Code) => fn_ += 1,
                (false, Label::NonCode) => tn += 1,
            }
        }
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = match (precision, recall) {
            (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
            (Some(_), Some(_)) => Some(0.0),
            _ => None,
        };
        points.push(EvalPoint {
            threshold,
            precision,
            recall,
            f1,
            true_pos: tp,
            false_pos: fp,
            false_neg: fn_,
            true_neg: tn,
        });
    }
    Ok(points)
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    if den == 0 {
        None
    } else {
        Some(num as f64 / den as f64)
    }
}

/// Result of duplicate filtering.
#[derive(Debug, Clone)]
pub struct DedupOutcome {
    pub kept: Vec<Query>,
    pub removed: usize,
    pub removed_fraction: f64,
}

/// Keep the first occurrence of each normalized query text, globally
/// across the corpus. Case and spacing variants count as duplicates.
pub fn dedupe_queries(queries: &[Query]) -> DedupOutcome {
    let mut seen = BTreeSet::new();
    let mut kept = Vec::new();
    for query in queries {
        if seen.insert(query.normalized_text()) {
            kept.push(query.clone());
        }
    }
    let removed = queries.len() - kept.len();
    let removed_fraction = if queries.is_empty() {
        0.0
    } else {
        removed as f64 / queries.len() as f64
    };
    DedupOutcome {
        kept,
        removed,
        removed_fraction,
    }
}

/// Parse a stopword file: one word per line, `#`-space comment lines
/// ignored, words normalized like query tokens.
pub fn parse_stopwords(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(|line| line.strip_suffix('\r').unwrap_or(line))
        .filter(|line| !line.starts_with("# "))
        .filter_map(normalize_token)
        .collect()
}

/// The bundled English stopword list.
pub fn default_stopwords() -> BTreeSet<String> {
    parse_stopwords(include_str!("../assets/stopwords.txt"))
}

/// Vocabulary sizes, overlap, and top tokens for the two query classes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VocabStats {
    pub code_size: u64,
    pub noncode_size: u64,
    pub common_size: u64,
    /// `common / code vocabulary`; `None` when the code vocabulary is
    /// empty.
    pub overlap_vs_code: Option<f64>,
    pub top_code: Vec<(String, u64)>,
    pub top_noncode: Vec<(String, u64)>,
    /// Common tokens ranked by combined frequency across both classes.
    pub top_common: Vec<(String, u64)>,
}

fn token_frequencies(queries: &[&Query], stopwords: &BTreeSet<String>) -> BTreeMap<String, u64> {
    let mut freq = BTreeMap::new();
    for query in queries {
        for token in &query.tokens {
            if !stopwords.contains(token) {
                *freq.entry(token.clone()).or_insert(0) += 1;
            }
        }
    }
    freq
}

/// Sort a frequency map by count descending, ties broken by token, and
/// keep the first `top_k`.
fn top_tokens(freq: &BTreeMap<String, u64>, top_k: usize) -> Vec<(String, u64)> {
    let mut items: Vec<(String, u64)> = freq.iter().map(|(t, c)| (t.clone(), *c)).collect();
    items.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    items.truncate(top_k);
    items
}

/// Distinct non-stopword vocabularies per class, their overlap relative
/// to the code vocabulary, and frequency-ranked top tokens.
pub fn vocabulary_stats(
    code_queries: &[&Query],
    noncode_queries: &[&Query],
    stopwords: &BTreeSet<String>,
    top_k: usize,
) -> VocabStats {
    let code_freq = token_frequencies(code_queries, stopwords);
    let noncode_freq = token_frequencies(noncode_queries, stopwords);

    let common: BTreeMap<String, u64> = code_freq
        .iter()
        .filter_map(|(token, count)| {
            noncode_freq
                .get(token)
                .map(|other| (token.clone(), count + other))
        })
        .collect();

    let overlap_vs_code = if code_freq.is_empty() {
        None
    } else {
        Some(common.len() as f64 / code_freq.len() as f64)
    };

    VocabStats {
        code_size: code_freq.len() as u64,
        noncode_size: noncode_freq.len() as u64,
        common_size: common.len() as u64,
        overlap_vs_code,
        top_code: top_tokens(&code_freq, top_k),
        top_noncode: top_tokens(&noncode_freq, top_k),
        top_common: top_tokens(&common, top_k),
    }
}

/// Frequency-ranked added and deleted n-grams over a set of edits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NgramTables {
    pub added: Vec<(String, u64)>,
    pub deleted: Vec<(String, u64)>,
}

/// Count added/deleted unigrams (per edit, from the term sets) or
/// bigrams (consecutive pairs of the order-preserving subsequences).
/// Only n = 1 or 2 is supported.
pub fn edit_ngram_stats(deltas: &[EditDelta], n: usize) -> Result<NgramTables> {
    if n != 1 && n != 2 {
        return Err(Error::validation(format!(
            "n-gram order must be 1 or 2, got {n}"
        )));
    }
    let mut added: BTreeMap<String, u64> = BTreeMap::new();
    let mut deleted: BTreeMap<String, u64> = BTreeMap::new();
    for delta in deltas {
        if n == 1 {
            for token in &delta.added {
                *added.entry(token.clone()).or_insert(0) += 1;
            }
            for token in &delta.deleted {
                *deleted.entry(token.clone()).or_insert(0) += 1;
            }
        } else {
            for pair in delta.added_seq.windows(2) {
                *added.entry(format!("{} {}", pair[0], pair[1])).or_insert(0) += 1;
            }
            for pair in delta.deleted_seq.windows(2) {
                *deleted
                    .entry(format!("{} {}", pair[0], pair[1]))
                    .or_insert(0) += 1;
            }
        }
    }
    Ok(NgramTables {
        added: top_tokens(&added, usize::MAX),
        deleted: top_tokens(&deleted, usize::MAX),
    })
}

/// Five-number summary plus count and mean. All value fields are `None`
/// for an empty sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: u64,
    pub min: Option<f64>,
    pub q1: Option<f64>,
    pub median: Option<f64>,
    pub q3: Option<f64>,
    pub max: Option<f64>,
    pub mean: Option<f64>,
}

impl Summary {
    pub fn from_values(values: &[f64]) -> Summary {
        if values.is_empty() {
            return Summary {
                count: 0,
                min: None,
                q1: None,
                median: None,
                q3: None,
                max: None,
                mean: None,
            };
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("summary values must not be NaN"));
        let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
        Summary {
            count: sorted.len() as u64,
            min: Some(sorted[0]),
            q1: Some(quantile(&sorted, 0.25)),
            median: Some(quantile(&sorted, 0.5)),
            q3: Some(quantile(&sorted, 0.75)),
            max: Some(sorted[sorted.len() - 1]),
            mean: Some(mean),
        }
    }
}

/// Linear-interpolation quantile over a sorted sample.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Queries-per-task bucket labels: 1, 2, 3, 4, 5, and 5+.
pub const TASK_BUCKETS: [&str; 6] = ["1", "2", "3", "4", "5", "5+"];

/// Queries-per-task histogram and effort distributions for one class of
/// tasks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskStats {
    pub task_count: u64,
    pub is_empty: bool,
    /// Counts per bucket 1,2,3,4,5,5+.
    pub bucket_counts: [u64; 6],
    /// Percentages per bucket; zero everywhere for an empty class.
    pub bucket_percentages: [f64; 6],
    pub queries_per_task: Summary,
    pub duration_seconds: Summary,
    pub web_visits: Summary,
}

pub fn task_stats(tasks: &[&TaskSession]) -> TaskStats {
    let mut bucket_counts = [0u64; 6];
    let mut query_counts = Vec::with_capacity(tasks.len());
    let mut durations = Vec::with_capacity(tasks.len());
    let mut visits = Vec::with_capacity(tasks.len());
    for task in tasks {
        let n = task.queries.len();
        let bucket = if n >= 6 { 5 } else { n - 1 };
        bucket_counts[bucket] += 1;
        query_counts.push(n as f64);
        durations.push(task.total_time.num_milliseconds() as f64 / 1000.0);
        visits.push(task.total_web_visits as f64);
    }
    let total = tasks.len() as f64;
    let bucket_percentages = if tasks.is_empty() {
        [0.0; 6]
    } else {
        bucket_counts.map(|c| 100.0 * c as f64 / total)
    };
    TaskStats {
        task_count: tasks.len() as u64,
        is_empty: tasks.is_empty(),
        bucket_counts,
        bucket_percentages,
        queries_per_task: Summary::from_values(&query_counts),
        duration_seconds: Summary::from_values(&durations),
        web_visits: Summary::from_values(&visits),
    }
}

/// Cohen's d with the pooled (n-1) standard deviation. `Ok(None)` when
/// the pooled deviation is zero; both samples need at least two values.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<Option<f64>> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::validation(format!(
            "effect size needs at least 2 values per sample, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let var = |xs: &[f64], m: f64| {
        xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
    };
    let (ma, mb) = (mean(a), mean(b));
    let (va, vb) = (var(a, ma), var(b, mb));
    let pooled = ((a.len() - 1) as f64 * va + (b.len() - 1) as f64 * vb)
        / (a.len() + b.len() - 2) as f64;
    let sd = pooled.sqrt();
    if sd == 0.0 {
        return Ok(None);
    }
    Ok(Some((ma - mb) / sd))
}
