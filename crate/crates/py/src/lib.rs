//! Python bindings: exposes the score table, tokenizer, classifier, and
//! the log-mining pipelines as a `codeness` extension module.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use pyo3::IntoPyObjectExt;

use codeness_core::analysis::{self, evaluate_classifier};
use codeness_core::report::{build_report, task_views, ReportConfig};
use codeness_core::scorer::{self, Label, PlLexicon, Query};
use codeness_core::session::parse_log_str;
use codeness_core::tag_corpus::{self, TagFrequencyRecord, TaggedPost};
use codeness_core::{sha256_hex, Error};

fn to_py_err(err: Error) -> PyErr {
    if err.is_validation() {
        PyValueError::new_err(err.to_string())
    } else {
        PyRuntimeError::new_err(err.to_string())
    }
}

fn json_to_py(py: Python<'_>, value: &serde_json::Value) -> PyResult<Py<PyAny>> {
    match value {
        serde_json::Value::Null => Ok(py.None()),
        serde_json::Value::Bool(b) => b.into_py_any(py),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_py_any(py)
            } else if let Some(u) = n.as_u64() {
                u.into_py_any(py)
            } else {
                n.as_f64().unwrap_or(f64::NAN).into_py_any(py)
            }
        }
        serde_json::Value::String(s) => s.into_py_any(py),
        serde_json::Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_py_any(py)
        }
        serde_json::Value::Object(map) => {
            let dict = PyDict::new(py);
            for (key, item) in map {
                dict.set_item(key, json_to_py(py, item)?)?;
            }
            dict.into_py_any(py)
        }
    }
}

fn serialize_to_py<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let json = serde_json::to_value(value)
        .map_err(|e| PyRuntimeError::new_err(format!("serializing result: {e}")))?;
    json_to_py(py, &json)
}

/// Immutable map from normalized token to codeness score.
#[pyclass(frozen, module = "codeness")]
struct TokenScoreTable {
    inner: codeness_core::TokenScoreTable,
}

#[pymethods]
impl TokenScoreTable {
    /// Build a table from (tag, single-occurrence count) pairs.
    #[staticmethod]
    #[pyo3(signature = (counts, source_meta=None))]
    fn from_counts(counts: Vec<(String, u64)>, source_meta: Option<String>) -> PyResult<Self> {
        let records: Vec<TagFrequencyRecord> = counts
            .into_iter()
            .map(|(tag, count)| TagFrequencyRecord { tag, count })
            .collect();
        let inner = tag_corpus::build_table(&records, source_meta.unwrap_or_default())
            .map_err(to_py_err)?;
        Ok(TokenScoreTable { inner })
    }

    /// Load a table file (JSON document, token,score CSV, or tag,count CSV).
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PyValueError::new_err(format!("{path}: {e}")))?;
        let meta = format!("table sha256:{}", sha256_hex(text.as_bytes()));
        let inner = tag_corpus::load_table_str(&text, &meta).map_err(to_py_err)?;
        Ok(TokenScoreTable { inner })
    }

    /// Write the table as its canonical JSON document.
    fn save(&self, path: &str) -> PyResult<()> {
        let json = self.inner.to_json().map_err(to_py_err)?;
        std::fs::write(path, json).map_err(|e| PyValueError::new_err(format!("{path}: {e}")))
    }

    /// Score of a single normalized token (0 when unknown).
    fn score(&self, token: &str) -> f64 {
        self.inner.score(token)
    }

    /// Codeness score of a query string.
    fn score_query(&self, text: &str) -> f64 {
        scorer::codeness(&self.inner, &Query::from_text(text))
    }

    /// Score and classify a query; returns (score, "Code" | "NonCode").
    #[pyo3(signature = (text, threshold=10.0))]
    fn classify(&self, text: &str, threshold: f64) -> PyResult<(f64, String)> {
        let c = scorer::classify(&self.inner, &Query::from_text(text), threshold)
            .map_err(to_py_err)?;
        Ok((c.score, c.label.as_str().to_string()))
    }

    /// Term delta plus edit kind and codeness difference between two
    /// consecutive queries.
    fn delta_codeness(&self, py: Python<'_>, prev: &str, curr: &str) -> PyResult<Py<PyAny>> {
        let delta = analysis::delta_codeness(
            &Query::from_text(prev),
            &Query::from_text(curr),
            &self.inner,
        );
        let dict = PyDict::new(py);
        dict.set_item("added", delta.added.iter().collect::<Vec<_>>())?;
        dict.set_item("deleted", delta.deleted.iter().collect::<Vec<_>>())?;
        dict.set_item("kind", delta.kind.as_str())?;
        dict.set_item("delta", delta.delta_codeness)?;
        dict.into_py_any(py)
    }

    /// Sweep thresholds against (query, "code"|"noncode") annotations.
    fn evaluate(
        &self,
        py: Python<'_>,
        labeled: Vec<(String, String)>,
        thresholds: Vec<f64>,
    ) -> PyResult<Py<PyAny>> {
        let labeled: Vec<(Query, Label)> = labeled
            .into_iter()
            .map(|(text, label)| {
                Ok((
                    Query::from_text(text),
                    Label::parse(&label).map_err(to_py_err)?,
                ))
            })
            .collect::<PyResult<_>>()?;
        let points =
            evaluate_classifier(&labeled, &self.inner, &thresholds).map_err(to_py_err)?;
        serialize_to_py(py, &points)
    }

    /// Parse an activity log (JSONL text) and mine scored task sessions.
    #[pyo3(signature = (log, threshold=10.0))]
    fn mine_tasks(&self, py: Python<'_>, log: &str, threshold: f64) -> PyResult<Py<PyAny>> {
        let parsed = parse_log_str(log).map_err(to_py_err)?;
        let (tasks, orphan_visits) =
            task_views(&parsed.sessions, &self.inner, threshold).map_err(to_py_err)?;
        let dict = PyDict::new(py);
        dict.set_item("tasks", serialize_to_py(py, &tasks)?)?;
        dict.set_item("malformed_lines", parsed.errors.len())?;
        dict.set_item("orphan_visits", orphan_visits)?;
        dict.into_py_any(py)
    }

    /// Full analysis report over an activity log (JSONL text).
    #[pyo3(signature = (log, threshold=10.0))]
    fn analyze_log(&self, py: Python<'_>, log: &str, threshold: f64) -> PyResult<Py<PyAny>> {
        let parsed = parse_log_str(log).map_err(to_py_err)?;
        let config = ReportConfig {
            threshold,
            ..ReportConfig::default()
        };
        let mut provenance = BTreeMap::new();
        provenance.insert(
            "log".to_string(),
            format!("sha256:{}", sha256_hex(log.as_bytes())),
        );
        let report =
            build_report(&self.inner, &parsed, &config, provenance).map_err(to_py_err)?;
        serialize_to_py(py, &report)
    }

    fn source_meta(&self) -> String {
        self.inner.source_meta().to_string()
    }

    fn tokens(&self) -> Vec<String> {
        self.inner.iter().map(|(t, _)| t.to_string()).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __contains__(&self, token: &str) -> bool {
        self.inner.contains(token)
    }

    fn __repr__(&self) -> String {
        format!("TokenScoreTable({} tokens)", self.inner.len())
    }
}

/// Lowercase, whitespace-split, punctuation-trimmed tokens of a query.
#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    scorer::tokenize(text)
}

/// Normalize one raw token; returns None when nothing survives.
#[pyfunction]
fn normalize_token(raw: &str) -> Option<String> {
    scorer::normalize_token(raw)
}

type TagCounts = Vec<(String, u64)>;
type SkippedPosts = Vec<(String, String)>;

/// Count single-occurrence posts per tag. Takes (post_id, tags) pairs;
/// returns ((tag, count) list, (post_id, reason) list of skipped posts).
#[pyfunction]
fn filter_posts(posts: Vec<(String, Vec<String>)>) -> (TagCounts, SkippedPosts) {
    let posts: Vec<TaggedPost> = posts
        .into_iter()
        .map(|(post_id, tags)| TaggedPost { post_id, tags })
        .collect();
    let outcome = tag_corpus::filter_posts(posts);
    (
        outcome
            .records
            .into_iter()
            .map(|r| (r.tag, r.count))
            .collect(),
        outcome
            .skipped
            .into_iter()
            .map(|s| (s.post_id, s.reason))
            .collect(),
    )
}

/// Added/deleted term sets between consecutive queries.
#[pyfunction]
fn term_delta(prev: &str, curr: &str) -> (Vec<String>, Vec<String>) {
    let delta =
        codeness_core::session::term_delta(&Query::from_text(prev), &Query::from_text(curr));
    (
        delta.added.into_iter().collect(),
        delta.deleted.into_iter().collect(),
    )
}

/// True when the two consecutive queries share at least one token.
#[pyfunction]
fn is_edited(prev: &str, curr: &str) -> bool {
    codeness_core::session::is_edited(&Query::from_text(prev), &Query::from_text(curr))
}

/// Exact-token language mentions in a query. Uses the bundled 100-name
/// lexicon unless `names` is given.
#[pyfunction]
#[pyo3(signature = (text, names=None))]
fn detect_pl_mentions(text: &str, names: Option<Vec<String>>) -> Vec<String> {
    let lexicon = match names {
        Some(names) => PlLexicon::from_names(names),
        None => scorer::default_pl_lexicon(),
    };
    scorer::detect_pl_mentions(&Query::from_text(text), &lexicon)
        .into_iter()
        .collect()
}

/// Keep the first occurrence of each normalized query text; returns the
/// kept texts and the removed fraction.
#[pyfunction]
fn dedupe_queries(texts: Vec<String>) -> (Vec<String>, f64) {
    let queries: Vec<Query> = texts.into_iter().map(Query::from_text).collect();
    let outcome = analysis::dedupe_queries(&queries);
    (
        outcome.kept.into_iter().map(|q| q.raw_text).collect(),
        outcome.removed_fraction,
    )
}

/// Cohen's d with pooled n-1 standard deviation; None when degenerate.
#[pyfunction]
fn cohens_d(a: Vec<f64>, b: Vec<f64>) -> PyResult<Option<f64>> {
    analysis::cohens_d(&a, &b).map_err(to_py_err)
}

/// The bundled English stopword list.
#[pyfunction]
fn default_stopwords() -> Vec<String> {
    analysis::default_stopwords().into_iter().collect()
}

/// The bundled 100 programming-language names.
#[pyfunction]
fn default_languages() -> Vec<String> {
    scorer::default_pl_lexicon()
        .names()
        .iter()
        .cloned()
        .collect()
}

#[pymodule]
fn codeness(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<TokenScoreTable>()?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_token, m)?)?;
    m.add_function(wrap_pyfunction!(filter_posts, m)?)?;
    m.add_function(wrap_pyfunction!(term_delta, m)?)?;
    m.add_function(wrap_pyfunction!(is_edited, m)?)?;
    m.add_function(wrap_pyfunction!(detect_pl_mentions, m)?)?;
    m.add_function(wrap_pyfunction!(dedupe_queries, m)?)?;
    m.add_function(wrap_pyfunction!(cohens_d, m)?)?;
    m.add_function(wrap_pyfunction!(default_stopwords, m)?)?;
    m.add_function(wrap_pyfunction!(default_languages, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
