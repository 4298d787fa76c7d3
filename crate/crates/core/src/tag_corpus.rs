//! Tag ingestion, single-occurrence filtering, and the token score table.
//!
//! A tag's frequency is the number of posts where it appears as the sole
//! tag; tags that never occur alone carry no code signal and are dropped.
//! The score of a tag with single-occurrence count `n` is `1 + log2(n)`,
//! so doubling the count raises the score by exactly one.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, LineError, Result};
use crate::scorer::normalize_token;

/// One tagged post from the source export.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedPost {
    pub post_id: String,
    pub tags: Vec<String>,
}

/// A tag with its single-occurrence post count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagFrequencyRecord {
    pub tag: String,
    pub count: u64,
}

/// A post that could not be counted, with the reason.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedPost {
    pub post_id: String,
    pub reason: String,
}

/// Result of filtering a post stream: frequency records plus a summary of
/// the records that were skipped.
#[derive(Debug, Clone, Default)]
pub struct FilterOutcome {
    pub records: Vec<TagFrequencyRecord>,
    pub skipped: Vec<SkippedPost>,
}

/// Count, per tag, the posts where it is the sole tag. Tags are
/// normalized before counting; a post whose tag list is empty or contains
/// a tag that normalizes to nothing is skipped and reported. Records come
/// back sorted by tag.
pub fn filter_posts<I>(posts: I) -> FilterOutcome
where
    I: IntoIterator<Item = TaggedPost>,
{
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut skipped = Vec::new();

    for post in posts {
        if post.tags.is_empty() {
            skipped.push(SkippedPost {
                post_id: post.post_id,
                reason: "empty tag list".to_string(),
            });
            continue;
        }
        let mut normalized = Vec::with_capacity(post.tags.len());
        let mut bad_tag = None;
        for tag in &post.tags {
            match normalize_token(tag) {
                Some(t) => normalized.push(t),
                None => {
                    bad_tag = Some(tag.clone());
                    break;
                }
            }
        }
        if let Some(tag) = bad_tag {
            skipped.push(SkippedPost {
                post_id: post.post_id,
                reason: format!("tag {tag:?} is empty after normalization"),
            });
            continue;
        }
        // Only posts carrying exactly one tag contribute to the counts.
        if let [tag] = normalized.as_slice() {
            *counts.entry(tag.clone()).or_insert(0) += 1;
        }
    }

    FilterOutcome {
        records: counts
            .into_iter()
            .map(|(tag, count)| TagFrequencyRecord { tag, count })
            .collect(),
        skipped,
    }
}

/// Immutable map from normalized token to its codeness score.
///
/// Lookups of absent tokens yield exactly 0. Once built the table is
/// never mutated, so it can be shared freely across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenScoreTable {
    entries: BTreeMap<String, f64>,
    source_meta: String,
}

impl TokenScoreTable {
    /// Build a table from pre-computed scores. Scores must be finite and
    /// non-negative; tokens must be distinct.
    pub fn from_entries<I>(entries: I, source_meta: impl Into<String>) -> Result<TokenScoreTable>
    where
        I: IntoIterator<Item = (String, f64)>,
    {
        let mut map = BTreeMap::new();
        for (token, score) in entries {
            if !score.is_finite() || score < 0.0 {
                return Err(Error::validation(format!(
                    "score for token {token:?} must be finite and non-negative, got {score}"
                )));
            }
            if map.insert(token.clone(), score).is_some() {
                return Err(Error::validation(format!("duplicate token {token:?}")));
            }
        }
        Ok(TokenScoreTable {
            entries: map,
            source_meta: source_meta.into(),
        })
    }

    /// Score of `token`, or 0 when the token is unknown. The token must
    /// already be normalized.
    pub fn score(&self, token: &str) -> f64 {
        self.entries.get(token).copied().unwrap_or(0.0)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.entries.contains_key(token)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn source_meta(&self) -> &str {
        &self.source_meta
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.entries.iter().map(|(t, s)| (t.as_str(), *s))
    }

    /// Copy of the table with every score multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<TokenScoreTable> {
        TokenScoreTable::from_entries(
            self.entries.iter().map(|(t, s)| (t.clone(), s * factor)),
            self.source_meta.clone(),
        )
    }

    /// Canonical JSON form; floats survive a save/load round trip
    /// bit-exactly.
    pub fn to_json(&self) -> Result<String> {
        let doc = TableDoc {
            schema: 1,
            source_meta: self.source_meta.clone(),
            entries: self.entries.clone(),
        };
        serde_json::to_string_pretty(&doc)
            .map_err(|e| Error::Internal(format!("serializing score table: {e}")))
    }

    pub fn from_json(text: &str) -> Result<TokenScoreTable> {
        let doc: TableDoc = serde_json::from_str(text)
            .map_err(|e| Error::validation(format!("malformed score table JSON: {e}")))?;
        if doc.schema != 1 {
            return Err(Error::validation(format!(
                "unsupported score table schema {}",
                doc.schema
            )));
        }
        TokenScoreTable::from_entries(doc.entries, doc.source_meta)
    }

    /// CSV export: header `token,score`, scores at 6 decimal places,
    /// rows sorted by token.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let render = |w: &mut W| -> std::io::Result<()> {
            writeln!(w, "token,score")?;
            for (token, score) in &self.entries {
                writeln!(w, "{},{:.6}", csv_escape(token), score)?;
            }
            Ok(())
        };
        render(&mut out).map_err(|e| Error::Internal(format!("writing score table CSV: {e}")))
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Internal(e.to_string()))
    }
}

#[derive(Serialize, Deserialize)]
struct TableDoc {
    schema: u32,
    source_meta: String,
    entries: BTreeMap<String, f64>,
}

fn csv_escape(field: &str) -> String {
    if field.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Build the score table from frequency records: `score = 1 + log2(count)`.
/// Duplicate tags and non-positive counts are rejected.
pub fn build_table(
    records: &[TagFrequencyRecord],
    source_meta: impl Into<String>,
) -> Result<TokenScoreTable> {
    let mut entries = BTreeMap::new();
    for record in records {
        if record.count == 0 {
            return Err(Error::validation(format!(
                "tag {:?} has count 0; counts must be >= 1",
                record.tag
            )));
        }
        let score = 1.0 + (record.count as f64).log2();
        match entries.entry(record.tag.clone()) {
            Entry::Vacant(slot) => {
                slot.insert(score);
            }
            Entry::Occupied(_) => {
                return Err(Error::validation(format!("duplicate tag {:?}", record.tag)));
            }
        }
    }
    Ok(TokenScoreTable {
        entries,
        source_meta: source_meta.into(),
    })
}

/// Read a `tag,count` frequency CSV. Tags are normalized; the header is
/// required.
pub fn read_frequency_csv<R: BufRead>(reader: R) -> Result<Vec<TagFrequencyRecord>> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    {
        let headers = csv_reader
            .headers()
            .map_err(|e| Error::validation(format!("frequency CSV: {e}")))?;
        let cols: Vec<String> = headers.iter().map(|h| h.trim().to_lowercase()).collect();
        if cols != ["tag", "count"] {
            return Err(Error::validation(format!(
                "frequency CSV must start with header \"tag,count\", found {:?}",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
    }
    let mut records = Vec::new();
    for (idx, row) in csv_reader.records().enumerate() {
        let row = row.map_err(|e| Error::validation(format!("frequency CSV row {}: {e}", idx + 2)))?;
        let raw_tag = row.get(0).unwrap_or("");
        let tag = normalize_token(raw_tag).ok_or_else(|| {
            Error::validation(format!(
                "frequency CSV row {}: tag {raw_tag:?} is empty after normalization",
                idx + 2
            ))
        })?;
        let count: u64 = row
            .get(1)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|_| {
                Error::validation(format!(
                    "frequency CSV row {}: count {:?} is not a base-10 integer",
                    idx + 2,
                    row.get(1).unwrap_or("")
                ))
            })?;
        records.push(TagFrequencyRecord { tag, count });
    }
    Ok(records)
}

/// Outcome of reading a posts JSONL stream: parsed posts plus per-line
/// errors for the lines that could not be decoded.
#[derive(Debug, Default)]
pub struct PostsReadOutcome {
    pub posts: Vec<TaggedPost>,
    pub errors: Vec<LineError>,
}

/// Read posts from JSONL, one `{"post_id": ..., "tags": [...]}` object
/// per line. Blank lines are ignored; malformed lines are reported with
/// their line number and skipped.
pub fn read_posts_jsonl<R: BufRead>(reader: R) -> Result<PostsReadOutcome> {
    let mut outcome = PostsReadOutcome::default();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Internal(format!("reading posts line {}: {e}", idx + 1)))?;
        let trimmed = line.trim_end_matches('\r');
        if trimmed.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<TaggedPost>(trimmed) {
            Ok(post) => outcome.posts.push(post),
            Err(e) => outcome.errors.push(LineError {
                line: idx + 1,
                message: e.to_string(),
            }),
        }
    }
    Ok(outcome)
}

/// Load a score table from text, accepting any of the shapes the tooling
/// emits: the JSON table document, a `token,score` CSV, or a `tag,count`
/// frequency CSV (which is built into a table on the fly).
pub fn load_table_str(text: &str, source_meta: &str) -> Result<TokenScoreTable> {
    if text.trim_start().starts_with('{') {
        return TokenScoreTable::from_json(text);
    }
    let header = text.lines().next().unwrap_or("").trim().to_lowercase();
    let header_cols: Vec<&str> = header.split(',').map(str::trim).collect();
    match header_cols.as_slice() {
        ["token", "score"] => {
            let mut csv_reader = csv::ReaderBuilder::new()
                .has_headers(true)
                .from_reader(text.as_bytes());
            let mut entries = Vec::new();
            for (idx, row) in csv_reader.records().enumerate() {
                let row =
                    row.map_err(|e| Error::validation(format!("table CSV row {}: {e}", idx + 2)))?;
                let token = row.get(0).unwrap_or("").to_string();
                let score: f64 = row.get(1).unwrap_or("").trim().parse().map_err(|_| {
                    Error::validation(format!(
                        "table CSV row {}: score {:?} is not a number",
                        idx + 2,
                        row.get(1).unwrap_or("")
                    ))
                })?;
                entries.push((token, score));
            }
            TokenScoreTable::from_entries(entries, source_meta)
        }
        ["tag", "count"] => {
            let records = read_frequency_csv(text.as_bytes())?;
            build_table(&records, source_meta)
        }
        _ => Err(Error::validation(
            "unrecognized table format: expected a JSON table document, a \"token,score\" CSV, \
             or a \"tag,count\" frequency CSV"
                .to_string(),
        )),
    }
}
