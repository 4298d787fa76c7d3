//! Query tokenization, codeness scoring, and code/non-code classification.

use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tag_corpus::TokenScoreTable;

/// Characters that survive at token edges besides letters and digits.
/// Keeps tags like `c#`, `c++`, `asp.net`, and `codeigniter-3` intact.
fn is_token_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '#' | '+' | '.' | '-')
}

/// Normalize a single raw token: lowercase, then strip leading/trailing
/// characters outside the token alphabet. Returns `None` when nothing is
/// left (e.g. a bare `&`).
pub fn normalize_token(raw: &str) -> Option<String> {
    let lower = raw.to_lowercase();
    let trimmed = lower.trim_matches(|c| !is_token_char(c));
    if trimmed.is_empty() {
        None
    } else {
        Some(trimmed.to_string())
    }
}

/// Split on whitespace and normalize each piece, dropping pieces that
/// normalize to nothing. Deterministic: same input, same output.
pub fn tokenize(raw_text: &str) -> Vec<String> {
    raw_text
        .split_whitespace()
        .filter_map(normalize_token)
        .collect()
}

/// One search query with its normalized token list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub raw_text: String,
    pub tokens: Vec<String>,
    pub user_id: String,
    pub issued_at: DateTime<Utc>,
}

impl Query {
    pub fn new(raw_text: impl Into<String>, user_id: impl Into<String>, issued_at: DateTime<Utc>) -> Self {
        let raw_text = raw_text.into();
        let tokens = tokenize(&raw_text);
        Query {
            raw_text,
            tokens,
            user_id: user_id.into(),
            issued_at,
        }
    }

    /// Convenience constructor when only the text matters.
    pub fn from_text(raw_text: impl Into<String>) -> Self {
        Query::new(raw_text, "", DateTime::<Utc>::UNIX_EPOCH)
    }

    /// Distinct tokens of the query.
    pub fn token_set(&self) -> BTreeSet<&str> {
        self.tokens.iter().map(String::as_str).collect()
    }

    /// Tokens joined back with single spaces; the key used for duplicate
    /// detection, so case and spacing variants collapse.
    pub fn normalized_text(&self) -> String {
        self.tokens.join(" ")
    }
}

/// Code vs. non-code verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    Code,
    NonCode,
}

impl Label {
    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Code => "Code",
            Label::NonCode => "NonCode",
        }
    }

    /// Parse an annotation label. Accepts `code` / `noncode` in any case.
    pub fn parse(s: &str) -> Result<Label> {
        match s.trim().to_lowercase().as_str() {
            "code" => Ok(Label::Code),
            "noncode" | "non-code" => Ok(Label::NonCode),
            other => Err(Error::validation(format!(
                "unknown label {other:?}; expected \"code\" or \"noncode\""
            ))),
        }
    }
}

/// A label together with the score and threshold that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub label: Label,
    pub score: f64,
    pub threshold: f64,
}

/// Sum of the token scores over all token positions. Duplicate
/// occurrences each contribute; the empty query scores 0.
pub fn codeness(table: &TokenScoreTable, query: &Query) -> f64 {
    // fold from +0.0: an empty iterator's `sum()` would give -0.0
    query
        .tokens
        .iter()
        .fold(0.0, |acc, t| acc + table.score(t))
}

/// Apply the strict-threshold rule to an already-computed score: Code
/// iff `score > threshold`, so a score exactly at the threshold is
/// NonCode.
pub fn classify_score(score: f64, threshold: f64) -> Result<Classification> {
    if threshold.is_nan() || threshold < 0.0 {
        return Err(Error::validation(format!(
            "threshold must be a non-negative number, got {threshold}"
        )));
    }
    let label = if score > threshold {
        Label::Code
    } else {
        Label::NonCode
    };
    Ok(Classification {
        label,
        score,
        threshold,
    })
}

/// Score the query and classify it.
pub fn classify(table: &TokenScoreTable, query: &Query, threshold: f64) -> Result<Classification> {
    classify_score(codeness(table, query), threshold)
}

/// Set of normalized programming-language names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlLexicon {
    names: BTreeSet<String>,
}

impl PlLexicon {
    /// Parse one name per line. A line is a comment only when it starts
    /// with `#` followed by a space, so the token `c#` is never a comment.
    pub fn parse(text: &str) -> PlLexicon {
        let mut names = BTreeSet::new();
        for line in text.lines() {
            let line = line.strip_suffix('\r').unwrap_or(line);
            if line.starts_with("# ") {
                continue;
            }
            if let Some(token) = normalize_token(line) {
                names.insert(token);
            }
        }
        PlLexicon { names }
    }

    pub fn from_names<I, S>(names: I) -> PlLexicon
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        PlLexicon {
            names: names
                .into_iter()
                .filter_map(|n| normalize_token(n.as_ref()))
                .collect(),
        }
    }

    pub fn names(&self) -> &BTreeSet<String> {
        &self.names
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }
}

/// The bundled list of 100 popular programming-language names.
pub fn default_pl_lexicon() -> PlLexicon {
    PlLexicon::parse(include_str!("../assets/languages.txt"))
}

/// Exact token-level intersection between the query and the lexicon.
/// No substring matching: `go` matches only the standalone token `go`.
pub fn detect_pl_mentions(query: &Query, lexicon: &PlLexicon) -> BTreeSet<String> {
    query
        .token_set()
        .into_iter()
        .filter(|t| lexicon.names.contains(*t))
        .map(str::to_string)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tag_corpus::{build_table, TagFrequencyRecord};

    fn table(pairs: &[(&str, u64)]) -> TokenScoreTable {
        let records: Vec<TagFrequencyRecord> = pairs
            .iter()
            .map(|(tag, count)| TagFrequencyRecord {
                tag: tag.to_string(),
                count: *count,
            })
            .collect();
        build_table(&records, "test").unwrap()
    }

    #[test]
    fn tokenize_splits_and_lowercases() {
        assert_eq!(
            tokenize("How to get mp3 play time"),
            vec!["how", "to", "get", "mp3", "play", "time"]
        );
    }

    #[test]
    fn tokenize_drops_bare_punctuation() {
        assert_eq!(
            tokenize("elasticsearch.net & nest"),
            vec!["elasticsearch.net", "nest"]
        );
    }

    #[test]
    fn tokenize_empty_input() {
        assert_eq!(tokenize(""), Vec::<String>::new());
    }

    #[test]
    fn tokenize_keeps_tag_alphabet_edges() {
        assert_eq!(tokenize("(C#) c++! \"asp.net\""), vec!["c#", "c++", "asp.net"]);
    }

    #[test]
    fn codeness_zero_when_no_table_tokens() {
        let t = table(&[("java", 71869), ("android", 96210)]);
        let q = Query::from_text("houston luxury suv rental");
        assert_eq!(codeness(&t, &q), 0.0);
    }

    #[test]
    fn codeness_empty_query_is_zero() {
        let t = table(&[("java", 71869)]);
        assert_eq!(codeness(&t, &Query::from_text("")), 0.0);
    }

    #[test]
    fn codeness_sums_known_scores() {
        let t = table(&[("java", 71869), ("android", 96210)]);
        let q = Query::from_text("java android kitchen");
        // 17.13 + 17.55 + 0
        assert!((codeness(&t, &q) - 34.68).abs() < 0.02);
    }

    #[test]
    fn codeness_counts_duplicate_occurrences() {
        let t = table(&[("java", 71869)]);
        let single = codeness(&t, &Query::from_text("java"));
        let double = codeness(&t, &Query::from_text("java java"));
        assert!((double - 2.0 * single).abs() < 1e-12);
    }

    #[test]
    fn classify_strict_threshold() {
        let t = table(&[("java", 71869), ("android", 96210)]);
        let code = classify(&t, &Query::from_text("java android kitchen"), 10.0).unwrap();
        assert_eq!(code.label, Label::Code);

        let noncode = classify(&t, &Query::from_text("houston luxury suv rental"), 10.0).unwrap();
        assert_eq!(noncode.label, Label::NonCode);
        assert_eq!(noncode.score, 0.0);

        // boundary: score == threshold stays NonCode
        let t2 = table(&[("x", 512)]); // 1 + log2(512) = 10
        let boundary = classify(&t2, &Query::from_text("x"), 10.0).unwrap();
        assert_eq!(boundary.score, 10.0);
        assert_eq!(boundary.label, Label::NonCode);
    }

    #[test]
    fn classify_rejects_negative_threshold() {
        let t = table(&[]);
        let err = classify(&t, &Query::from_text("a"), -1.0).unwrap_err();
        assert!(err.is_validation());
        assert!(classify(&t, &Query::from_text("a"), f64::NAN).is_err());
    }

    #[test]
    fn pl_mentions_exact_token_match() {
        let lex = PlLexicon::from_names(["c#", "go", "sql", "java"]);
        let q = Query::from_text("how to get all textbox names inside table layout panel c#");
        assert_eq!(
            detect_pl_mentions(&q, &lex),
            BTreeSet::from(["c#".to_string()])
        );

        assert!(detect_pl_mentions(&Query::from_text("messi curly goal"), &lex).is_empty());

        let q = Query::from_text("go to sql server");
        let expected: BTreeSet<String> = ["go", "sql"].iter().map(|s| s.to_string()).collect();
        assert_eq!(detect_pl_mentions(&q, &lex), expected);
    }

    #[test]
    fn lexicon_comment_rule_keeps_hash_tokens() {
        let lex = PlLexicon::parse("# this is a comment\nc#\nf#\n\n# another\ngo\n");
        assert_eq!(lex.len(), 3);
        assert!(lex.names().contains("c#"));
        assert!(lex.names().contains("f#"));
        assert!(lex.names().contains("go"));
    }

    #[test]
    fn default_lexicon_has_hundred_names() {
        let lex = default_pl_lexicon();
        assert_eq!(lex.len(), 100);
        for name in ["c#", "java", "python", "go", "r", "icon", ".net"] {
            assert!(lex.names().contains(name), "missing {name}");
        }
    }

    #[test]
    fn label_parse_accepts_both_cases() {
        assert_eq!(Label::parse("code").unwrap(), Label::Code);
        assert_eq!(Label::parse(" NonCode ").unwrap(), Label::NonCode);
        assert!(Label::parse("maybe").is_err());
    }
}
