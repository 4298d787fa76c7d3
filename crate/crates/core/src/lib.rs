//! Codeness: code-intent scoring for web-search queries and mining of
//! developer browser search logs.
//!
//! The library measures how code-related a search query is. Tags that
//! appear as the sole tag of a post form the token set; a token with
//! single-occurrence count `n` scores `1 + log2(n)`, a query scores the
//! sum over its tokens, and a query whose score exceeds a threshold
//! (default 10) counts as a code query. On top of the scorer sit the
//! log-mining pieces: activity-session parsing, edited-query detection,
//! task segmentation, classifier evaluation sweeps, and the descriptive
//! report over query/task effort.

pub mod analysis;
pub mod error;
pub mod report;
pub mod scorer;
pub mod session;
pub mod tag_corpus;

mod provenance;

pub use error::{Error, LineError, Result};
pub use provenance::sha256_hex;
pub use scorer::{
    classify, classify_score, codeness, default_pl_lexicon, detect_pl_mentions, normalize_token,
    tokenize, Classification, Label, PlLexicon, Query,
};
pub use tag_corpus::{build_table, filter_posts, TagFrequencyRecord, TaggedPost, TokenScoreTable};
