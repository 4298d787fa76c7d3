//! Browser-log parsing, edited-query detection, and task-session mining.
//!
//! An activity session is a tracker-delimited span of events for one
//! user. Within a session, a query that shares at least one token with
//! its immediate predecessor is an edited query; maximal runs of edited
//! queries form task sessions, and every page visit is attributed to the
//! most recent preceding query.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::io::BufRead;

use chrono::{DateTime, Duration, Utc};
use serde::Deserialize;

use crate::error::{Error, LineError, Result};
use crate::scorer::{classify_score, codeness, Classification, Query};
use crate::tag_corpus::TokenScoreTable;

/// Payload of one log record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventPayload {
    Query { text: String },
    Visit { url: String, title: String },
}

/// One timestamped record from the browser activity log.
#[derive(Debug, Clone, PartialEq)]
pub struct BrowserEvent {
    pub user_id: String,
    pub session_id: String,
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
    pub payload: EventPayload,
}

impl BrowserEvent {
    pub fn is_query(&self) -> bool {
        matches!(self.payload, EventPayload::Query { .. })
    }
}

/// All events of one (user, activity session), ordered by start time with
/// input order breaking ties.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivitySession {
    pub id: String,
    pub user_id: String,
    pub events: Vec<BrowserEvent>,
}

/// A query plus the result-exploration activity attributed to it.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryRecord {
    pub query: Query,
    pub clicked_urls: Vec<String>,
    pub search_time: Duration,
    pub edited_from_previous: bool,
}

/// A maximal run of consecutive edited queries within one activity
/// session, together with its exploration events.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSession {
    pub user_id: String,
    pub session_id: String,
    pub queries: Vec<QueryRecord>,
    pub total_time: Duration,
    pub total_web_visits: u64,
}

#[derive(Deserialize)]
struct RawEvent {
    user: String,
    session: String,
    kind: String,
    start: String,
    end: String,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    url: Option<String>,
    #[serde(default)]
    title: Option<String>,
}

fn parse_timestamp(field: &str, value: &str) -> std::result::Result<DateTime<Utc>, String> {
    DateTime::parse_from_rfc3339(value)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| format!("{field} {value:?}: {e}"))
}

fn validate_event(raw: RawEvent) -> std::result::Result<BrowserEvent, String> {
    let start = parse_timestamp("start", &raw.start)?;
    let end = parse_timestamp("end", &raw.end)?;
    if start > end {
        return Err(format!("start {} is after end {}", raw.start, raw.end));
    }
    let payload = match raw.kind.as_str() {
        "query" => EventPayload::Query {
            text: raw.text.ok_or("query event is missing \"text\"")?,
        },
        "visit" => EventPayload::Visit {
            url: raw.url.ok_or("visit event is missing \"url\"")?,
            title: raw.title.unwrap_or_default(),
        },
        other => return Err(format!("unknown event kind {other:?}")),
    };
    Ok(BrowserEvent {
        user_id: raw.user,
        session_id: raw.session,
        start,
        end,
        payload,
    })
}

/// Parsed log: activity sessions ordered by (user, first event start,
/// session id), plus the lines that were skipped.
#[derive(Debug, Default)]
pub struct LogParseOutcome {
    pub sessions: Vec<ActivitySession>,
    pub errors: Vec<LineError>,
}

/// Parse a JSONL activity log. Malformed lines are skipped and reported
/// with their line numbers; events are grouped per (user, session) and
/// time-ordered within each group.
pub fn parse_log<R: BufRead>(reader: R) -> Result<LogParseOutcome> {
    let mut groups: BTreeMap<(String, String), Vec<BrowserEvent>> = BTreeMap::new();
    let mut errors = Vec::new();

    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Internal(format!("reading log line {}: {e}", idx + 1)))?;
        let trimmed = line.trim_end_matches('\r');
        if trimmed.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<RawEvent>(trimmed)
            .map_err(|e| e.to_string())
            .and_then(validate_event);
        match parsed {
            Ok(event) => groups
                .entry((event.user_id.clone(), event.session_id.clone()))
                .or_default()
                .push(event),
            Err(message) => errors.push(LineError {
                line: idx + 1,
                message,
            }),
        }
    }

    let mut sessions: Vec<ActivitySession> = groups
        .into_iter()
        .map(|((user_id, id), mut events)| {
            events.sort_by_key(|e| e.start); // stable: input order breaks ties
            ActivitySession {
                id,
                user_id,
                events,
            }
        })
        .collect();
    sessions.sort_by(|a, b| {
        let ka = (&a.user_id, a.events.first().map(|e| e.start), &a.id);
        let kb = (&b.user_id, b.events.first().map(|e| e.start), &b.id);
        ka.cmp(&kb)
    });

    Ok(LogParseOutcome { sessions, errors })
}

pub fn parse_log_str(text: &str) -> Result<LogParseOutcome> {
    parse_log(text.as_bytes())
}

/// True iff the two queries share at least one token.
pub fn is_edited(prev: &Query, curr: &Query) -> bool {
    !prev.token_set().is_disjoint(&curr.token_set())
}

/// Added and deleted term sets between consecutive queries.
///
/// `added_seq` / `deleted_seq` keep the surviving tokens in their
/// original query order, which is what n-gram counting over edits needs.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TermDelta {
    pub added: BTreeSet<String>,
    pub deleted: BTreeSet<String>,
    pub added_seq: Vec<String>,
    pub deleted_seq: Vec<String>,
}

/// Set difference in both directions: added = curr \ prev, deleted =
/// prev \ curr.
pub fn term_delta(prev: &Query, curr: &Query) -> TermDelta {
    let prev_set = prev.token_set();
    let curr_set = curr.token_set();
    let added: BTreeSet<String> = curr_set
        .difference(&prev_set)
        .map(|t| t.to_string())
        .collect();
    let deleted: BTreeSet<String> = prev_set
        .difference(&curr_set)
        .map(|t| t.to_string())
        .collect();
    let added_seq = curr
        .tokens
        .iter()
        .filter(|t| added.contains(*t))
        .cloned()
        .collect();
    let deleted_seq = prev
        .tokens
        .iter()
        .filter(|t| deleted.contains(*t))
        .cloned()
        .collect();
    TermDelta {
        added,
        deleted,
        added_seq,
        deleted_seq,
    }
}

/// Per-query search durations, in event order.
///
/// A query's duration runs from its start to the start of the next query
/// in the session, or to the end of the session's last event when it is
/// the final query. Durations are clamped at zero.
pub fn query_search_time(session: &ActivitySession) -> Vec<Duration> {
    let query_starts: Vec<DateTime<Utc>> = session
        .events
        .iter()
        .filter(|e| e.is_query())
        .map(|e| e.start)
        .collect();
    if query_starts.is_empty() {
        return Vec::new();
    }
    let session_end = session.events.last().map(|e| e.end).unwrap();
    let mut durations = Vec::with_capacity(query_starts.len());
    for (i, start) in query_starts.iter().enumerate() {
        let until = match query_starts.get(i + 1) {
            Some(next_start) => *next_start,
            None => session_end,
        };
        durations.push((until - *start).max(Duration::zero()));
    }
    durations
}

/// Segmentation result: the session's task sessions plus the count of
/// page visits that precede every query and so attach to none.
#[derive(Debug, Clone, Default)]
pub struct SegmentOutcome {
    pub tasks: Vec<TaskSession>,
    pub orphan_visits: u64,
}

/// Split a session's queries into maximal runs of consecutive edited
/// queries. Every query lands in exactly one task; page visits attach to
/// the most recent preceding query.
pub fn segment_tasks(session: &ActivitySession) -> SegmentOutcome {
    let durations = query_search_time(session);

    // Gather each query with the visits that follow it.
    let mut records: Vec<QueryRecord> = Vec::new();
    let mut orphan_visits = 0u64;
    for event in &session.events {
        match &event.payload {
            EventPayload::Query { text } => {
                let query = Query::new(text.clone(), session.user_id.clone(), event.start);
                let search_time = durations[records.len()];
                records.push(QueryRecord {
                    query,
                    clicked_urls: Vec::new(),
                    search_time,
                    edited_from_previous: false,
                });
            }
            EventPayload::Visit { url, .. } => match records.last_mut() {
                Some(record) => record.clicked_urls.push(url.clone()),
                None => orphan_visits += 1,
            },
        }
    }

    // Maximal runs: extend the current task while consecutive queries
    // share a token.
    let mut tasks: Vec<TaskSession> = Vec::new();
    let mut run: Vec<QueryRecord> = Vec::new();
    for mut record in records {
        match run.last() {
            Some(prev) if is_edited(&prev.query, &record.query) => {
                record.edited_from_previous = true;
                run.push(record);
            }
            Some(_) => {
                tasks.push(finish_task(session, std::mem::take(&mut run)));
                run.push(record);
            }
            None => run.push(record),
        }
    }
    if !run.is_empty() {
        tasks.push(finish_task(session, run));
    }

    SegmentOutcome {
        tasks,
        orphan_visits,
    }
}

fn finish_task(session: &ActivitySession, queries: Vec<QueryRecord>) -> TaskSession {
    let total_time = queries
        .iter()
        .fold(Duration::zero(), |acc, q| acc + q.search_time);
    let total_web_visits = queries.iter().map(|q| q.clicked_urls.len() as u64).sum();
    TaskSession {
        user_id: session.user_id.clone(),
        session_id: session.id.clone(),
        queries,
        total_time,
        total_web_visits,
    }
}

/// A task's codeness is the maximum codeness over its queries; the label
/// applies the same strict-threshold rule as single queries.
pub fn task_codeness(
    task: &TaskSession,
    table: &TokenScoreTable,
    threshold: f64,
) -> Result<(f64, Classification)> {
    if task.queries.is_empty() {
        return Err(Error::validation("task session has no queries"));
    }
    let score = task
        .queries
        .iter()
        .map(|q| codeness(table, &q.query))
        .fold(f64::NEG_INFINITY, f64::max);
    let classification = classify_score(score, threshold)?;
    Ok((score, classification))
}
