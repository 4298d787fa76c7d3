//! Assembly of the analysis report: one deterministic JSON document plus
//! optional per-table CSVs.
//!
//! Linguistic metrics (query length, vocabulary, language mentions) are
//! computed on duplicate-filtered queries; effort metrics (durations,
//! visits, edits, tasks) on the full stream, where repetition matters.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::Serialize;

use crate::analysis::{
    cohens_d, delta_codeness, edit_ngram_stats, task_stats, vocabulary_stats, EditDelta,
    EditKind, Summary, TaskStats, VocabStats, TASK_BUCKETS,
};
use crate::error::{Error, Result};
use crate::scorer::{classify_score, codeness, detect_pl_mentions, Label, PlLexicon, Query};
use crate::session::{segment_tasks, ActivitySession, LogParseOutcome, TaskSession};
use crate::tag_corpus::TokenScoreTable;

/// Knobs for report construction.
#[derive(Debug, Clone)]
pub struct ReportConfig {
    pub threshold: f64,
    pub stopwords: BTreeSet<String>,
    pub lexicon: PlLexicon,
    /// Length of the ranked token/n-gram tables.
    pub top_k: usize,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            threshold: 10.0,
            stopwords: crate::analysis::default_stopwords(),
            lexicon: crate::scorer::default_pl_lexicon(),
            top_k: 20,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Totals {
    pub events: u64,
    pub activity_sessions: u64,
    pub users: u64,
    pub queries: u64,
    pub code_queries: u64,
    pub noncode_queries: u64,
    pub code_fraction: f64,
    pub noncode_fraction: f64,
    pub malformed_lines: u64,
    pub orphan_visits: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DuplicateStats {
    pub total: u64,
    pub unique: u64,
    pub removed: u64,
    pub removed_fraction: f64,
    pub code_removed_fraction: f64,
    pub noncode_removed_fraction: f64,
}

/// A per-class pair of distributions with the code-vs-noncode effect
/// size (`None` when either side is too small or degenerate).
#[derive(Debug, Clone, Serialize)]
pub struct ClassDistributions {
    pub code: Summary,
    pub noncode: Summary,
    pub effect_size: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PlMentionStats {
    pub code_queries_with_mention: u64,
    pub rate_in_code_queries: f64,
    pub top_languages: Vec<(String, u64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct WebVisitStats {
    pub code: Summary,
    pub noncode: Summary,
    pub effect_size: Option<f64>,
    pub zero_visit_fraction_code: f64,
    pub zero_visit_fraction_noncode: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EditKindCounts {
    pub only_add: u64,
    pub only_delete: u64,
    pub mixed: u64,
    pub no_change: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EditDirectionCounts {
    pub increased: u64,
    pub unchanged: u64,
    pub decreased: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DeltaCodenessStats {
    pub overall: Summary,
    pub only_add: Summary,
    pub only_delete: Summary,
    pub mixed: Summary,
}

#[derive(Debug, Clone, Serialize)]
pub struct EditClassStats {
    pub edits: u64,
    pub kind_counts: EditKindCounts,
    pub direction: EditDirectionCounts,
    pub delta_codeness: DeltaCodenessStats,
    pub added_terms_per_edit: Summary,
    pub deleted_terms_per_edit: Summary,
    pub added_unigrams: Vec<(String, u64)>,
    pub added_bigrams: Vec<(String, u64)>,
    pub deleted_unigrams: Vec<(String, u64)>,
    pub deleted_bigrams: Vec<(String, u64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EditStats {
    pub edited_queries: u64,
    pub edited_fraction_overall: f64,
    pub edited_fraction_code: f64,
    pub edited_fraction_noncode: f64,
    pub code: EditClassStats,
    pub noncode: EditClassStats,
}

#[derive(Debug, Clone, Serialize)]
pub struct TaskReport {
    pub total: u64,
    pub code_count: u64,
    pub noncode_count: u64,
    pub code: TaskStats,
    pub noncode: TaskStats,
    pub duration_effect_size: Option<f64>,
    pub web_visit_effect_size: Option<f64>,
    pub queries_per_task_effect_size: Option<f64>,
}

/// The complete analysis output.
#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub schema: u32,
    pub threshold: f64,
    pub provenance: BTreeMap<String, String>,
    pub totals: Totals,
    pub duplicates: DuplicateStats,
    pub query_length: ClassDistributions,
    pub vocabulary: VocabStats,
    pub pl_mentions: PlMentionStats,
    pub query_duration_seconds: ClassDistributions,
    pub query_web_visits: WebVisitStats,
    pub edits: EditStats,
    pub tasks: TaskReport,
}

impl AnalysisReport {
    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Internal(format!("serializing report: {e}")))?;
        text.push('\n');
        Ok(text)
    }
}

struct ScoredQuery {
    tokens: usize,
    normalized_text: String,
    search_seconds: f64,
    visits: u64,
    edited: bool,
    label: Label,
    mentions: BTreeSet<String>,
}

fn fraction(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn effect_size(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() < 2 || b.len() < 2 {
        return None;
    }
    cohens_d(a, b).ok().flatten()
}

fn seconds(d: chrono::Duration) -> f64 {
    d.num_milliseconds() as f64 / 1000.0
}

fn class_distributions(code: &[f64], noncode: &[f64]) -> ClassDistributions {
    ClassDistributions {
        code: Summary::from_values(code),
        noncode: Summary::from_values(noncode),
        effect_size: effect_size(code, noncode),
    }
}

fn edit_class_stats(deltas: &[EditDelta], top_k: usize) -> Result<EditClassStats> {
    let mut kind_counts = EditKindCounts {
        only_add: 0,
        only_delete: 0,
        mixed: 0,
        no_change: 0,
    };
    let mut direction = EditDirectionCounts {
        increased: 0,
        unchanged: 0,
        decreased: 0,
    };
    let mut overall = Vec::with_capacity(deltas.len());
    let mut only_add = Vec::new();
    let mut only_delete = Vec::new();
    let mut mixed = Vec::new();
    let mut added_counts = Vec::with_capacity(deltas.len());
    let mut deleted_counts = Vec::with_capacity(deltas.len());
    for delta in deltas {
        let d = delta.delta_codeness;
        overall.push(d);
        added_counts.push(delta.added.len() as f64);
        deleted_counts.push(delta.deleted.len() as f64);
        match delta.kind {
            EditKind::OnlyAdd => {
                kind_counts.only_add += 1;
                only_add.push(d);
            }
            EditKind::OnlyDelete => {
                kind_counts.only_delete += 1;
                only_delete.push(d);
            }
            EditKind::Mixed => {
                kind_counts.mixed += 1;
                mixed.push(d);
            }
            EditKind::NoChange => kind_counts.no_change += 1,
        }
        if d > 0.0 {
            direction.increased += 1;
        } else if d < 0.0 {
            direction.decreased += 1;
        } else {
            direction.unchanged += 1;
        }
    }
    let mut unigrams = edit_ngram_stats(deltas, 1)?;
    let mut bigrams = edit_ngram_stats(deltas, 2)?;
    unigrams.added.truncate(top_k);
    unigrams.deleted.truncate(top_k);
    bigrams.added.truncate(top_k);
    bigrams.deleted.truncate(top_k);
    Ok(EditClassStats {
        edits: deltas.len() as u64,
        kind_counts,
        direction,
        delta_codeness: DeltaCodenessStats {
            overall: Summary::from_values(&overall),
            only_add: Summary::from_values(&only_add),
            only_delete: Summary::from_values(&only_delete),
            mixed: Summary::from_values(&mixed),
        },
        added_terms_per_edit: Summary::from_values(&added_counts),
        deleted_terms_per_edit: Summary::from_values(&deleted_counts),
        added_unigrams: unigrams.added,
        added_bigrams: bigrams.added,
        deleted_unigrams: unigrams.deleted,
        deleted_bigrams: bigrams.deleted,
    })
}

/// Build the full report from a parsed log.
pub fn build_report(
    table: &TokenScoreTable,
    parse: &LogParseOutcome,
    config: &ReportConfig,
    provenance: BTreeMap<String, String>,
) -> Result<AnalysisReport> {
    let threshold = config.threshold;
    // reject bad thresholds up front
    classify_score(0.0, threshold)?;

    let mut scored: Vec<ScoredQuery> = Vec::new();
    let mut tasks: Vec<TaskSession> = Vec::new();
    let mut code_deltas: Vec<EditDelta> = Vec::new();
    let mut noncode_deltas: Vec<EditDelta> = Vec::new();
    let mut orphan_visits = 0u64;
    let mut events = 0u64;
    let mut users: BTreeSet<&str> = BTreeSet::new();

    for session in &parse.sessions {
        events += session.events.len() as u64;
        users.insert(&session.user_id);
        let outcome = segment_tasks(session);
        orphan_visits += outcome.orphan_visits;
        for task in &outcome.tasks {
            for (idx, record) in task.queries.iter().enumerate() {
                let score = codeness(table, &record.query);
                let label = classify_score(score, threshold)?.label;
                scored.push(ScoredQuery {
                    tokens: record.query.tokens.len(),
                    normalized_text: record.query.normalized_text(),
                    search_seconds: seconds(record.search_time),
                    visits: record.clicked_urls.len() as u64,
                    edited: record.edited_from_previous,
                    label,
                    mentions: detect_pl_mentions(&record.query, &config.lexicon),
                });
                if idx > 0 {
                    let delta =
                        delta_codeness(&task.queries[idx - 1].query, &record.query, table);
                    match label {
                        Label::Code => code_deltas.push(delta),
                        Label::NonCode => noncode_deltas.push(delta),
                    }
                }
            }
        }
        tasks.extend(outcome.tasks);
    }

    let total_queries = scored.len() as u64;
    let code_total = scored.iter().filter(|q| q.label == Label::Code).count() as u64;
    let noncode_total = total_queries - code_total;

    // Duplicate filtering on normalized text, first occurrence wins.
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    let mut unique: Vec<&ScoredQuery> = Vec::new();
    for query in &scored {
        if seen.insert(query.normalized_text.as_str()) {
            unique.push(query);
        }
    }
    let unique_code: Vec<&&ScoredQuery> =
        unique.iter().filter(|q| q.label == Label::Code).collect();
    let unique_noncode: Vec<&&ScoredQuery> =
        unique.iter().filter(|q| q.label == Label::NonCode).collect();

    let duplicates = DuplicateStats {
        total: total_queries,
        unique: unique.len() as u64,
        removed: total_queries - unique.len() as u64,
        removed_fraction: fraction(total_queries - unique.len() as u64, total_queries),
        code_removed_fraction: fraction(code_total - unique_code.len() as u64, code_total),
        noncode_removed_fraction: fraction(
            noncode_total - unique_noncode.len() as u64,
            noncode_total,
        ),
    };

    // Linguistic metrics over duplicate-filtered queries.
    let length_code: Vec<f64> = unique_code.iter().map(|q| q.tokens as f64).collect();
    let length_noncode: Vec<f64> = unique_noncode.iter().map(|q| q.tokens as f64).collect();

    let code_queries_for_vocab: Vec<Query> = unique_code
        .iter()
        .map(|q| Query::from_text(q.normalized_text.clone()))
        .collect();
    let noncode_queries_for_vocab: Vec<Query> = unique_noncode
        .iter()
        .map(|q| Query::from_text(q.normalized_text.clone()))
        .collect();
    let vocabulary = vocabulary_stats(
        &code_queries_for_vocab.iter().collect::<Vec<_>>(),
        &noncode_queries_for_vocab.iter().collect::<Vec<_>>(),
        &config.stopwords,
        config.top_k,
    );

    let mut language_counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut mentioning = 0u64;
    for query in &unique_code {
        if !query.mentions.is_empty() {
            mentioning += 1;
        }
        for language in &query.mentions {
            *language_counts.entry(language.clone()).or_insert(0) += 1;
        }
    }
    let mut top_languages: Vec<(String, u64)> =
        language_counts.into_iter().collect();
    top_languages.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    top_languages.truncate(config.top_k);
    let pl_mentions = PlMentionStats {
        code_queries_with_mention: mentioning,
        rate_in_code_queries: fraction(mentioning, unique_code.len() as u64),
        top_languages,
    };

    // Effort metrics over the full query stream.
    let duration_code: Vec<f64> = scored
        .iter()
        .filter(|q| q.label == Label::Code)
        .map(|q| q.search_seconds)
        .collect();
    let duration_noncode: Vec<f64> = scored
        .iter()
        .filter(|q| q.label == Label::NonCode)
        .map(|q| q.search_seconds)
        .collect();
    let visits_code: Vec<f64> = scored
        .iter()
        .filter(|q| q.label == Label::Code)
        .map(|q| q.visits as f64)
        .collect();
    let visits_noncode: Vec<f64> = scored
        .iter()
        .filter(|q| q.label == Label::NonCode)
        .map(|q| q.visits as f64)
        .collect();
    let zero_code = scored
        .iter()
        .filter(|q| q.label == Label::Code && q.visits == 0)
        .count() as u64;
    let zero_noncode = scored
        .iter()
        .filter(|q| q.label == Label::NonCode && q.visits == 0)
        .count() as u64;

    let edited_total = scored.iter().filter(|q| q.edited).count() as u64;
    let edited_code = scored
        .iter()
        .filter(|q| q.edited && q.label == Label::Code)
        .count() as u64;
    let edited_noncode = edited_total - edited_code;

    let edits = EditStats {
        edited_queries: edited_total,
        edited_fraction_overall: fraction(edited_total, total_queries),
        edited_fraction_code: fraction(edited_code, code_total),
        edited_fraction_noncode: fraction(edited_noncode, noncode_total),
        code: edit_class_stats(&code_deltas, config.top_k)?,
        noncode: edit_class_stats(&noncode_deltas, config.top_k)?,
    };

    // Task-level metrics.
    let mut code_tasks: Vec<&TaskSession> = Vec::new();
    let mut noncode_tasks: Vec<&TaskSession> = Vec::new();
    for task in &tasks {
        let (_, classification) = crate::session::task_codeness(task, table, threshold)?;
        match classification.label {
            Label::Code => code_tasks.push(task),
            Label::NonCode => noncode_tasks.push(task),
        }
    }
    let code_task_stats = task_stats(&code_tasks);
    let noncode_task_stats = task_stats(&noncode_tasks);
    let task_values = |tasks: &[&TaskSession]| -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let durations = tasks.iter().map(|t| seconds(t.total_time)).collect();
        let visits = tasks.iter().map(|t| t.total_web_visits as f64).collect();
        let queries = tasks.iter().map(|t| t.queries.len() as f64).collect();
        (durations, visits, queries)
    };
    let (code_durations, code_visits, code_query_counts) = task_values(&code_tasks);
    let (noncode_durations, noncode_visits, noncode_query_counts) = task_values(&noncode_tasks);

    let task_report = TaskReport {
        total: tasks.len() as u64,
        code_count: code_tasks.len() as u64,
        noncode_count: noncode_tasks.len() as u64,
        code: code_task_stats,
        noncode: noncode_task_stats,
        duration_effect_size: effect_size(&code_durations, &noncode_durations),
        web_visit_effect_size: effect_size(&code_visits, &noncode_visits),
        queries_per_task_effect_size: effect_size(&code_query_counts, &noncode_query_counts),
    };

    Ok(AnalysisReport {
        schema: 1,
        threshold,
        provenance,
        totals: Totals {
            events,
            activity_sessions: parse.sessions.len() as u64,
            users: users.len() as u64,
            queries: total_queries,
            code_queries: code_total,
            noncode_queries: noncode_total,
            code_fraction: fraction(code_total, total_queries),
            noncode_fraction: fraction(noncode_total, total_queries),
            malformed_lines: parse.errors.len() as u64,
            orphan_visits,
        },
        duplicates,
        query_length: class_distributions(&length_code, &length_noncode),
        vocabulary,
        pl_mentions,
        query_duration_seconds: class_distributions(&duration_code, &duration_noncode),
        query_web_visits: WebVisitStats {
            code: Summary::from_values(&visits_code),
            noncode: Summary::from_values(&visits_noncode),
            effect_size: effect_size(&visits_code, &visits_noncode),
            zero_visit_fraction_code: fraction(zero_code, code_total),
            zero_visit_fraction_noncode: fraction(zero_noncode, noncode_total),
        },
        edits,
        tasks: task_report,
    })
}

/// Serializable view of one mined task session.
#[derive(Debug, Clone, Serialize)]
pub struct TaskView {
    pub user: String,
    pub session: String,
    pub task_index: u64,
    pub queries: Vec<QueryView>,
    pub total_seconds: f64,
    pub web_visits: u64,
    pub codeness: f64,
    pub label: Label,
}

#[derive(Debug, Clone, Serialize)]
pub struct QueryView {
    pub text: String,
    pub issued_at: String,
    pub search_seconds: f64,
    pub clicked_urls: Vec<String>,
    pub edited_from_previous: bool,
    pub codeness: f64,
    pub label: Label,
}

/// Mine and score all task sessions from parsed activity sessions.
pub fn task_views(
    sessions: &[ActivitySession],
    table: &TokenScoreTable,
    threshold: f64,
) -> Result<(Vec<TaskView>, u64)> {
    let mut views = Vec::new();
    let mut orphan_visits = 0u64;
    for session in sessions {
        let outcome = segment_tasks(session);
        orphan_visits += outcome.orphan_visits;
        for (task_index, task) in outcome.tasks.iter().enumerate() {
            let (score, classification) = crate::session::task_codeness(task, table, threshold)?;
            let queries = task
                .queries
                .iter()
                .map(|record| {
                    let q_score = codeness(table, &record.query);
                    Ok(QueryView {
                        text: record.query.raw_text.clone(),
                        issued_at: record
                            .query
                            .issued_at
                            .to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
                        search_seconds: seconds(record.search_time),
                        clicked_urls: record.clicked_urls.clone(),
                        edited_from_previous: record.edited_from_previous,
                        codeness: q_score,
                        label: classify_score(q_score, threshold)?.label,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            views.push(TaskView {
                user: task.user_id.clone(),
                session: task.session_id.clone(),
                task_index: task_index as u64,
                queries,
                total_seconds: seconds(task.total_time),
                web_visits: task.total_web_visits,
                codeness: score,
                label: classification.label,
            });
        }
    }
    Ok((views, orphan_visits))
}

fn opt(value: Option<f64>) -> String {
    value.map(|v| format!("{v:.6}")).unwrap_or_default()
}

fn summary_row(class: &str, metric: &str, s: &Summary) -> String {
    format!(
        "{class},{metric},{},{},{},{},{},{},{}\n",
        s.count,
        opt(s.min),
        opt(s.q1),
        opt(s.median),
        opt(s.q3),
        opt(s.max),
        opt(s.mean)
    )
}

/// Write the report's tables as plot-ready CSV files under `dir`.
pub fn write_report_csvs(report: &AnalysisReport, dir: &std::path::Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, contents: String| -> Result<()> {
        let path = dir.join(name);
        let mut file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        file.write_all(contents.as_bytes())
            .map_err(|e| Error::io(&path, e))
    };

    let mut distributions =
        String::from("class,metric,count,min,q1,median,q3,max,mean\n");
    for (class, report_side) in [
        ("code", (&report.query_length.code, &report.query_duration_seconds.code, &report.query_web_visits.code)),
        ("noncode", (&report.query_length.noncode, &report.query_duration_seconds.noncode, &report.query_web_visits.noncode)),
    ] {
        distributions.push_str(&summary_row(class, "query_length", report_side.0));
        distributions.push_str(&summary_row(class, "query_duration_seconds", report_side.1));
        distributions.push_str(&summary_row(class, "query_web_visits", report_side.2));
    }
    for (class, stats) in [("code", &report.tasks.code), ("noncode", &report.tasks.noncode)] {
        distributions.push_str(&summary_row(class, "task_duration_seconds", &stats.duration_seconds));
        distributions.push_str(&summary_row(class, "task_web_visits", &stats.web_visits));
        distributions.push_str(&summary_row(class, "task_queries", &stats.queries_per_task));
    }
    write("distributions.csv", distributions)?;

    let mut buckets = String::from("class,bucket,count,percentage\n");
    for (class, stats) in [("code", &report.tasks.code), ("noncode", &report.tasks.noncode)] {
        for (i, name) in TASK_BUCKETS.iter().enumerate() {
            buckets.push_str(&format!(
                "{class},{name},{},{:.6}\n",
                stats.bucket_counts[i], stats.bucket_percentages[i]
            ));
        }
    }
    write("queries_per_task.csv", buckets)?;

    let mut vocab = String::from("class,token,frequency\n");
    for (class, rows) in [
        ("code", &report.vocabulary.top_code),
        ("common", &report.vocabulary.top_common),
        ("noncode", &report.vocabulary.top_noncode),
    ] {
        for (token, count) in rows {
            vocab.push_str(&format!("{class},{},{count}\n", csv_field(token)));
        }
    }
    write("vocabulary_top.csv", vocab)?;

    let mut languages = String::from("language,frequency\n");
    for (language, count) in &report.pl_mentions.top_languages {
        languages.push_str(&format!("{},{count}\n", csv_field(language)));
    }
    write("pl_mentions.csv", languages)?;

    let mut ngrams = String::from("class,direction,n,ngram,frequency\n");
    for (class, stats) in [("code", &report.edits.code), ("noncode", &report.edits.noncode)] {
        for (direction, n, rows) in [
            ("added", 1, &stats.added_unigrams),
            ("added", 2, &stats.added_bigrams),
            ("deleted", 1, &stats.deleted_unigrams),
            ("deleted", 2, &stats.deleted_bigrams),
        ] {
            for (ngram, count) in rows {
                ngrams.push_str(&format!(
                    "{class},{direction},{n},{},{count}\n",
                    csv_field(ngram)
                ));
            }
        }
    }
    write("edit_ngrams.csv", ngrams)?;

    let mut delta = String::from("class,kind,count,min,q1,median,q3,max,mean\n");
    for (class, stats) in [("code", &report.edits.code), ("noncode", &report.edits.noncode)] {
        delta.push_str(&summary_row(class, "overall", &stats.delta_codeness.overall));
        delta.push_str(&summary_row(class, "only_add", &stats.delta_codeness.only_add));
        delta.push_str(&summary_row(class, "only_delete", &stats.delta_codeness.only_delete));
        delta.push_str(&summary_row(class, "mixed", &stats.delta_codeness.mixed));
    }
    write("delta_codeness.csv", delta)?;

    Ok(())
}

/// Quote a CSV field when it contains separators or quotes.
pub fn csv_field(field: &str) -> String {
    if field.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::parse_log_str;
    use crate::tag_corpus::{build_table, TagFrequencyRecord};

    fn table() -> TokenScoreTable {
        build_table(
            &[
                TagFrequencyRecord {
                    tag: "javascript".into(),
                    count: 70248,
                },
                TagFrequencyRecord {
                    tag: "c#".into(),
                    count: 48898,
                },
            ],
            "test",
        )
        .unwrap()
    }

    fn fixture_log() -> String {
        let line = |session: &str, kind: &str, start: i64, end: i64, extra: &str| {
            let fmt = |s: i64| {
                (chrono::DateTime::<chrono::Utc>::UNIX_EPOCH + chrono::Duration::seconds(s))
                    .to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
            };
            format!(
                "{{\"user\":\"dev1\",\"session\":\"{session}\",\"kind\":\"{kind}\",\"start\":\"{}\",\"end\":\"{}\",{extra}}}",
                fmt(start),
                fmt(end)
            )
        };
        [
            line("s1", "query", 0, 5, "\"text\":\"how to get mp3 playtime in c# from stream\""),
            line("s1", "visit", 10, 40, "\"url\":\"http://a\",\"title\":\"a\""),
            line("s1", "query", 60, 65, "\"text\":\"javascript mp3 play time\""),
            line("s1", "query", 120, 125, "\"text\":\"how to get mp3 play time length\""),
            line("s1", "visit", 130, 170, "\"url\":\"http://b\",\"title\":\"b\""),
            line("s1", "query", 180, 185, "\"text\":\"javascript function to get mp3 play length\""),
            line("s1", "query", 240, 245, "\"text\":\"javascript read mp3 metadata\""),
            line("s1", "visit", 250, 300, "\"url\":\"http://c\",\"title\":\"c\""),
            line("s2", "query", 1000, 1005, "\"text\":\"enterprise luxury suv\""),
            line("s2", "query", 1060, 1065, "\"text\":\"luxury suv rentals houston\""),
            line("s2", "visit", 1070, 1100, "\"url\":\"http://d\",\"title\":\"d\""),
        ]
        .join("\n")
    }

    #[test]
    fn fixture_report_counts_tasks_per_class() {
        let parse = parse_log_str(&fixture_log()).unwrap();
        let report = build_report(
            &table(),
            &parse,
            &ReportConfig::default(),
            BTreeMap::new(),
        )
        .unwrap();
        assert_eq!(report.tasks.total, 2);
        assert_eq!(report.tasks.code_count, 1);
        assert_eq!(report.tasks.noncode_count, 1);
        assert_eq!(report.tasks.code.bucket_counts, [0, 0, 0, 0, 1, 0]);
        assert_eq!(report.tasks.noncode.bucket_counts, [0, 1, 0, 0, 0, 0]);
        assert_eq!(report.totals.queries, 7);
        assert_eq!(report.totals.users, 1);
        assert_eq!(report.edits.edited_queries, 5);
    }

    #[test]
    fn fixture_durations_match_hand_computation() {
        let parse = parse_log_str(&fixture_log()).unwrap();
        let report = build_report(
            &table(),
            &parse,
            &ReportConfig::default(),
            BTreeMap::new(),
        )
        .unwrap();
        // code task: q1 60s, q2 60s, q3 60s, q4 60s, q5 300-240=60s -> 300s
        let code = &report.tasks.code.duration_seconds;
        assert_eq!(code.min, Some(300.0));
        assert_eq!(code.max, Some(300.0));
        // noncode task: q1 60s, q2 1100-1060=40s -> 100s
        let noncode = &report.tasks.noncode.duration_seconds;
        assert_eq!(noncode.min, Some(100.0));
    }

    #[test]
    fn report_json_is_deterministic() {
        let parse = parse_log_str(&fixture_log()).unwrap();
        let config = ReportConfig::default();
        let a = build_report(&table(), &parse, &config, BTreeMap::new())
            .unwrap()
            .to_json()
            .unwrap();
        let b = build_report(&table(), &parse, &config, BTreeMap::new())
            .unwrap()
            .to_json()
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_log_produces_zeroed_report() {
        let parse = parse_log_str("").unwrap();
        let report = build_report(
            &table(),
            &parse,
            &ReportConfig::default(),
            BTreeMap::new(),
        )
        .unwrap();
        assert_eq!(report.totals.queries, 0);
        assert_eq!(report.tasks.total, 0);
        assert!(report.tasks.code.is_empty);
        assert_eq!(report.query_length.code.count, 0);
        assert_eq!(report.duplicates.removed_fraction, 0.0);
    }

    #[test]
    fn task_views_carry_scores_and_labels() {
        let parse = parse_log_str(&fixture_log()).unwrap();
        let (views, orphans) = task_views(&parse.sessions, &table(), 10.0).unwrap();
        assert_eq!(orphans, 0);
        assert_eq!(views.len(), 2);
        assert_eq!(views[0].label, Label::Code);
        assert_eq!(views[0].queries.len(), 5);
        assert_eq!(views[1].label, Label::NonCode);
        assert_eq!(views[1].web_visits, 1);
    }

    #[test]
    fn csv_tables_are_written() {
        let parse = parse_log_str(&fixture_log()).unwrap();
        let report = build_report(
            &table(),
            &parse,
            &ReportConfig::default(),
            BTreeMap::new(),
        )
        .unwrap();
        let dir = std::env::temp_dir().join(format!("codeness-report-{}", std::process::id()));
        write_report_csvs(&report, &dir).unwrap();
        for name in [
            "distributions.csv",
            "queries_per_task.csv",
            "vocabulary_top.csv",
            "pl_mentions.csv",
            "edit_ngrams.csv",
            "delta_codeness.csv",
        ] {
            let text = std::fs::read_to_string(dir.join(name)).unwrap();
            assert!(text.lines().count() >= 1, "{name} is empty");
        }
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
