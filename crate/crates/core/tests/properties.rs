//! Property tests for the scoring, filtering, and segmentation invariants.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Duration, Utc};
use proptest::prelude::*;

use codeness_core::analysis::{
    cohens_d, dedupe_queries, delta_codeness, evaluate_classifier, task_stats, EditKind,
};
use codeness_core::scorer::{classify, codeness, tokenize, Label, Query};
use codeness_core::session::{
    is_edited, query_search_time, segment_tasks, term_delta, ActivitySession, BrowserEvent,
    EventPayload,
};
use codeness_core::tag_corpus::{build_table, filter_posts, TagFrequencyRecord, TaggedPost};
use codeness_core::TokenScoreTable;

const VOCAB: [&str; 12] = [
    "java", "sql", "mp3", "play", "time", "how", "to", "c#", "stream", "cat", "dog", "x",
];

fn token_strategy() -> impl Strategy<Value = &'static str> {
    prop::sample::select(&VOCAB[..])
}

fn query_strategy() -> impl Strategy<Value = Query> {
    prop::collection::vec(token_strategy(), 0..8)
        .prop_map(|tokens| Query::from_text(tokens.join(" ")))
}

fn table_strategy() -> impl Strategy<Value = TokenScoreTable> {
    prop::collection::btree_map(token_strategy(), 1u64..100_000, 0..VOCAB.len())
        .prop_map(|counts| {
            let records: Vec<TagFrequencyRecord> = counts
                .into_iter()
                .map(|(tag, count)| TagFrequencyRecord {
                    tag: tag.to_string(),
                    count,
                })
                .collect();
            build_table(&records, "prop").unwrap()
        })
}

fn ts(seconds: i64) -> DateTime<Utc> {
    DateTime::<Utc>::UNIX_EPOCH + Duration::seconds(seconds)
}

/// (is_query, gap to previous start, duration) triples become one session.
fn session_strategy() -> impl Strategy<Value = ActivitySession> {
    prop::collection::vec(
        (any::<bool>(), 0i64..50, 0i64..50, prop::collection::vec(token_strategy(), 0..5)),
        0..40,
    )
    .prop_map(|steps| {
        let mut events = Vec::new();
        let mut at = 0i64;
        for (is_query, gap, dur, tokens) in steps {
            at += gap;
            let payload = if is_query {
                EventPayload::Query {
                    text: tokens.join(" "),
                }
            } else {
                EventPayload::Visit {
                    url: format!("http://site/{at}"),
                    title: String::new(),
                }
            };
            events.push(BrowserEvent {
                user_id: "u".into(),
                session_id: "s".into(),
                start: ts(at),
                end: ts(at + dur),
                payload,
            });
        }
        ActivitySession {
            id: "s".into(),
            user_id: "u".into(),
            events,
        }
    })
}

/// Independent tokenizer used by the test oracles.
fn oracle_tokens(text: &str) -> BTreeSet<String> {
    text.split_whitespace()
        .filter_map(|word| {
            let lower = word.to_lowercase();
            let kept: String = {
                let trimmed = lower
                    .trim_matches(|c: char| !(c.is_alphanumeric() || "#+.-".contains(c)));
                trimmed.to_string()
            };
            if kept.is_empty() {
                None
            } else {
                Some(kept)
            }
        })
        .collect()
}

/// Brute-force maximal-run segmentation over the query texts.
fn oracle_segment(texts: &[String]) -> Vec<usize> {
    let mut runs = Vec::new();
    let mut current = 0usize;
    for i in 0..texts.len() {
        if i == 0 {
            current = 1;
            continue;
        }
        let shared = !oracle_tokens(&texts[i - 1])
            .intersection(&oracle_tokens(&texts[i]))
            .next()
            .is_none();
        if shared {
            current += 1;
        } else {
            runs.push(current);
            current = 1;
        }
    }
    if current > 0 {
        runs.push(current);
    }
    runs
}

proptest! {
    #[test]
    fn codeness_is_additive_over_concatenation(
        a in query_strategy(),
        b in query_strategy(),
        table in table_strategy(),
    ) {
        let joined = Query::from_text(format!("{} {}", a.raw_text, b.raw_text));
        let sum = codeness(&table, &a) + codeness(&table, &b);
        prop_assert!((codeness(&table, &joined) - sum).abs() < 1e-9);
    }

    #[test]
    fn appending_a_token_never_decreases_codeness(
        q in query_strategy(),
        extra in token_strategy(),
        table in table_strategy(),
    ) {
        let longer = Query::from_text(format!("{} {extra}", q.raw_text));
        prop_assert!(codeness(&table, &longer) >= codeness(&table, &q));
    }

    #[test]
    fn codeness_is_permutation_invariant(
        q in query_strategy(),
        seed in 0usize..1000,
        table in table_strategy(),
    ) {
        let mut tokens = q.tokens.clone();
        // cheap deterministic shuffle
        let n = tokens.len();
        if n > 1 {
            for i in 0..n {
                tokens.swap(i, (i + seed) % n);
            }
        }
        let shuffled = Query::from_text(tokens.join(" "));
        prop_assert!((codeness(&table, &shuffled) - codeness(&table, &q)).abs() < 1e-9);
    }

    #[test]
    fn scaling_scores_and_threshold_preserves_labels(
        q in query_strategy(),
        table in table_strategy(),
        threshold in 0.0f64..30.0,
        exp in -2i32..4,
    ) {
        // powers of two scale floats exactly
        let k = 2f64.powi(exp);
        let scaled = table.scaled(k).unwrap();
        let before = classify(&table, &q, threshold).unwrap().label;
        let after = classify(&scaled, &q, threshold * k).unwrap().label;
        prop_assert_eq!(before, after);
    }

    #[test]
    fn tokenization_and_scores_are_deterministic(
        text in "[ a-z#+.&0-9-]{0,40}",
        table in table_strategy(),
    ) {
        prop_assert_eq!(tokenize(&text), tokenize(&text));
        let q1 = Query::from_text(text.clone());
        let q2 = Query::from_text(text);
        prop_assert_eq!(codeness(&table, &q1).to_bits(), codeness(&table, &q2).to_bits());
    }

    #[test]
    fn filter_posts_matches_brute_force(
        tag_lists in prop::collection::vec(prop::collection::vec(token_strategy(), 1..4), 0..60),
    ) {
        let posts: Vec<TaggedPost> = tag_lists
            .iter()
            .enumerate()
            .map(|(i, tags)| TaggedPost {
                post_id: format!("p{i}"),
                tags: tags.iter().map(|t| t.to_string()).collect(),
            })
            .collect();

        // oracle: count posts whose tag list has exactly one entry
        let mut expected: BTreeMap<String, u64> = BTreeMap::new();
        for tags in &tag_lists {
            if let [only] = tags.as_slice() {
                *expected.entry(only.to_string()).or_insert(0) += 1;
            }
        }

        let outcome = filter_posts(posts);
        let got: BTreeMap<String, u64> = outcome
            .records
            .iter()
            .map(|r| (r.tag.clone(), r.count))
            .collect();
        prop_assert_eq!(got, expected);
        prop_assert!(outcome.skipped.is_empty());
    }

    #[test]
    fn table_round_trip_is_identity(table in table_strategy()) {
        let reloaded = TokenScoreTable::from_json(&table.to_json().unwrap()).unwrap();
        for (token, score) in table.iter() {
            prop_assert_eq!(reloaded.score(token).to_bits(), score.to_bits());
        }
        prop_assert_eq!(reloaded.len(), table.len());
    }

    #[test]
    fn term_delta_sets_are_disjoint_and_consistent(
        prev in query_strategy(),
        curr in query_strategy(),
    ) {
        let delta = term_delta(&prev, &curr);
        prop_assert!(delta.added.is_disjoint(&delta.deleted));

        let curr_set: BTreeSet<String> = curr.tokens.iter().cloned().collect();
        let prev_set: BTreeSet<String> = prev.tokens.iter().cloned().collect();
        let total_replacement = delta.added == curr_set && delta.deleted == prev_set;
        prop_assert_eq!(is_edited(&prev, &curr), !total_replacement);
    }

    #[test]
    fn segmentation_matches_oracle_and_partitions_queries(session in session_strategy()) {
        let texts: Vec<String> = session
            .events
            .iter()
            .filter_map(|e| match &e.payload {
                EventPayload::Query { text } => Some(text.clone()),
                _ => None,
            })
            .collect();
        let outcome = segment_tasks(&session);

        // partition: every query in exactly one task, original order kept
        let flattened: Vec<String> = outcome
            .tasks
            .iter()
            .flat_map(|t| t.queries.iter().map(|q| q.query.raw_text.clone()))
            .collect();
        prop_assert_eq!(&flattened, &texts);

        // maximal runs match the brute-force oracle
        let sizes: Vec<usize> = outcome.tasks.iter().map(|t| t.queries.len()).collect();
        prop_assert_eq!(sizes, oracle_segment(&texts));

        // maximality at the boundaries
        for pair in outcome.tasks.windows(2) {
            let last = &pair[0].queries.last().unwrap().query;
            let first = &pair[1].queries[0].query;
            prop_assert!(!is_edited(last, first));
        }

        // visit accounting
        let visit_count = session
            .events
            .iter()
            .filter(|e| !e.is_query())
            .count() as u64;
        let attached: u64 = outcome.tasks.iter().map(|t| t.total_web_visits).sum();
        prop_assert_eq!(attached + outcome.orphan_visits, visit_count);
    }

    #[test]
    fn search_time_conserves_session_span(session in session_strategy()) {
        let durations = query_search_time(&session);
        let query_starts: Vec<DateTime<Utc>> = session
            .events
            .iter()
            .filter(|e| e.is_query())
            .map(|e| e.start)
            .collect();
        prop_assume!(!query_starts.is_empty());

        let total: Duration = durations.iter().fold(Duration::zero(), |acc, d| acc + *d);
        let span = session.events.last().unwrap().end - query_starts[0];
        prop_assert!((total - span).num_milliseconds().abs() <= 1);
        prop_assert!(durations.iter().all(|d| *d >= Duration::zero()));
    }

    #[test]
    fn delta_codeness_sign_laws_and_antisymmetry(
        prev in query_strategy(),
        extra in prop::collection::vec(token_strategy(), 0..4),
        table in table_strategy(),
    ) {
        let curr = Query::from_text(format!("{} {}", prev.raw_text, extra.join(" ")));

        let add = delta_codeness(&prev, &curr, &table);
        if add.kind == EditKind::OnlyAdd {
            prop_assert!(add.delta_codeness >= 0.0);
        }
        let del = delta_codeness(&curr, &prev, &table);
        if del.kind == EditKind::OnlyDelete {
            prop_assert!(del.delta_codeness <= 0.0);
        }
        prop_assert!((add.delta_codeness + del.delta_codeness).abs() < 1e-9);
    }

    #[test]
    fn sweep_conserves_counts_and_recall_never_increases(
        queries in prop::collection::vec((query_strategy(), any::<bool>()), 1..40),
        table in table_strategy(),
    ) {
        let labeled: Vec<(Query, Label)> = queries
            .into_iter()
            .map(|(q, is_code)| (q, if is_code { Label::Code } else { Label::NonCode }))
            .collect();
        let thresholds: Vec<f64> = (0..=20).map(f64::from).collect();
        let points = evaluate_classifier(&labeled, &table, &thresholds).unwrap();
        let mut last_recall: Option<f64> = None;
        for point in &points {
            let total = point.true_pos + point.false_pos + point.false_neg + point.true_neg;
            prop_assert_eq!(total as usize, labeled.len());
            if let (Some(prev), Some(curr)) = (last_recall, point.recall) {
                prop_assert!(curr <= prev + 1e-12);
            }
            if point.recall.is_some() {
                last_recall = point.recall;
            }
        }
    }

    #[test]
    fn dedupe_is_idempotent(queries in prop::collection::vec(query_strategy(), 0..40)) {
        let once = dedupe_queries(&queries);
        let twice = dedupe_queries(&once.kept);
        prop_assert_eq!(once.kept, twice.kept);
        prop_assert_eq!(twice.removed, 0);
    }

    #[test]
    fn bucket_percentages_sum_to_hundred(
        sizes in prop::collection::vec(1usize..12, 1..30),
    ) {
        let sessions: Vec<ActivitySession> = sizes
            .iter()
            .enumerate()
            .map(|(i, n)| {
                // distinct single-token queries chained by a shared token
                let events = (0..*n)
                    .map(|j| BrowserEvent {
                        user_id: "u".into(),
                        session_id: format!("s{i}"),
                        start: ts((j * 10) as i64),
                        end: ts((j * 10 + 1) as i64),
                        payload: EventPayload::Query {
                            text: format!("link token{j}"),
                        },
                    })
                    .collect();
                ActivitySession {
                    id: format!("s{i}"),
                    user_id: "u".into(),
                    events,
                }
            })
            .collect();
        let tasks: Vec<_> = sessions.iter().flat_map(|s| segment_tasks(s).tasks).collect();
        let refs: Vec<_> = tasks.iter().collect();
        let stats = task_stats(&refs);
        let sum: f64 = stats.bucket_percentages.iter().sum();
        prop_assert!((sum - 100.0).abs() <= 0.01);
    }

    #[test]
    fn cohens_d_is_antisymmetric(
        a in prop::collection::vec(0.0f64..50.0, 2..12),
        b in prop::collection::vec(0.0f64..50.0, 2..12),
    ) {
        let ab = cohens_d(&a, &b).unwrap();
        let ba = cohens_d(&b, &a).unwrap();
        match (ab, ba) {
            (Some(x), Some(y)) => prop_assert!((x + y).abs() < 1e-9),
            (None, None) => {}
            _ => prop_assert!(false, "null-ness must agree"),
        }
    }
}
