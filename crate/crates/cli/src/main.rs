//! `codeness` — batch pipelines over tag exports, query files, and
//! browser activity logs. All commands are deterministic: identical
//! inputs produce byte-identical outputs, and provenance is recorded as
//! content hashes rather than timestamps.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use codeness_core::analysis::evaluate_classifier;
use codeness_core::error::{Error, Result};
use codeness_core::report::{build_report, csv_field, task_views, write_report_csvs, ReportConfig};
use codeness_core::scorer::{classify_score, codeness, PlLexicon, Query};
use codeness_core::session::parse_log_str;
use codeness_core::tag_corpus::{
    build_table, filter_posts, load_table_str, read_frequency_csv, read_posts_jsonl,
    TokenScoreTable,
};
use codeness_core::{sha256_hex, Label};

#[derive(Parser)]
#[command(
    name = "codeness",
    version,
    about = "Code-intent scoring for search queries and search-log mining"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Build a token score table from tagged posts or a frequency CSV
    BuildTable(BuildTableArgs),
    /// Compute codeness scores for a file of queries
    Score(ScoreArgs),
    /// Classify queries as Code or NonCode
    Classify(ClassifyArgs),
    /// Mine task sessions from a browser activity log
    Sessions(SessionsArgs),
    /// Produce the full analysis report for an activity log
    Analyze(AnalyzeArgs),
    /// Sweep classification thresholds against annotated queries
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct BuildTableArgs {
    /// Tagged posts JSONL: {"post_id": ..., "tags": [...]} per line
    #[arg(long, conflicts_with = "frequencies", required_unless_present = "frequencies")]
    posts: Option<PathBuf>,
    /// Pre-aggregated frequency CSV with header tag,count
    #[arg(long)]
    frequencies: Option<PathBuf>,
    /// Output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// json: exact table document; csv: token,score at 6 decimals
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct ScoreArgs {
    /// Score table (JSON table, token,score CSV, or tag,count CSV)
    #[arg(long)]
    table: PathBuf,
    /// Query file, one query per line
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long)]
    table: PathBuf,
    /// Query file, one query per line
    #[arg(long)]
    queries: PathBuf,
    /// Codeness score a query must exceed to count as Code
    #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
    threshold: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct SessionsArgs {
    #[arg(long)]
    table: PathBuf,
    /// Activity log JSONL
    #[arg(long)]
    log: PathBuf,
    #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
    threshold: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    table: PathBuf,
    /// Activity log JSONL
    #[arg(long)]
    log: PathBuf,
    #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
    threshold: f64,
    /// Stopword file overriding the bundled list
    #[arg(long)]
    stopwords: Option<PathBuf>,
    /// Language lexicon overriding the bundled list
    #[arg(long)]
    languages: Option<PathBuf>,
    /// json: report file; csv: directory of per-table CSVs
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    table: PathBuf,
    /// Annotations CSV with header query,label (label: code|noncode)
    #[arg(long)]
    annotations: PathBuf,
    /// Threshold sweep as start:end:step
    #[arg(long, default_value = "0:50:1")]
    sweep: String,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli.command) {
        eprintln!("error: {err}");
        std::process::exit(if err.is_validation() { 2 } else { 1 });
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::BuildTable(args) => cmd_build_table(args),
        Command::Score(args) => cmd_score(args),
        Command::Classify(args) => cmd_classify(args),
        Command::Sessions(args) => cmd_sessions(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Evaluate(args) => cmd_evaluate(args),
    }
}

fn read_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    String::from_utf8(bytes)
        .map_err(|_| Error::validation(format!("{}: not valid UTF-8", path.display())))
}

fn write_output(out: Option<&Path>, contents: &str) -> Result<()> {
    match out {
        Some(path) => {
            let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
            file.write_all(contents.as_bytes())
                .map_err(|e| Error::io(path, e))
        }
        None => {
            print!("{contents}");
            std::io::stdout()
                .flush()
                .map_err(|e| Error::Internal(e.to_string()))
        }
    }
}

/// Split a query file into lines, tolerating CRLF. Interior empty lines
/// are kept: an empty line is an empty query.
fn read_query_lines(text: &str) -> Vec<String> {
    let mut lines: Vec<String> = text
        .split('\n')
        .map(|line| line.strip_suffix('\r').unwrap_or(line).to_string())
        .collect();
    if text.ends_with('\n') {
        lines.pop();
    }
    lines
}

fn load_table(path: &Path) -> Result<(TokenScoreTable, String)> {
    let text = read_file(path)?;
    let hash = sha256_hex(text.as_bytes());
    let table = load_table_str(&text, &format!("table sha256:{hash}"))?;
    Ok((table, hash))
}

fn cmd_build_table(args: BuildTableArgs) -> Result<()> {
    let table = if let Some(path) = &args.frequencies {
        let text = read_file(path)?;
        let records = read_frequency_csv(text.as_bytes())?;
        build_table(
            &records,
            format!("frequency-csv sha256:{}", sha256_hex(text.as_bytes())),
        )?
    } else {
        let path = args.posts.as_ref().expect("clap enforces one input");
        let text = read_file(path)?;
        let read = read_posts_jsonl(text.as_bytes())?;
        for error in &read.errors {
            eprintln!("skipped {error}");
        }
        let outcome = filter_posts(read.posts);
        for skipped in &outcome.skipped {
            eprintln!("skipped post {}: {}", skipped.post_id, skipped.reason);
        }
        if !read.errors.is_empty() || !outcome.skipped.is_empty() {
            eprintln!(
                "skipped {} malformed lines, {} unusable posts",
                read.errors.len(),
                outcome.skipped.len()
            );
        }
        build_table(
            &outcome.records,
            format!("posts-jsonl sha256:{}", sha256_hex(text.as_bytes())),
        )?
    };
    let rendered = match args.format {
        Format::Json => table.to_json()?,
        Format::Csv => table.to_csv_string()?,
    };
    write_output(args.out.as_deref(), &rendered)
}

fn cmd_score(args: ScoreArgs) -> Result<()> {
    let (table, _) = load_table(&args.table)?;
    let queries = read_query_lines(&read_file(&args.queries)?);
    let rendered = match args.format {
        Format::Csv => {
            let mut out = String::from("query,score\n");
            for text in &queries {
                let score = codeness(&table, &Query::from_text(text.clone()));
                out.push_str(&format!("{},{score:.6}\n", csv_field(text)));
            }
            out
        }
        Format::Json => {
            let rows: Vec<serde_json::Value> = queries
                .iter()
                .map(|text| {
                    let score = codeness(&table, &Query::from_text(text.clone()));
                    serde_json::json!({"query": text, "score": score})
                })
                .collect();
            to_pretty_json(&rows)?
        }
    };
    write_output(args.out.as_deref(), &rendered)
}

fn cmd_classify(args: ClassifyArgs) -> Result<()> {
    let (table, _) = load_table(&args.table)?;
    let queries = read_query_lines(&read_file(&args.queries)?);
    // validate the threshold before producing any output
    classify_score(0.0, args.threshold)?;
    let rendered = match args.format {
        Format::Csv => {
            let mut out = String::from("query,score,label\n");
            for text in &queries {
                let c = codeness_core::classify(
                    &table,
                    &Query::from_text(text.clone()),
                    args.threshold,
                )?;
                out.push_str(&format!(
                    "{},{:.6},{}\n",
                    csv_field(text),
                    c.score,
                    c.label.as_str()
                ));
            }
            out
        }
        Format::Json => {
            let rows: Vec<serde_json::Value> = queries
                .iter()
                .map(|text| {
                    let c = codeness_core::classify(
                        &table,
                        &Query::from_text(text.clone()),
                        args.threshold,
                    )?;
                    Ok(serde_json::json!({
                        "query": text,
                        "score": c.score,
                        "label": c.label.as_str(),
                    }))
                })
                .collect::<Result<_>>()?;
            to_pretty_json(&rows)?
        }
    };
    write_output(args.out.as_deref(), &rendered)
}

fn cmd_sessions(args: SessionsArgs) -> Result<()> {
    let (table, table_hash) = load_table(&args.table)?;
    let log_text = read_file(&args.log)?;
    let parsed = parse_log_str(&log_text)?;
    for error in &parsed.errors {
        eprintln!("skipped log {error}");
    }
    let (tasks, orphan_visits) = task_views(&parsed.sessions, &table, args.threshold)?;
    let rendered = match args.format {
        Format::Json => {
            let doc = serde_json::json!({
                "schema": 1,
                "provenance": {
                    "table": format!("sha256:{table_hash}"),
                    "log": format!("sha256:{}", sha256_hex(log_text.as_bytes())),
                },
                "threshold": args.threshold,
                "malformed_lines": parsed.errors.len(),
                "orphan_visits": orphan_visits,
                "tasks": tasks,
            });
            to_pretty_json(&doc)?
        }
        Format::Csv => {
            let mut out = String::from(
                "user,session,task_index,queries,total_seconds,web_visits,codeness,label\n",
            );
            for task in &tasks {
                out.push_str(&format!(
                    "{},{},{},{},{:.3},{},{:.6},{}\n",
                    csv_field(&task.user),
                    csv_field(&task.session),
                    task.task_index,
                    task.queries.len(),
                    task.total_seconds,
                    task.web_visits,
                    task.codeness,
                    task.label.as_str()
                ));
            }
            out
        }
    };
    write_output(args.out.as_deref(), &rendered)
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<()> {
    let (table, table_hash) = load_table(&args.table)?;
    let log_text = read_file(&args.log)?;
    let parsed = parse_log_str(&log_text)?;

    let mut config = ReportConfig {
        threshold: args.threshold,
        ..ReportConfig::default()
    };
    let mut provenance: BTreeMap<String, String> = BTreeMap::new();
    provenance.insert("table".into(), format!("sha256:{table_hash}"));
    provenance.insert(
        "log".into(),
        format!("sha256:{}", sha256_hex(log_text.as_bytes())),
    );
    match &args.stopwords {
        Some(path) => {
            let text = read_file(path)?;
            config.stopwords = codeness_core::analysis::parse_stopwords(&text);
            provenance.insert(
                "stopwords".into(),
                format!("sha256:{}", sha256_hex(text.as_bytes())),
            );
        }
        None => {
            provenance.insert("stopwords".into(), "bundled".into());
        }
    }
    match &args.languages {
        Some(path) => {
            let text = read_file(path)?;
            let lexicon = PlLexicon::parse(&text);
            if lexicon.is_empty() {
                return Err(Error::validation(format!(
                    "{}: language lexicon is empty",
                    path.display()
                )));
            }
            config.lexicon = lexicon;
            provenance.insert(
                "languages".into(),
                format!("sha256:{}", sha256_hex(text.as_bytes())),
            );
        }
        None => {
            provenance.insert("languages".into(), "bundled".into());
        }
    }

    let report = build_report(&table, &parsed, &config, provenance)?;
    match args.format {
        Format::Json => write_output(args.out.as_deref(), &report.to_json()?),
        Format::Csv => {
            let dir = args.out.as_deref().ok_or_else(|| {
                Error::validation("--format csv needs --out pointing at a directory")
            })?;
            write_report_csvs(&report, dir)
        }
    }
}

fn parse_sweep(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [start, end, step] = parts.as_slice() else {
        return Err(Error::validation(format!(
            "sweep must be start:end:step, got {spec:?}"
        )));
    };
    let parse = |name: &str, value: &str| -> Result<f64> {
        value
            .trim()
            .parse()
            .map_err(|_| Error::validation(format!("sweep {name} {value:?} is not a number")))
    };
    let start = parse("start", start)?;
    let end = parse("end", end)?;
    let step = parse("step", step)?;
    if step.is_nan() || step <= 0.0 {
        return Err(Error::validation(format!(
            "sweep step must be > 0, got {step}"
        )));
    }
    if start.is_nan() || end.is_nan() || start < 0.0 || end < start {
        return Err(Error::validation(format!(
            "sweep range must satisfy 0 <= start <= end, got {start}..{end}"
        )));
    }
    let count = ((end - start) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|i| start + i as f64 * step).collect())
}

fn read_annotations(text: &str) -> Result<Vec<(Query, Label)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    {
        let headers = reader
            .headers()
            .map_err(|e| Error::validation(format!("annotations CSV: {e}")))?;
        let cols: Vec<String> = headers.iter().map(|h| h.trim().to_lowercase()).collect();
        if cols != ["query", "label"] {
            return Err(Error::validation(format!(
                "annotations CSV must start with header \"query,label\", found {:?}",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
    }
    let mut labeled = Vec::new();
    for (idx, row) in reader.records().enumerate() {
        let row =
            row.map_err(|e| Error::validation(format!("annotations row {}: {e}", idx + 2)))?;
        let query = Query::from_text(row.get(0).unwrap_or("").to_string());
        let label = Label::parse(row.get(1).unwrap_or(""))
            .map_err(|e| Error::validation(format!("annotations row {}: {e}", idx + 2)))?;
        labeled.push((query, label));
    }
    Ok(labeled)
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let (table, _) = load_table(&args.table)?;
    let labeled = read_annotations(&read_file(&args.annotations)?)?;
    let thresholds = parse_sweep(&args.sweep)?;
    let points = evaluate_classifier(&labeled, &table, &thresholds)?;
    let rendered = match args.format {
        Format::Csv => {
            let fmt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
            let mut out = String::from("threshold,precision,recall,f1,tp,fp,fn,tn\n");
            for p in &points {
                out.push_str(&format!(
                    "{:.6},{},{},{},{},{},{},{}\n",
                    p.threshold,
                    fmt(p.precision),
                    fmt(p.recall),
                    fmt(p.f1),
                    p.true_pos,
                    p.false_pos,
                    p.false_neg,
                    p.true_neg
                ));
            }
            out
        }
        Format::Json => to_pretty_json(&points)?,
    };
    write_output(args.out.as_deref(), &rendered)
}

fn to_pretty_json<T: serde::Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Internal(format!("serializing output: {e}")))?;
    text.push('\n');
    Ok(text)
}
