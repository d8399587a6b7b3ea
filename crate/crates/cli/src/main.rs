use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand};
use geofact_core::analytics::language_summary;
use geofact_core::analytics::{write_reports, ReportError};
use geofact_core::config::Config;
use geofact_core::knowledge::{ArticleCache, FetchOrigin, KnowledgeBase, WikipediaClient, DEFAULT_WIKIPEDIA_API};
use geofact_core::pipeline::{
    read_evaluations, run_evaluation, Pipeline, PipelineError, ProgressEvent, RunOptions, UnitStatus, EVALUATIONS_FILE,
};
use geofact_core::{LanguageCode, Roster};
use serde_json::json;

const FORMATS: &str = "\
FILE FORMATS

  Roster (JSONL): one topic per line with id, country, iso_code, leader_name,
  name_by_language (language code to name), geo {continent, subregion} and
  wikipedia_title. Continents are Africa, America, Asia and Europe.

  Config (TOML): sections [backends.generation], [backends.translation],
  [backends.decomposition], [backends.verification], [knowledge],
  [verification], [refusal], [run] and [paths]. An http_chat backend names
  the environment variable holding its API key in credentials_env_var; keys
  are never written in the file. Relative paths resolve against the config
  file's directory.

  Article cache: one JSON file per Wikipedia title (percent-encoded file
  name) holding wikipedia_title, revision_id, plain_text and fetched_at.

  Run directory: manifest.json plus generations.jsonl, translations.jsonl,
  facts.jsonl, verdicts.jsonl and evaluations.jsonl. A unit is finished once
  its evaluations.jsonl line exists; --resume continues from there.

  Reports: language_summary.csv, continent_table.csv, topk_distribution.json,
  subregion_breakdown.csv, correlation_matrix.csv (long form) and
  heatmap.json. Each names the SHA-256 of the run manifest it came from.

EXIT STATUS
  0 success, 1 runtime failure, 2 usage or configuration error.";

/// Factuality evaluation of multilingual biography generation.
#[derive(Parser)]
#[command(name = "geofact", version, after_long_help = FORMATS)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Manage the reference article cache.
    Kb {
        #[command(subcommand)]
        command: KbCommand,
    },
    /// Evaluate the topic x language grid described by a config file.
    Run(RunArgs),
    /// Compute the analytics reports for a finished run.
    Report(ReportArgs),
}

#[derive(Subcommand)]
enum KbCommand {
    /// Download and cache the Wikipedia article of every roster topic.
    Fetch {
        #[arg(long)]
        roster: PathBuf,
        #[arg(long)]
        cache_dir: PathBuf,
        /// MediaWiki action API endpoint.
        #[arg(long, default_value = DEFAULT_WIKIPEDIA_API)]
        api_url: String,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Continue the run in this directory.
    #[arg(long, value_name = "RUN_DIR", conflicts_with = "run_dir")]
    resume: Option<PathBuf>,
    /// Directory for a new run. Defaults to a timestamped directory under paths.runs_dir.
    #[arg(long)]
    run_dir: Option<PathBuf>,
    /// Override run.languages (comma separated codes).
    #[arg(long, value_delimiter = ',')]
    languages: Vec<LanguageCode>,
    /// Override run.topics (comma separated roster ids).
    #[arg(long, value_delimiter = ',')]
    topics: Vec<String>,
    /// Stop after this many units; the run can be resumed later.
    #[arg(long)]
    max_units: Option<usize>,
    /// Print progress as JSON lines.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Size of the top-scoring set for the continent distribution.
    #[arg(long, default_value_t = 20)]
    k: usize,
}

enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

fn runtime(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Runtime(e.into())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Kb {
            command:
                KbCommand::Fetch {
                    roster,
                    cache_dir,
                    api_url,
                },
        } => cmd_kb_fetch(&roster, &cache_dir, &api_url),
        Command::Run(args) => cmd_run(args),
        Command::Report(args) => cmd_report(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn cmd_kb_fetch(roster: &Path, cache_dir: &Path, api_url: &str) -> Result<(), Failure> {
    let roster = Roster::load(roster).map_err(usage)?;
    let kb = KnowledgeBase::new(
        ArticleCache::new(cache_dir),
        Box::new(WikipediaClient::new(api_url, Default::default())),
    );
    let (mut cached, mut fetched, mut failed) = (0, 0, 0);
    for topic in roster.topics() {
        let title = &topic.wikipedia_title;
        match kb.fetch_with_origin(title) {
            Ok((_, FetchOrigin::Cache)) => {
                cached += 1;
                println!("cached   {title}");
            }
            Ok((_, FetchOrigin::Network)) => {
                fetched += 1;
                println!("fetched  {title}");
            }
            Err(e) => {
                failed += 1;
                println!("FAILED   {title}: {e}");
            }
        }
    }
    println!("{fetched} fetched, {cached} already cached, {failed} failed");
    if failed > 0 {
        return Err(runtime(anyhow!("{failed} article(s) could not be fetched")));
    }
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let mut config = Config::load(&args.config).map_err(usage)?;
    if !args.languages.is_empty() {
        config.run.languages = args.languages;
    }
    if !args.topics.is_empty() {
        config.run.topics = args.topics;
    }
    config.validate().map_err(usage)?;
    let runs_dir = config.paths.runs_dir.clone();
    let pipeline = Pipeline::from_config(config).map_err(usage)?;
    let (run_dir, resume) = match args.resume {
        Some(dir) => (dir, true),
        None => (
            args.run_dir
                .unwrap_or_else(|| runs_dir.join(chrono::Utc::now().format("run-%Y%m%dT%H%M%SZ").to_string())),
            false,
        ),
    };
    let options = RunOptions {
        resume,
        max_units: args.max_units,
    };
    let json_progress = args.json;
    let mut report = |event: &ProgressEvent| {
        let r = &event.record;
        if json_progress {
            println!(
                "{}",
                json!({
                    "event": "unit",
                    "finished": event.finished,
                    "total": event.total,
                    "record": r,
                })
            );
        } else {
            let outcome = match (r.status, r.score) {
                (UnitStatus::Failed, _) => format!("failed: {}", r.error.as_deref().unwrap_or("")),
                (_, Some(s)) => format!("score {s:.3} ({}/{} facts supported)", r.n_correct, r.n_facts),
                (_, None) if r.refusal => "refusal".to_string(),
                (_, None) => "no facts".to_string(),
            };
            eprintln!(
                "[{}/{}] {} {}: {outcome}",
                event.finished, event.total, r.topic_id, r.language
            );
        }
    };
    let summary = run_evaluation(&pipeline, &run_dir, &options, &mut report).map_err(|e| match e {
        PipelineError::Io { .. } => runtime(e),
        _ => usage(e),
    })?;

    let evals = read_evaluations(&run_dir.join(EVALUATIONS_FILE)).map_err(runtime)?;
    let languages = language_summary(&evals);
    if json_progress {
        println!(
            "{}",
            json!({
                "event": "summary",
                "run_dir": summary.run_dir,
                "total_units": summary.total_units,
                "already_done": summary.already_done,
                "computed": summary.computed,
                "failed": summary.failed,
                "complete": summary.complete,
                "aborted": summary.aborted,
                "network_calls": summary.network_calls,
                "languages": languages.iter().map(|(l, s)| (l.to_string(), json!({
                    "n": s.score.map_or(0, |st| st.n),
                    "mean": s.score.map(|st| st.mean),
                    "std": s.score.map(|st| st.std),
                    "refusals": s.refusals,
                    "failures": s.failures,
                }))).collect::<serde_json::Map<_, _>>(),
            })
        );
    } else {
        println!("run directory: {}", summary.run_dir.display());
        println!(
            "units: {} total, {} already done, {} computed, {} failed; {} network calls",
            summary.total_units, summary.already_done, summary.computed, summary.failed, summary.network_calls
        );
        println!("language      n    mean     std  refusals  failures");
        for (lang, s) in &languages {
            let (n, mean, std) = match s.score {
                Some(st) => (st.n, format!("{:.3}", st.mean), format!("{:.3}", st.std)),
                None => (0, "-".into(), "-".into()),
            };
            println!(
                "{:<10} {n:>4} {mean:>7} {std:>7} {:>9} {:>9}",
                lang.english_name(),
                s.refusals,
                s.failures
            );
        }
    }
    if let Some(reason) = summary.aborted {
        return Err(runtime(anyhow!(
            "run aborted: {reason}; fix the cause (credentials, paths.* or run.max_calls) and rerun with --resume {}",
            run_dir.display()
        )));
    }
    if summary.failed > 0 {
        return Err(runtime(anyhow!(
            "{} unit(s) failed; rerun with --resume {} to retry them",
            summary.failed,
            run_dir.display()
        )));
    }
    if !summary.complete {
        println!("run stopped early; continue with --resume {}", run_dir.display());
    }
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<(), Failure> {
    if args.k == 0 {
        return Err(usage(anyhow!("--k must be at least 1")));
    }
    let outcome = write_reports(&args.run, &args.out, args.k).map_err(|e| match e {
        ReportError::Io { .. } => runtime(e),
        _ => usage(e),
    })?;
    for file in &outcome.files {
        println!("wrote {}", file.display());
    }
    for e in &outcome.insufficient {
        eprintln!("warning: {e}");
    }
    Ok(())
}
