use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{EvaluationRecord, Pipeline, PipelineError, UnitOutput, UnitStatus};
use crate::config::Config;
use crate::error::DomainError;
use crate::roster::Roster;
use crate::types::{LanguageCode, Topic};

pub const RUN_FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const GENERATIONS_FILE: &str = "generations.jsonl";
pub const TRANSLATIONS_FILE: &str = "translations.jsonl";
pub const FACTS_FILE: &str = "facts.jsonl";
pub const VERDICTS_FILE: &str = "verdicts.jsonl";
pub const EVALUATIONS_FILE: &str = "evaluations.jsonl";

/// Record files in the order a unit's lines are appended. The evaluation line
/// goes last and marks the unit as complete.
pub const RUN_FILES: [&str; 5] = [
    GENERATIONS_FILE,
    TRANSLATIONS_FILE,
    FACTS_FILE,
    VERDICTS_FILE,
    EVALUATIONS_FILE,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub config_hash: String,
    pub roster_hash: String,
    /// `"<template_id>/<language>"` to SHA-256 of the template text.
    pub template_hashes: BTreeMap<String, String>,
    /// Stage name to model id.
    pub backend_model_ids: BTreeMap<String, String>,
    pub languages: Vec<LanguageCode>,
    /// The evaluated topics, so reports need nothing outside the run directory.
    pub topics: Vec<Topic>,
    pub config: Config,
    pub created_at: DateTime<Utc>,
}

impl RunManifest {
    pub fn for_pipeline(pipeline: &Pipeline) -> Self {
        RunManifest {
            format_version: RUN_FORMAT_VERSION,
            config_hash: pipeline.config.content_hash(),
            roster_hash: pipeline.roster.content_hash(),
            template_hashes: pipeline.templates.hashes(),
            backend_model_ids: pipeline
                .config
                .backends
                .by_stage()
                .into_iter()
                .map(|(stage, spec)| (stage.to_string(), spec.model_id.clone()))
                .collect(),
            languages: pipeline.config.run.languages.clone(),
            topics: pipeline.roster.topics().to_vec(),
            config: pipeline.config.clone(),
            created_at: Utc::now(),
        }
    }

    pub fn roster(&self) -> Result<Roster, DomainError> {
        Roster::new(self.topics.clone())
    }

    fn drift_from(&self, other: &RunManifest) -> Option<(&'static str, String, String)> {
        if self.format_version != other.format_version {
            return Some((
                "run format version",
                self.format_version.to_string(),
                other.format_version.to_string(),
            ));
        }
        if self.config_hash != other.config_hash {
            return Some(("config hash", self.config_hash.clone(), other.config_hash.clone()));
        }
        if self.roster_hash != other.roster_hash {
            return Some(("roster hash", self.roster_hash.clone(), other.roster_hash.clone()));
        }
        for (name, hash) in &self.template_hashes {
            if other.template_hashes.get(name) != Some(hash) {
                let found = other
                    .template_hashes
                    .get(name)
                    .cloned()
                    .unwrap_or_else(|| "missing".into());
                return Some(("prompt template", format!("{name} {hash}"), format!("{name} {found}")));
            }
        }
        None
    }
}

pub fn read_manifest(run_dir: &Path) -> Result<RunManifest, PipelineError> {
    let path = run_dir.join(MANIFEST_FILE);
    if !path.exists() {
        return Err(PipelineError::NoRun(run_dir.to_path_buf()));
    }
    let text = std::fs::read_to_string(&path).map_err(|e| PipelineError::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::io(&path, e))
}

/// Parses evaluations.jsonl strictly.
pub fn read_evaluations(path: &Path) -> Result<Vec<EvaluationRecord>, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| PipelineError::io(path, format!("line {}: {e}", i + 1))))
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Continue the run already in the directory.
    pub resume: bool,
    /// Stop after computing this many units, leaving the run resumable.
    pub max_units: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct ProgressEvent {
    pub record: EvaluationRecord,
    /// Units finished so far, including ones done before a resume.
    pub finished: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub run_dir: PathBuf,
    pub total_units: usize,
    /// Units already finished when a resumed run started.
    pub already_done: usize,
    /// Units evaluated by this invocation, failures included.
    pub computed: usize,
    pub failed: usize,
    /// Every unit has an evaluation line and the files are in grid order.
    pub complete: bool,
    /// Why the run stopped early, for errors that would fail every unit.
    pub aborted: Option<String>,
    pub network_calls: usize,
}

#[derive(Serialize)]
struct Keyed<'a, T: Serialize> {
    topic_id: &'a str,
    language: LanguageCode,
    #[serde(flatten)]
    record: &'a T,
}

fn line_key(v: &Value) -> Option<(String, String)> {
    let topic = v.get("topic_id")?.as_str()?;
    let lang = v.get("language").or_else(|| v.get("source_language"))?.as_str()?;
    Some((topic.to_string(), lang.to_string()))
}

fn write_atomic(path: &Path, contents: &str) -> Result<(), PipelineError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| PipelineError::io(path, e))?;
    tmp.write_all(contents.as_bytes())
        .map_err(|e| PipelineError::io(path, e))?;
    tmp.persist(path).map_err(|e| PipelineError::io(path, e.error))?;
    Ok(())
}

/// Rewrites every record file keeping only parseable lines whose unit passes
/// `keep`, ordered by `rank` when given (stable within a unit).
fn rewrite_files(
    run_dir: &Path,
    keep: impl Fn(&(String, String)) -> bool,
    rank: Option<&HashMap<(String, String), usize>>,
) -> Result<(), PipelineError> {
    for name in RUN_FILES {
        let path = run_dir.join(name);
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(PipelineError::io(&path, e)),
        };
        let mut lines: Vec<(usize, &str)> = text
            .lines()
            .filter_map(|l| {
                let key = line_key(&serde_json::from_str::<Value>(l).ok()?)?;
                if !keep(&key) {
                    return None;
                }
                let r = rank.map_or(Some(0), |r| r.get(&key).copied())?;
                Some((r, l))
            })
            .collect();
        lines.sort_by_key(|(r, _)| *r);
        let mut out = String::with_capacity(text.len());
        for (_, l) in lines {
            out.push_str(l);
            out.push('\n');
        }
        write_atomic(&path, &out)?;
    }
    Ok(())
}

/// Units with a successful evaluation line.
fn finished_units(run_dir: &Path) -> Result<HashSet<(String, String)>, PipelineError> {
    let path = run_dir.join(EVALUATIONS_FILE);
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(HashSet::new()),
        Err(e) => return Err(PipelineError::io(&path, e)),
    };
    Ok(text
        .lines()
        .filter_map(|l| serde_json::from_str::<EvaluationRecord>(l).ok())
        .filter(|r| r.status == UnitStatus::Ok)
        .map(|r| (r.topic_id, r.language.as_str().to_string()))
        .collect())
}

struct Writer {
    files: Vec<(PathBuf, File)>,
}

impl Writer {
    fn open(run_dir: &Path) -> Result<Self, PipelineError> {
        let files = RUN_FILES
            .iter()
            .map(|name| {
                let path = run_dir.join(name);
                OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(&path)
                    .map(|f| (path.clone(), f))
                    .map_err(|e| PipelineError::io(&path, e))
            })
            .collect::<Result<_, _>>()?;
        Ok(Writer { files })
    }

    fn append(&mut self, file: usize, lines: &[String]) -> Result<(), PipelineError> {
        if lines.is_empty() {
            return Ok(());
        }
        let mut buf = String::new();
        for l in lines {
            buf.push_str(l);
            buf.push('\n');
        }
        let (path, f) = &mut self.files[file];
        f.write_all(buf.as_bytes()).map_err(|e| PipelineError::io(path, e))?;
        f.flush().map_err(|e| PipelineError::io(path, e))
    }

    fn write_unit(&mut self, out: &UnitOutput) -> Result<(), PipelineError> {
        let topic = &out.evaluation.topic_id;
        let language = out.evaluation.language;
        let generations: Vec<String> = out.generation.iter().map(json).collect();
        let translations: Vec<String> = out.translation.iter().map(json).collect();
        let facts: Vec<String> = out
            .facts
            .iter()
            .map(|f| {
                json(&Keyed {
                    topic_id: topic,
                    language,
                    record: f,
                })
            })
            .collect();
        let verdicts: Vec<String> = out
            .verdicts
            .iter()
            .map(|v| {
                json(&Keyed {
                    topic_id: topic,
                    language,
                    record: v,
                })
            })
            .collect();
        self.append(0, &generations)?;
        self.append(1, &translations)?;
        self.append(2, &facts)?;
        self.append(3, &verdicts)?;
        self.append(4, &[json(&out.evaluation)])
    }
}

fn json<T: Serialize>(record: &T) -> String {
    serde_json::to_string(record).expect("record serializes")
}

/// Evaluates the (topic × language) grid of `pipeline` into `run_dir`.
///
/// Units run on a pool of `run.concurrency` workers; a single writer appends
/// each finished unit's lines, evaluation last. A resumed run keeps units
/// whose evaluation succeeded, discards everything else, and computes the
/// rest. Once every unit is finished the files are rewritten in grid order
/// (topics in roster order, then languages in configured order), so output
/// does not depend on scheduling or interruption.
pub fn run_evaluation(
    pipeline: &Pipeline,
    run_dir: &Path,
    options: &RunOptions,
    progress: &mut dyn FnMut(&ProgressEvent),
) -> Result<RunSummary, PipelineError> {
    let manifest = RunManifest::for_pipeline(pipeline);
    let done = if options.resume {
        let existing = read_manifest(run_dir)?;
        if let Some((what, expected, found)) = existing.drift_from(&manifest) {
            return Err(PipelineError::ConfigDrift {
                dir: run_dir.to_path_buf(),
                what: what.to_string(),
                expected,
                found,
            });
        }
        let done = finished_units(run_dir)?;
        rewrite_files(run_dir, |k| done.contains(k), None)?;
        done
    } else {
        if let Ok(mut entries) = std::fs::read_dir(run_dir) {
            if entries.next().is_some() {
                return Err(PipelineError::RunExists(run_dir.to_path_buf()));
            }
        }
        std::fs::create_dir_all(run_dir).map_err(|e| PipelineError::io(run_dir, e))?;
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        write_atomic(&run_dir.join(MANIFEST_FILE), &format!("{text}\n"))?;
        HashSet::new()
    };

    let languages = &pipeline.config.run.languages;
    let topics = pipeline.roster.topics();
    let mut rank = HashMap::new();
    let mut todo: Vec<(&Topic, LanguageCode)> = Vec::new();
    for topic in topics {
        for &language in languages {
            let key = (topic.id.clone(), language.as_str().to_string());
            if !done.contains(&key) {
                todo.push((topic, language));
            }
            rank.insert(key, rank.len());
        }
    }
    let total = rank.len();
    let already_done = done.iter().filter(|k| rank.contains_key(*k)).count();
    let limit = options.max_units.map_or(todo.len(), |m| m.min(todo.len()));

    let mut writer = Writer::open(run_dir)?;
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let mut computed = 0;
    let mut failed = 0;
    let mut aborted = None;
    let mut write_error = None;
    let workers = pipeline.config.run.concurrency.min(limit).max(1);

    std::thread::scope(|s| {
        let (tx, rx) = mpsc::channel::<UnitOutput>();
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, stop, todo) = (&next, &stop, &todo);
            s.spawn(move || loop {
                if stop.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= limit {
                    break;
                }
                let (topic, language) = todo[i];
                let out = pipeline.evaluate_topic(topic, language);
                if out.failure.as_ref().is_some_and(|f| f.is_fatal()) {
                    stop.store(true, Ordering::SeqCst);
                }
                if tx.send(out).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for out in rx {
            if write_error.is_some() {
                continue;
            }
            if let Err(e) = writer.write_unit(&out) {
                write_error = Some(e);
                stop.store(true, Ordering::SeqCst);
                continue;
            }
            computed += 1;
            if out.evaluation.status == UnitStatus::Failed {
                failed += 1;
                log::warn!(
                    "{} [{}] failed: {}",
                    out.evaluation.topic_id,
                    out.evaluation.language,
                    out.evaluation.error.as_deref().unwrap_or("")
                );
            }
            if let Some(f) = out.failure.as_ref().filter(|f| f.is_fatal()) {
                aborted.get_or_insert_with(|| f.to_string());
            }
            progress(&ProgressEvent {
                record: out.evaluation,
                finished: already_done + computed,
                total,
            });
        }
    });
    if let Some(e) = write_error {
        return Err(e);
    }
    drop(writer);

    let complete = already_done + computed == total;
    if complete {
        rewrite_files(run_dir, |k| rank.contains_key(k), Some(&rank))?;
    }
    Ok(RunSummary {
        run_dir: run_dir.to_path_buf(),
        total_units: total,
        already_done,
        computed,
        failed,
        complete,
        aborted,
        network_calls: pipeline.gateways.network_calls(),
    })
}
