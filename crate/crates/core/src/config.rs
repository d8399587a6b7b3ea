//! Run configuration, read from one TOML file.
//!
//! ```toml
//! [backends.generation]
//! backend_kind = "http_chat"
//! model_id = "gpt-3.5-turbo-0613"
//! endpoint_url = "https://api.openai.com/v1/chat/completions"
//! credentials_env_var = "OPENAI_API_KEY"
//!
//! [backends.translation]      # same shape; also decomposition, verification
//!
//! [knowledge]
//! source = "wikipedia"        # or "synthetic"
//! window = 256
//! stride = 128
//! top_k = 5
//!
//! [verification]
//! npm_threshold = 0.3
//! ensemble = "conjunction"    # or "judge_only"
//!
//! [run]
//! languages = ["en", "ko"]
//! temperature = 1.0
//! concurrency = 4
//! seed = 0
//!
//! [paths]
//! article_cache = "cache/articles"
//! response_cache = "cache/responses"
//! runs_dir = "runs"
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::gateway::BackendSpec;
use crate::knowledge::DEFAULT_WIKIPEDIA_API;
use crate::types::LanguageCode;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Backends {
    pub generation: BackendSpec,
    pub translation: BackendSpec,
    pub decomposition: BackendSpec,
    pub verification: BackendSpec,
}

impl Backends {
    pub fn all_mock() -> Self {
        Backends {
            generation: BackendSpec::mock("mock-generator"),
            translation: BackendSpec::mock("mock-translator"),
            decomposition: BackendSpec::mock("mock-decomposer"),
            verification: BackendSpec::mock("mock-judge"),
        }
    }

    pub fn by_stage(&self) -> [(&'static str, &BackendSpec); 4] {
        [
            ("generation", &self.generation),
            ("translation", &self.translation),
            ("decomposition", &self.decomposition),
            ("verification", &self.verification),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnowledgeSource {
    Wikipedia,
    /// Articles built from the synthetic fact bank; pairs with mock backends.
    Synthetic,
}

fn default_api_url() -> String {
    DEFAULT_WIKIPEDIA_API.to_string()
}
fn default_window() -> usize {
    256
}
fn default_stride() -> usize {
    128
}
fn default_top_k() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnowledgeConfig {
    #[serde(default = "default_source")]
    pub source: KnowledgeSource,
    #[serde(default = "default_api_url")]
    pub api_url: String,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_stride")]
    pub stride: usize,
    /// Passages retrieved per fact.
    #[serde(default = "default_top_k")]
    pub top_k: usize,
}

fn default_source() -> KnowledgeSource {
    KnowledgeSource::Wikipedia
}

impl Default for KnowledgeConfig {
    fn default() -> Self {
        KnowledgeConfig {
            source: default_source(),
            api_url: default_api_url(),
            window: default_window(),
            stride: default_stride(),
            top_k: default_top_k(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ensemble {
    /// Supported iff the judge agrees and the lexical score clears the threshold.
    Conjunction,
    JudgeOnly,
}

fn default_npm_threshold() -> f64 {
    0.3
}
fn default_ensemble() -> Ensemble {
    Ensemble::Conjunction
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerificationConfig {
    #[serde(default = "default_npm_threshold")]
    pub npm_threshold: f64,
    #[serde(default = "default_ensemble")]
    pub ensemble: Ensemble,
}

impl Default for VerificationConfig {
    fn default() -> Self {
        VerificationConfig {
            npm_threshold: default_npm_threshold(),
            ensemble: default_ensemble(),
        }
    }
}

fn default_min_chars() -> usize {
    20
}

/// Phrases that mark a generation as a refusal, per language. English markers
/// are checked for every language since models often refuse in English.
fn default_markers() -> BTreeMap<LanguageCode, Vec<String>> {
    use LanguageCode::*;
    let table: [(LanguageCode, &[&str]); 9] = [
        (
            En,
            &[
                "no famous person by that name",
                "i'm sorry, but",
                "i am sorry, but",
                "i couldn't find any information",
                "i could not find any information",
                "i don't have information",
                "i do not have information",
                "i'm not aware of",
                "i am not aware of",
                "as an ai",
            ],
        ),
        (De, &["es tut mir leid", "keine bekannte person", "keine informationen"]),
        (
            Fr,
            &[
                "je suis désolé",
                "aucune personne célèbre",
                "je n'ai pas d'informations",
            ],
        ),
        (Es, &["lo siento", "ninguna persona famosa", "no tengo información"]),
        (Ar, &["عذرا", "عذرًا", "آسف", "لا توجد معلومات", "لا يوجد شخص مشهور"]),
        (Sw, &["samahani", "sina taarifa", "hakuna mtu maarufu"]),
        (Zh, &["抱歉", "对不起", "没有找到", "没有关于"]),
        (Ko, &["죄송합니다", "정보가 없습니다", "찾을 수 없습니다"]),
        (Bn, &["দুঃখিত", "কোনো তথ্য নেই", "কোন তথ্য নেই"]),
    ];
    table
        .into_iter()
        .map(|(l, ms)| (l, ms.iter().map(|m| m.to_string()).collect()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefusalConfig {
    /// Generations shorter than this many characters count as refusals.
    #[serde(default = "default_min_chars")]
    pub min_chars: usize,
    #[serde(default = "default_markers")]
    pub markers: BTreeMap<LanguageCode, Vec<String>>,
}

impl Default for RefusalConfig {
    fn default() -> Self {
        RefusalConfig {
            min_chars: default_min_chars(),
            markers: default_markers(),
        }
    }
}

fn default_languages() -> Vec<LanguageCode> {
    LanguageCode::ALL.to_vec()
}
fn default_temperature() -> f64 {
    1.0
}
fn default_concurrency() -> usize {
    4
}
fn default_top_k_continents() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_languages")]
    pub languages: Vec<LanguageCode>,
    /// Topic ids to evaluate; empty means the whole roster.
    #[serde(default)]
    pub topics: Vec<String>,
    /// Sampling temperature for biography generation.
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    /// Temperature for translation, decomposition and judging.
    #[serde(default)]
    pub auxiliary_temperature: f64,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    /// Cap on backend calls across all stages; cache hits are free.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_calls: Option<u64>,
    #[serde(default)]
    pub seed: u64,
    /// K for the top-K continental distribution report.
    #[serde(default = "default_top_k_continents")]
    pub top_k_continents: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            languages: default_languages(),
            topics: Vec::new(),
            temperature: default_temperature(),
            auxiliary_temperature: 0.0,
            concurrency: default_concurrency(),
            max_calls: None,
            seed: 0,
            top_k_continents: default_top_k_continents(),
        }
    }
}

fn default_article_cache() -> PathBuf {
    PathBuf::from("cache/articles")
}
fn default_response_cache() -> PathBuf {
    PathBuf::from("cache/responses")
}
fn default_runs_dir() -> PathBuf {
    PathBuf::from("runs")
}

/// Relative paths are resolved against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    /// Roster JSONL; the bundled 80-country roster when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roster: Option<PathBuf>,
    /// Prompt template JSON; the bundled templates when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub templates: Option<PathBuf>,
    #[serde(default = "default_article_cache")]
    pub article_cache: PathBuf,
    #[serde(default = "default_response_cache")]
    pub response_cache: PathBuf,
    #[serde(default = "default_runs_dir")]
    pub runs_dir: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            roster: None,
            templates: None,
            article_cache: default_article_cache(),
            response_cache: default_response_cache(),
            runs_dir: default_runs_dir(),
        }
    }
}

impl PathsConfig {
    fn resolve_against(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = self.roster.as_mut() {
            fix(p);
        }
        if let Some(p) = self.templates.as_mut() {
            fix(p);
        }
        fix(&mut self.article_cache);
        fix(&mut self.response_cache);
        fix(&mut self.runs_dir);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub backends: Backends,
    #[serde(default)]
    pub knowledge: KnowledgeConfig,
    #[serde(default)]
    pub verification: VerificationConfig,
    #[serde(default)]
    pub refusal: RefusalConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub paths: PathsConfig,
}

impl Config {
    /// All-mock configuration over synthetic knowledge.
    pub fn mock() -> Self {
        Config {
            backends: Backends::all_mock(),
            knowledge: KnowledgeConfig {
                source: KnowledgeSource::Synthetic,
                ..KnowledgeConfig::default()
            },
            verification: VerificationConfig::default(),
            refusal: RefusalConfig::default(),
            run: RunConfig::default(),
            paths: PathsConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Config, ConfigError> {
        let config: Config = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Panics on configs that fail [`Config::validate`] in ways TOML cannot
    /// represent, such as a seed above `i64::MAX`.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// Parses, validates and resolves relative paths against the file's directory.
    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let mut config = Config::from_toml(&text)?;
        let base = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        config.paths.resolve_against(base);
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        for (stage, spec) in self.backends.by_stage() {
            spec.validate()
                .map_err(|m| ConfigError::Invalid(format!("backends.{stage}: {m}")))?;
        }
        let k = &self.knowledge;
        if k.window == 0 || k.stride == 0 || k.stride > k.window {
            return invalid(format!(
                "knowledge: need 0 < stride <= window, got window={} stride={}",
                k.window, k.stride
            ));
        }
        if k.top_k == 0 {
            return invalid("knowledge.top_k must be at least 1".into());
        }
        let t = self.verification.npm_threshold;
        if !(0.0..=1.0).contains(&t) {
            return invalid(format!("verification.npm_threshold must be in [0, 1], got {t}"));
        }
        let r = &self.run;
        if r.languages.is_empty() {
            return invalid("run.languages must list at least one language".into());
        }
        for (i, l) in r.languages.iter().enumerate() {
            if r.languages[..i].contains(l) {
                return invalid(format!("run.languages lists {l} twice"));
            }
        }
        if [r.temperature, r.auxiliary_temperature].iter().any(|t| t.is_nan() || *t < 0.0) {
            return invalid("run temperatures must be >= 0".into());
        }
        if r.seed > i64::MAX as u64 {
            return invalid(format!("run.seed must be at most {}", i64::MAX));
        }
        if r.concurrency == 0 {
            return invalid("run.concurrency must be at least 1".into());
        }
        if r.top_k_continents == 0 {
            return invalid("run.top_k_continents must be at least 1".into());
        }
        Ok(())
    }

    /// Hash of everything that affects results. Concurrency, call budget,
    /// paths and transport tuning (timeouts, retries, rate limits) are left
    /// out so they can change between a run and its resumption.
    pub fn content_hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        let obj = v.as_object_mut().unwrap();
        obj.remove("paths");
        if let Some(run) = obj.get_mut("run").and_then(|r| r.as_object_mut()) {
            run.remove("concurrency");
            run.remove("max_calls");
        }
        if let Some(backends) = obj.get_mut("backends").and_then(|b| b.as_object_mut()) {
            for spec in backends.values_mut() {
                if let Some(s) = spec.as_object_mut() {
                    for field in [
                        "max_retries",
                        "timeout_secs",
                        "retry_base_delay_ms",
                        "max_in_flight",
                        "requests_per_minute",
                    ] {
                        s.remove(field);
                    }
                }
            }
        }
        // serde_json maps are sorted, so this rendering is canonical.
        hex::encode(Sha256::digest(v.to_string().as_bytes()))
    }
}
