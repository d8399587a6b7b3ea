//! Generate, translate, decompose, verify and score, per (topic, language).

mod run;
mod stages;

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use run::{
    read_evaluations, read_manifest, run_evaluation, ProgressEvent, RunManifest, RunOptions, RunSummary,
    EVALUATIONS_FILE, FACTS_FILE, GENERATIONS_FILE, MANIFEST_FILE, RUN_FILES, RUN_FORMAT_VERSION, TRANSLATIONS_FILE,
    VERDICTS_FILE,
};
pub use stages::{
    decide_label, decompose, detect_refusal, format_evidence, generate_biography, lexical_support, parse_fact_lines,
    parse_judgement, translate_to_english, verify_fact, Sampling, VerifySettings, IDENTITY_TRANSLATOR,
};

use crate::config::{Config, KnowledgeSource};
use crate::gateway::{
    transport_for, CallBudget, Gateway, GatewayError, ResponseCache, TemplateError, TemplateRegistry,
};
use crate::knowledge::{ArticleCache, KnowledgeBase, KnowledgeError, KnowledgeStore, WikipediaClient};
use crate::roster::Roster;
use crate::synthetic::SyntheticArticles;
use crate::types::{
    AtomicFact, BiographyEvaluation, GenerationRecord, LanguageCode, Topic, TranslationRecord, Verdict,
};

/// Failure of one stage for one unit.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum StageError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
    #[error("generation was a refusal; nothing to translate")]
    SkippedRefusal,
    #[error("cannot decompose empty text")]
    EmptyText,
}

impl From<TemplateError> for StageError {
    fn from(e: TemplateError) -> Self {
        StageError::Gateway(GatewayError::Template(e))
    }
}

impl StageError {
    /// Errors that will fail every remaining unit too, so the run stops.
    pub fn is_fatal(&self) -> bool {
        matches!(
            self,
            StageError::Gateway(GatewayError::AuthError(_) | GatewayError::BudgetExceeded { .. })
        )
    }
}

/// Errors that abort a run before or instead of doing work.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("run directory {dir} was created with a different {what}; start a new run or restore the original configuration (expected {expected}, found {found})")]
    ConfigDrift {
        dir: PathBuf,
        what: String,
        expected: String,
        found: String,
    },
    #[error("run directory {0} already contains a run; pass it to resume instead")]
    RunExists(PathBuf),
    #[error("no run to resume in {0}")]
    NoRun(PathBuf),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl PipelineError {
    pub(crate) fn io(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        PipelineError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitStatus {
    Ok,
    Failed,
}

/// One line of evaluations.jsonl.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub topic_id: String,
    pub language: LanguageCode,
    pub status: UnitStatus,
    pub score: Option<f64>,
    pub n_correct: usize,
    pub n_hallucinated: usize,
    pub n_facts: usize,
    pub refusal: bool,
    /// Not a refusal, but no facts came out of decomposition.
    pub empty: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl EvaluationRecord {
    pub fn scored(evaluation: BiographyEvaluation, refusal: bool) -> Self {
        EvaluationRecord {
            empty: evaluation.n_facts == 0 && !refusal,
            topic_id: evaluation.topic_id,
            language: evaluation.language,
            status: UnitStatus::Ok,
            score: evaluation.score,
            n_correct: evaluation.n_correct,
            n_hallucinated: evaluation.n_hallucinated,
            n_facts: evaluation.n_facts,
            refusal,
            error: None,
        }
    }

    pub fn failed(topic_id: &str, language: LanguageCode, error: &StageError) -> Self {
        EvaluationRecord {
            status: UnitStatus::Failed,
            error: Some(error.to_string()),
            ..EvaluationRecord::scored(BiographyEvaluation::unscored(topic_id, language), false)
        }
    }

    pub fn evaluation(&self) -> BiographyEvaluation {
        BiographyEvaluation {
            topic_id: self.topic_id.clone(),
            language: self.language,
            score: self.score,
            n_correct: self.n_correct,
            n_hallucinated: self.n_hallucinated,
            n_facts: self.n_facts,
        }
    }
}

/// Every record produced for one unit.
#[derive(Debug, Clone)]
pub struct UnitOutput {
    pub generation: Option<GenerationRecord>,
    pub translation: Option<TranslationRecord>,
    pub facts: Vec<AtomicFact>,
    pub verdicts: Vec<Verdict>,
    pub evaluation: EvaluationRecord,
    pub failure: Option<StageError>,
}

/// One gateway per stage.
pub struct StageGateways {
    pub generation: Gateway,
    pub translation: Gateway,
    pub decomposition: Gateway,
    pub verification: Gateway,
}

impl StageGateways {
    /// Gateways for the configured backends, sharing one cache and budget.
    /// `roster` is what mock backends answer from.
    pub fn from_config(
        config: &Config,
        roster: Arc<Roster>,
        templates: Arc<TemplateRegistry>,
        cache: Arc<ResponseCache>,
        budget: Arc<CallBudget>,
    ) -> Result<Self, GatewayError> {
        let b = &config.backends;
        let make = |spec: &crate::gateway::BackendSpec| -> Result<Gateway, GatewayError> {
            let transport = transport_for(spec, roster.clone(), templates.clone())?;
            Ok(Gateway::new(spec.clone(), transport, cache.clone(), budget.clone()))
        };
        Ok(StageGateways {
            generation: make(&b.generation)?,
            translation: make(&b.translation)?,
            decomposition: make(&b.decomposition)?,
            verification: make(&b.verification)?,
        })
    }

    pub fn network_calls(&self) -> usize {
        self.generation.network_calls()
            + self.translation.network_calls()
            + self.decomposition.network_calls()
            + self.verification.network_calls()
    }
}

/// Everything a run needs: configuration, the evaluation grid, prompts,
/// knowledge and backends.
pub struct Pipeline {
    pub config: Config,
    /// Topics in the grid, in roster order.
    pub roster: Arc<Roster>,
    pub templates: Arc<TemplateRegistry>,
    pub knowledge: KnowledgeStore,
    pub gateways: StageGateways,
}

impl Pipeline {
    pub fn new(
        config: Config,
        roster: Arc<Roster>,
        templates: Arc<TemplateRegistry>,
        knowledge: KnowledgeStore,
        gateways: StageGateways,
    ) -> Self {
        Pipeline {
            config,
            roster,
            templates,
            knowledge,
            gateways,
        }
    }

    /// Loads roster, templates and caches named in `config.paths`, restricts
    /// the roster to `config.run.topics`, and connects the backends.
    pub fn from_config(config: Config) -> Result<Pipeline, PipelineError> {
        config.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        let full = match &config.paths.roster {
            Some(path) => Roster::load(path).map_err(|e| PipelineError::Config(e.to_string()))?,
            None => Roster::bundled(),
        };
        let grid = if config.run.topics.is_empty() {
            full.clone()
        } else {
            full.filter(&config.run.topics)
                .map_err(|e| PipelineError::Config(e.to_string()))?
        };
        let templates = match &config.paths.templates {
            Some(path) => TemplateRegistry::load(path).map_err(|e| PipelineError::Config(e.to_string()))?,
            None => TemplateRegistry::bundled(),
        };
        for &language in &config.run.languages {
            templates
                .get(crate::gateway::TemplateId::Biography, language)
                .map_err(|e| PipelineError::Config(e.to_string()))?;
        }
        let templates = Arc::new(templates);
        let full = Arc::new(full);

        let base = match config.knowledge.source {
            KnowledgeSource::Wikipedia => KnowledgeBase::new(
                ArticleCache::new(&config.paths.article_cache),
                Box::new(WikipediaClient::new(
                    config.knowledge.api_url.clone(),
                    Default::default(),
                )),
            ),
            KnowledgeSource::Synthetic => KnowledgeBase::new(
                ArticleCache::new(config.paths.article_cache.join("synthetic")),
                Box::new(SyntheticArticles::new((*full).clone())),
            ),
        };
        let knowledge = KnowledgeStore::new(base, config.knowledge.window, config.knowledge.stride);
        let cache = Arc::new(ResponseCache::new(&config.paths.response_cache));
        let budget = Arc::new(CallBudget::new(config.run.max_calls));
        let gateways = StageGateways::from_config(&config, full, templates.clone(), cache, budget)
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(Pipeline::new(config, Arc::new(grid), templates, knowledge, gateways))
    }

    fn sampling(&self, generation: bool) -> Sampling {
        Sampling {
            temperature: if generation {
                self.config.run.temperature
            } else {
                self.config.run.auxiliary_temperature
            },
            seed: self.config.run.seed,
        }
    }

    /// Runs all stages for one unit. Stage failures become a failed
    /// evaluation record rather than an error.
    pub fn evaluate_topic(&self, topic: &Topic, language: LanguageCode) -> UnitOutput {
        let mut out = UnitOutput {
            generation: None,
            translation: None,
            facts: Vec::new(),
            verdicts: Vec::new(),
            evaluation: EvaluationRecord::scored(BiographyEvaluation::unscored(&topic.id, language), false),
            failure: None,
        };
        if let Err(e) = self.run_stages(topic, language, &mut out) {
            return UnitOutput {
                generation: None,
                translation: None,
                facts: Vec::new(),
                verdicts: Vec::new(),
                evaluation: EvaluationRecord::failed(&topic.id, language, &e),
                failure: Some(e),
            };
        }
        out
    }

    fn run_stages(&self, topic: &Topic, language: LanguageCode, out: &mut UnitOutput) -> Result<(), StageError> {
        let g = &self.gateways;
        let generation = generate_biography(
            topic,
            language,
            &g.generation,
            &self.templates,
            self.sampling(true),
            &self.config.refusal,
        )?;
        let refusal = generation.refusal;
        out.generation = Some(generation);
        if refusal {
            out.evaluation = EvaluationRecord::scored(BiographyEvaluation::unscored(&topic.id, language), true);
            return Ok(());
        }
        let translation = translate_to_english(
            out.generation.as_ref().unwrap(),
            &g.translation,
            &self.templates,
            self.sampling(false),
        )?;
        let english = translation.english_text.clone();
        out.translation = Some(translation);
        if english.trim().is_empty() {
            return Ok(());
        }
        out.facts = decompose(&english, &g.decomposition, &self.templates, self.sampling(false))?;
        if !out.facts.is_empty() {
            let index = self.knowledge.index_for(&topic.wikipedia_title)?;
            let settings = VerifySettings {
                top_k: self.config.knowledge.top_k,
                npm_threshold: self.config.verification.npm_threshold,
                ensemble: self.config.verification.ensemble,
                sampling: self.sampling(false),
            };
            for fact in &out.facts {
                out.verdicts.push(verify_fact(
                    fact,
                    topic,
                    &index,
                    &g.verification,
                    &self.templates,
                    &settings,
                )?);
            }
        }
        out.evaluation = EvaluationRecord::scored(
            BiographyEvaluation::from_verdicts(&topic.id, language, &out.verdicts),
            false,
        );
        Ok(())
    }
}
