//! Prompt templates with `{placeholder}` slots.
//!
//! Templates are frozen data loaded from `data/templates.json`. Non-English
//! biography prompts were translated once and reviewed; they are not
//! re-translated at runtime.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::types::LanguageCode;

const BUNDLED_TEMPLATES: &str = include_str!("../../data/templates.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    Biography,
    Translate,
    Decompose,
    Verify,
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TemplateId::Biography => "biography",
            TemplateId::Translate => "translate",
            TemplateId::Decompose => "decompose",
            TemplateId::Verify => "verify",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TemplateError {
    #[error("no {0} template for language {1}")]
    MissingTemplate(TemplateId, LanguageCode),
    #[error("placeholder {{{placeholder}}} is not bound in the {template} template")]
    UnboundPlaceholder { template: TemplateId, placeholder: String },
    #[error("invalid template file: {0}")]
    InvalidFile(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Literal(String),
    Slot(String),
}

fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{([a-z_]+)\}").unwrap())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub template_id: TemplateId,
    pub language: LanguageCode,
    pub text: String,
    #[serde(skip)]
    segments: Vec<Segment>,
}

impl PromptTemplate {
    pub fn new(template_id: TemplateId, language: LanguageCode, text: &str) -> Result<Self, TemplateError> {
        let mut t = PromptTemplate {
            template_id,
            language,
            text: text.to_string(),
            segments: Vec::new(),
        };
        t.compile()?;
        Ok(t)
    }

    fn compile(&mut self) -> Result<(), TemplateError> {
        let mut segments = Vec::new();
        let mut last = 0;
        let mut seen = Vec::new();
        for caps in placeholder_re().captures_iter(&self.text) {
            let m = caps.get(0).unwrap();
            if m.start() > last {
                segments.push(Segment::Literal(self.text[last..m.start()].to_string()));
            }
            let name = caps[1].to_string();
            if seen.contains(&name) {
                return Err(TemplateError::InvalidFile(format!(
                    "{} template ({}) repeats placeholder {{{name}}}",
                    self.template_id, self.language
                )));
            }
            seen.push(name.clone());
            segments.push(Segment::Slot(name));
            last = m.end();
        }
        if last < self.text.len() {
            segments.push(Segment::Literal(self.text[last..].to_string()));
        }
        self.segments = segments;
        Ok(())
    }

    pub fn placeholders(&self) -> impl Iterator<Item = &str> {
        self.segments.iter().filter_map(|s| match s {
            Segment::Slot(name) => Some(name.as_str()),
            Segment::Literal(_) => None,
        })
    }

    /// Substitutes every placeholder in one pass. Bound values are inserted
    /// verbatim and never re-scanned; extra bindings are ignored.
    pub fn render(&self, bindings: &[(&str, &str)]) -> Result<String, TemplateError> {
        let mut out = String::with_capacity(self.text.len() + 64);
        for seg in &self.segments {
            match seg {
                Segment::Literal(s) => out.push_str(s),
                Segment::Slot(name) => {
                    let value = bindings
                        .iter()
                        .find(|(k, _)| k == name)
                        .map(|(_, v)| *v)
                        .ok_or_else(|| TemplateError::UnboundPlaceholder {
                            template: self.template_id,
                            placeholder: name.clone(),
                        })?;
                    out.push_str(value);
                }
            }
        }
        Ok(out)
    }

    fn matcher(&self) -> Regex {
        let mut pattern = String::from("(?s)^");
        for seg in &self.segments {
            match seg {
                Segment::Literal(s) => pattern.push_str(&regex::escape(s)),
                Segment::Slot(name) => pattern.push_str(&format!("(?P<{name}>.*?)")),
            }
        }
        pattern.push('$');
        Regex::new(&pattern).expect("template matcher compiles")
    }

    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.text.as_bytes()))
    }
}

/// A prompt recognized as an instance of a known template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateMatch {
    pub template_id: TemplateId,
    pub language: LanguageCode,
    pub bindings: BTreeMap<String, String>,
}

impl TemplateMatch {
    pub fn get(&self, name: &str) -> &str {
        self.bindings.get(name).map(String::as_str).unwrap_or("")
    }
}

#[derive(Debug, Clone)]
pub struct TemplateRegistry {
    templates: BTreeMap<(TemplateId, LanguageCode), PromptTemplate>,
    matchers: HashMap<(TemplateId, LanguageCode), Regex>,
}

impl TemplateRegistry {
    pub fn bundled() -> TemplateRegistry {
        TemplateRegistry::from_json(BUNDLED_TEMPLATES).expect("bundled templates are valid")
    }

    pub fn load(path: &Path) -> Result<TemplateRegistry, TemplateError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TemplateError::InvalidFile(format!("{}: {e}", path.display())))?;
        TemplateRegistry::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<TemplateRegistry, TemplateError> {
        let raw: Vec<PromptTemplate> =
            serde_json::from_str(text).map_err(|e| TemplateError::InvalidFile(e.to_string()))?;
        let mut templates = BTreeMap::new();
        for t in raw {
            let t = PromptTemplate::new(t.template_id, t.language, &t.text)?;
            if templates.insert((t.template_id, t.language), t.clone()).is_some() {
                return Err(TemplateError::InvalidFile(format!(
                    "duplicate {} template for {}",
                    t.template_id, t.language
                )));
            }
        }
        let matchers = templates.iter().map(|(k, t)| (*k, t.matcher())).collect();
        Ok(TemplateRegistry { templates, matchers })
    }

    pub fn get(&self, id: TemplateId, language: LanguageCode) -> Result<&PromptTemplate, TemplateError> {
        self.templates
            .get(&(id, language))
            .ok_or(TemplateError::MissingTemplate(id, language))
    }

    pub fn render(
        &self,
        id: TemplateId,
        language: LanguageCode,
        bindings: &[(&str, &str)],
    ) -> Result<String, TemplateError> {
        self.get(id, language)?.render(bindings)
    }

    pub fn templates(&self) -> impl Iterator<Item = &PromptTemplate> {
        self.templates.values()
    }

    /// `"<template_id>/<language>" -> sha256(text)` for run manifests.
    pub fn hashes(&self) -> BTreeMap<String, String> {
        self.templates
            .values()
            .map(|t| (format!("{}/{}", t.template_id, t.language), t.sha256()))
            .collect()
    }

    /// Recognizes which template produced `prompt` and recovers its bindings.
    pub fn parse(&self, prompt: &str) -> Option<TemplateMatch> {
        for (key, re) in self.ordered_matchers() {
            if let Some(caps) = re.captures(prompt) {
                let bindings = re
                    .capture_names()
                    .flatten()
                    .filter_map(|n| caps.name(n).map(|m| (n.to_string(), m.as_str().to_string())))
                    .collect();
                return Some(TemplateMatch {
                    template_id: key.0,
                    language: key.1,
                    bindings,
                });
            }
        }
        None
    }

    fn ordered_matchers(&self) -> impl Iterator<Item = (&(TemplateId, LanguageCode), &Regex)> {
        self.templates.keys().map(|k| (k, &self.matchers[k]))
    }
}
