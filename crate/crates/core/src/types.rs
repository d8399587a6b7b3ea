//! Domain types shared by every pipeline stage.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::DomainError;

/// One of the nine evaluation languages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LanguageCode {
    En,
    De,
    Fr,
    Es,
    Ar,
    Sw,
    Zh,
    Ko,
    Bn,
}

impl LanguageCode {
    pub const ALL: [LanguageCode; 9] = [
        LanguageCode::En,
        LanguageCode::De,
        LanguageCode::Fr,
        LanguageCode::Es,
        LanguageCode::Ar,
        LanguageCode::Sw,
        LanguageCode::Zh,
        LanguageCode::Ko,
        LanguageCode::Bn,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LanguageCode::En => "en",
            LanguageCode::De => "de",
            LanguageCode::Fr => "fr",
            LanguageCode::Es => "es",
            LanguageCode::Ar => "ar",
            LanguageCode::Sw => "sw",
            LanguageCode::Zh => "zh",
            LanguageCode::Ko => "ko",
            LanguageCode::Bn => "bn",
        }
    }

    /// English name of the language, as used in translation prompts.
    pub fn english_name(self) -> &'static str {
        match self {
            LanguageCode::En => "English",
            LanguageCode::De => "German",
            LanguageCode::Fr => "French",
            LanguageCode::Es => "Spanish",
            LanguageCode::Ar => "Arabic",
            LanguageCode::Sw => "Swahili",
            LanguageCode::Zh => "Chinese",
            LanguageCode::Ko => "Korean",
            LanguageCode::Bn => "Bengali",
        }
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|l| *l == self).unwrap()
    }
}

impl fmt::Display for LanguageCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LanguageCode {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LanguageCode::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| DomainError::UnknownLanguage(s.to_string()))
    }
}

impl Serialize for LanguageCode {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for LanguageCode {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Continent {
    Africa,
    America,
    Asia,
    Europe,
}

impl Continent {
    pub const ALL: [Continent; 4] = [
        Continent::Africa,
        Continent::America,
        Continent::Asia,
        Continent::Europe,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Continent::Africa => "Africa",
            Continent::America => "America",
            Continent::Asia => "Asia",
            Continent::Europe => "Europe",
        }
    }
}

impl fmt::Display for Continent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// UN geoscheme subregions used by the roster, with their continent.
///
/// Australia and New Zealand are filed under "Oceania" and grouped with America.
pub const SUBREGIONS: &[(&str, Continent)] = &[
    ("Eastern Africa", Continent::Africa),
    ("Middle Africa", Continent::Africa),
    ("Northern Africa", Continent::Africa),
    ("Southern Africa", Continent::Africa),
    ("Western Africa", Continent::Africa),
    ("Oceania", Continent::America),
    ("Caribbean", Continent::America),
    ("Central America", Continent::America),
    ("Northern America", Continent::America),
    ("South America", Continent::America),
    ("Central Asia", Continent::Asia),
    ("Eastern Asia", Continent::Asia),
    ("South-Eastern Asia", Continent::Asia),
    ("Southern Asia", Continent::Asia),
    ("Western Asia", Continent::Asia),
    ("Eastern Europe", Continent::Europe),
    ("Northern Europe", Continent::Europe),
    ("Southern Europe", Continent::Europe),
    ("Western Europe", Continent::Europe),
];

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GeoTag {
    pub continent: Continent,
    pub subregion: String,
}

impl GeoTag {
    /// Builds a tag, folding "Australia and New Zealand" into "Oceania" and
    /// checking that the subregion belongs to the continent.
    pub fn new(continent: Continent, subregion: &str) -> Result<Self, DomainError> {
        let subregion = if subregion == "Australia and New Zealand" {
            "Oceania"
        } else {
            subregion
        };
        let tag = GeoTag {
            continent,
            subregion: subregion.to_string(),
        };
        tag.validate()?;
        Ok(tag)
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        match SUBREGIONS.iter().find(|(name, _)| *name == self.subregion) {
            Some((_, c)) if *c == self.continent => Ok(()),
            Some((_, c)) => Err(DomainError::InvalidGeoTag(format!(
                "subregion {:?} belongs to {}, not {}",
                self.subregion, c, self.continent
            ))),
            None => Err(DomainError::InvalidGeoTag(format!(
                "unknown subregion {:?}",
                self.subregion
            ))),
        }
    }
}

/// A roster entry: one country and its 2015 head of state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topic {
    pub id: String,
    pub country: String,
    /// ISO 3166-1 alpha-3 code, used by map exports.
    pub iso_code: String,
    pub leader_name: String,
    pub name_by_language: BTreeMap<LanguageCode, String>,
    pub geo: GeoTag,
    pub wikipedia_title: String,
}

impl Topic {
    pub fn validate(&self) -> Result<(), DomainError> {
        let bad = |msg: String| Err(DomainError::InvalidTopic(self.id.clone(), msg));
        if self.id.is_empty() {
            return bad("empty id".into());
        }
        if self.wikipedia_title.trim().is_empty() {
            return bad("empty wikipedia_title".into());
        }
        if self.leader_name.trim().is_empty() {
            return bad("empty leader_name".into());
        }
        for lang in LanguageCode::ALL {
            match self.name_by_language.get(&lang) {
                Some(name) if !name.trim().is_empty() => {}
                _ => return bad(format!("missing name for language {lang}")),
            }
        }
        self.geo
            .validate()
            .map_err(|e| DomainError::InvalidTopic(self.id.clone(), e.to_string()))
    }

    pub fn name_in(&self, lang: LanguageCode) -> &str {
        self.name_by_language
            .get(&lang)
            .map(String::as_str)
            .unwrap_or(&self.leader_name)
    }
}

/// Raw model output for one (topic, language) unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub topic_id: String,
    pub language: LanguageCode,
    pub text: String,
    pub model_id: String,
    pub temperature: f64,
    pub refusal: bool,
    pub created_at: DateTime<Utc>,
}

/// English rendering of a generation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslationRecord {
    pub topic_id: String,
    pub source_language: LanguageCode,
    pub english_text: String,
    pub translator_model_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomicFact {
    pub fact_id: usize,
    pub text: String,
    pub source_sentence_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Supported,
    NotSupported,
}

/// Identifies a passage by article title and its position in the article.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PassageId {
    pub title: String,
    pub ordinal: usize,
}

impl fmt::Display for PassageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.title, self.ordinal)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub fact_id: usize,
    pub label: Label,
    pub judge_score: f64,
    pub lexical_score: f64,
    pub evidence_passage_ids: Vec<PassageId>,
}

impl Verdict {
    pub fn is_supported(&self) -> bool {
        self.label == Label::Supported
    }
}

/// Score and fact counts for one biography. `score` is `None` when the
/// biography produced no facts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiographyEvaluation {
    pub topic_id: String,
    pub language: LanguageCode,
    pub score: Option<f64>,
    pub n_correct: usize,
    pub n_hallucinated: usize,
    pub n_facts: usize,
}

impl BiographyEvaluation {
    pub fn from_verdicts(topic_id: &str, language: LanguageCode, verdicts: &[Verdict]) -> Self {
        let (n_correct, n_hallucinated) = crate::score::fact_counts(verdicts);
        BiographyEvaluation {
            topic_id: topic_id.to_string(),
            language,
            score: crate::score::factscore(verdicts).ok(),
            n_correct,
            n_hallucinated,
            n_facts: n_correct + n_hallucinated,
        }
    }

    /// An evaluation with no facts and an undefined score.
    pub fn unscored(topic_id: &str, language: LanguageCode) -> Self {
        BiographyEvaluation {
            topic_id: topic_id.to_string(),
            language,
            score: None,
            n_correct: 0,
            n_hallucinated: 0,
            n_facts: 0,
        }
    }
}
