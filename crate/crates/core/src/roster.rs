//! The topic roster: 80 countries with their 2015 heads of state.
//!
//! Stored as UTF-8 JSONL, one [`Topic`] per line.

use std::collections::HashSet;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::DomainError;
use crate::types::{LanguageCode, Topic};

const BUNDLED_ROSTER: &str = include_str!("../data/roster.jsonl");

#[derive(Debug, Clone, PartialEq)]
pub struct Roster {
    topics: Vec<Topic>,
}

impl Roster {
    /// The 80-country roster shipped with the crate.
    pub fn bundled() -> Roster {
        Roster::from_jsonl(BUNDLED_ROSTER).expect("bundled roster is valid")
    }

    pub fn load(path: &Path) -> Result<Roster, RosterLoadError> {
        let text = std::fs::read_to_string(path).map_err(|e| RosterLoadError::Io(path.display().to_string(), e))?;
        Ok(Roster::from_jsonl(&text)?)
    }

    pub fn from_jsonl(text: &str) -> Result<Roster, DomainError> {
        let mut topics = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let topic: Topic = serde_json::from_str(line).map_err(|e| DomainError::RosterParse {
                line: i + 1,
                message: e.to_string(),
            })?;
            topics.push(topic);
        }
        Roster::new(topics)
    }

    pub fn new(topics: Vec<Topic>) -> Result<Roster, DomainError> {
        if topics.is_empty() {
            return Err(DomainError::EmptyRoster);
        }
        let mut seen = HashSet::new();
        for t in &topics {
            t.validate()?;
            if !seen.insert(t.id.as_str()) {
                return Err(DomainError::DuplicateTopic(t.id.clone()));
            }
        }
        Ok(Roster { topics })
    }

    pub fn topics(&self) -> &[Topic] {
        &self.topics
    }

    pub fn len(&self) -> usize {
        self.topics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.topics.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Topic> {
        self.topics.iter().find(|t| t.id == id)
    }

    /// Position of a topic in roster order.
    pub fn position(&self, id: &str) -> Option<usize> {
        self.topics.iter().position(|t| t.id == id)
    }

    /// Looks up the topic whose transliterated name in `lang` is `name`.
    pub fn find_by_name(&self, lang: LanguageCode, name: &str) -> Option<&Topic> {
        let name = name.trim();
        self.topics.iter().find(|t| t.name_in(lang) == name)
    }

    /// Keeps only the listed ids, in roster order.
    pub fn filter(&self, ids: &[String]) -> Result<Roster, DomainError> {
        for id in ids {
            if self.get(id).is_none() {
                return Err(DomainError::UnknownTopic(id.clone()));
            }
        }
        Roster::new(self.topics.iter().filter(|t| ids.contains(&t.id)).cloned().collect())
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for t in &self.topics {
            out.push_str(&serde_json::to_string(t).expect("topic serializes"));
            out.push('\n');
        }
        out
    }

    /// SHA-256 over the canonical JSONL form.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_jsonl().as_bytes()))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RosterLoadError {
    #[error("cannot read roster {0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error(transparent)]
    Invalid(#[from] DomainError),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Continent;
    use std::collections::BTreeMap;

    #[test]
    fn bundled_roster_has_twenty_per_continent() {
        let roster = Roster::bundled();
        assert_eq!(roster.len(), 80);
        for c in Continent::ALL {
            let n = roster.topics().iter().filter(|t| t.geo.continent == c).count();
            assert_eq!(n, 20, "{c}");
        }
    }

    #[test]
    fn bundled_roster_spot_checks() {
        let roster = Roster::bundled();
        let us = roster.get("united-states").unwrap();
        assert_eq!(us.leader_name, "Barack Obama");
        assert_eq!(us.geo.subregion, "Northern America");
        let nz = roster.get("new-zealand").unwrap();
        assert_eq!(nz.geo.subregion, "Oceania");
        assert_eq!(nz.geo.continent, Continent::America);
        let uz = roster.get("uzbekistan").unwrap();
        assert_eq!(uz.geo.subregion, "Central Asia");
        assert_eq!(
            roster.find_by_name(LanguageCode::Ko, "박근혜").unwrap().id,
            "south-korea"
        );
    }

    #[test]
    fn singleton_subregions_are_southern_africa_and_central_asia() {
        let roster = Roster::bundled();
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for t in roster.topics() {
            *counts.entry(t.geo.subregion.as_str()).or_default() += 1;
        }
        let singles: Vec<_> = counts.iter().filter(|(_, n)| **n == 1).map(|(s, _)| *s).collect();
        assert_eq!(singles, vec!["Central Asia", "Southern Africa"]);
    }

    #[test]
    fn jsonl_round_trip_is_stable() {
        let roster = Roster::bundled();
        let again = Roster::from_jsonl(&roster.to_jsonl()).unwrap();
        assert_eq!(roster, again);
        assert_eq!(roster.content_hash(), again.content_hash());
    }

    #[test]
    fn rejects_duplicates_and_missing_names() {
        let roster = Roster::bundled();
        let mut topics = roster.topics()[..2].to_vec();
        topics[1].id = topics[0].id.clone();
        assert!(matches!(Roster::new(topics), Err(DomainError::DuplicateTopic(_))));

        let mut t = roster.topics()[0].clone();
        t.name_by_language.remove(&LanguageCode::Bn);
        assert!(matches!(Roster::new(vec![t]), Err(DomainError::InvalidTopic(..))));

        let bad = roster.to_jsonl().replacen("\"bn\"", "\"pt\"", 1);
        assert!(matches!(
            Roster::from_jsonl(&bad),
            Err(DomainError::RosterParse { line: 1, .. })
        ));
    }

    #[test]
    fn filter_keeps_roster_order() {
        let roster = Roster::bundled();
        let f = roster.filter(&["japan".to_string(), "ethiopia".to_string()]).unwrap();
        let ids: Vec<_> = f.topics().iter().map(|t| t.id.as_str()).collect();
        assert_eq!(ids, vec!["ethiopia", "japan"]);
        assert!(roster.filter(&["atlantis".to_string()]).is_err());
    }
}
