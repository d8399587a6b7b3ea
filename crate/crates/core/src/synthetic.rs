//! Deterministic stand-ins for Wikipedia articles and model biographies.
//!
//! Each roster topic gets a bank of true claims (the synthetic article is
//! exactly these sentences) and a bank of fabricated claims that never appear
//! in it. The mock backend assembles biographies from both banks, so a run
//! over synthetic knowledge has a known number of correct and hallucinated
//! facts per biography.

use chrono::DateTime;
use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::knowledge::{ArticleSource, KnowledgeDocument, KnowledgeError};
use crate::roster::Roster;
use crate::types::{LanguageCode, Topic};

pub const SYNTHETIC_REVISION: &str = "synthetic-1";

const TRUE_FORMS: &[&str] = &[
    "{leader} was the head of state of {country} in 2015.",
    "{leader} is a politician from {country}.",
    "{country} is a country in {subregion}.",
    "{leader} held the highest office in {country}.",
    "{leader} took part in the national politics of {country}.",
    "{leader} represented {country} at international summits.",
    "{leader} addressed the people of {country} as their leader.",
    "{country} was led by {leader} during 2015.",
];

const FALSE_FORMS: &[&str] = &[
    "{leader} won an Olympic gold medal in rowing.",
    "{leader} was the first person to walk on Mars.",
    "{leader} composed a famous opera about whales.",
    "{leader} was born on a research station in Antarctica.",
    "{leader} played professional ice hockey for a decade.",
    "{leader} invented a popular brand of instant noodles.",
    "{leader} won the Nobel Prize in Chemistry twice.",
    "{leader} spent twenty years living underwater.",
];

pub const MAX_TRUE_CLAIMS: usize = TRUE_FORMS.len();
pub const MAX_FALSE_CLAIMS: usize = FALSE_FORMS.len();

fn fill(form: &str, topic: &Topic) -> String {
    form.replace("{leader}", &topic.leader_name)
        .replace("{country}", &topic.country)
        .replace("{subregion}", &topic.geo.subregion)
}

pub fn true_claims(topic: &Topic) -> Vec<String> {
    TRUE_FORMS.iter().map(|f| fill(f, topic)).collect()
}

pub fn false_claims(topic: &Topic) -> Vec<String> {
    FALSE_FORMS.iter().map(|f| fill(f, topic)).collect()
}

/// The synthetic article: every true claim, in bank order.
pub fn article(topic: &Topic) -> KnowledgeDocument {
    KnowledgeDocument {
        wikipedia_title: topic.wikipedia_title.clone(),
        revision_id: SYNTHETIC_REVISION.to_string(),
        plain_text: true_claims(topic).join(" "),
        fetched_at: DateTime::UNIX_EPOCH,
    }
}

fn rng_for(seed: u64, topic: &Topic, language: LanguageCode) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(topic.id.as_bytes());
    h.update([0]);
    h.update(language.as_str().as_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// A biography of `n_true` true and `n_false` fabricated claims, one sentence
/// each, in an order fixed by `(seed, topic, language)`. Counts are clamped to
/// the bank sizes.
pub fn biography(topic: &Topic, language: LanguageCode, n_true: usize, n_false: usize, seed: u64) -> String {
    let mut rng = rng_for(seed, topic, language);
    let trues = true_claims(topic);
    let falses = false_claims(topic);
    let n_true = n_true.min(trues.len());
    let n_false = n_false.min(falses.len());
    let mut picked: Vec<String> = index::sample(&mut rng, trues.len(), n_true)
        .into_iter()
        .map(|i| trues[i].clone())
        .chain(
            index::sample(&mut rng, falses.len(), n_false)
                .into_iter()
                .map(|i| falses[i].clone()),
        )
        .collect();
    picked.shuffle(&mut rng);
    picked.join(" ")
}

/// Serves synthetic articles for roster titles.
pub struct SyntheticArticles {
    roster: Roster,
}

impl SyntheticArticles {
    pub fn new(roster: Roster) -> Self {
        SyntheticArticles { roster }
    }
}

impl ArticleSource for SyntheticArticles {
    fn fetch(&self, title: &str) -> Result<KnowledgeDocument, KnowledgeError> {
        self.roster
            .topics()
            .iter()
            .find(|t| t.wikipedia_title == title)
            .map(article)
            .ok_or_else(|| KnowledgeError::ArticleNotFound(title.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::split_sentences;

    #[test]
    fn fabricated_claims_never_appear_in_articles() {
        for topic in Roster::bundled().topics() {
            let text = article(topic).plain_text;
            for claim in false_claims(topic) {
                assert!(!text.contains(&claim), "{claim}");
            }
            for claim in true_claims(topic) {
                assert!(text.contains(&claim));
            }
        }
    }

    #[test]
    fn biographies_segment_into_their_claims() {
        for topic in Roster::bundled().topics() {
            let bio = biography(topic, LanguageCode::En, MAX_TRUE_CLAIMS, MAX_FALSE_CLAIMS, 7);
            let sentences = split_sentences(&bio);
            assert_eq!(sentences.len(), MAX_TRUE_CLAIMS + MAX_FALSE_CLAIMS, "{bio}");
        }
    }

    #[test]
    fn biography_is_seeded() {
        let roster = Roster::bundled();
        let t = roster.get("japan").unwrap();
        let a = biography(t, LanguageCode::Ko, 3, 2, 11);
        assert_eq!(a, biography(t, LanguageCode::Ko, 3, 2, 11));
        assert_ne!(a, biography(t, LanguageCode::Ko, 3, 2, 12));
        assert_eq!(split_sentences(&a).len(), 5);
        assert_eq!(biography(t, LanguageCode::En, 0, 0, 1), "");
    }
}
