//! Deterministic test double for every prompt kind.
//!
//! The mock recognizes which template produced a prompt and answers as a pure
//! function of that prompt and the request seed:
//!
//! * biography: a synthetic biography with a configured number of true and
//!   fabricated claims about the roster leader, or a refusal;
//! * translate: the input text, unchanged;
//! * decompose: one fact per input sentence;
//! * verify: `Supported` iff the claim appears verbatim in the evidence.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{CompletionRequest, GatewayError, TemplateId, TemplateRegistry, Transport};
use crate::roster::Roster;
use crate::synthetic::{self, MAX_FALSE_CLAIMS, MAX_TRUE_CLAIMS};
use crate::text::split_sentences;
use crate::types::LanguageCode;

pub const MOCK_REFUSAL: &str = "I'm sorry, but there is no famous person by that name that I can write a biography of.";

fn default_true() -> usize {
    3
}
fn default_false() -> usize {
    2
}

/// Claim counts for one topic, optionally restricted to one language.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClaimPlan {
    pub topic_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language: Option<LanguageCode>,
    #[serde(default)]
    pub true_claims: usize,
    #[serde(default)]
    pub false_claims: usize,
    #[serde(default)]
    pub refuse: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockSettings {
    #[serde(default = "default_true")]
    pub true_claims: usize,
    #[serde(default = "default_false")]
    pub false_claims: usize,
    /// Overrides; a plan with a language beats one without.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub plans: Vec<ClaimPlan>,
}

impl Default for MockSettings {
    fn default() -> Self {
        MockSettings {
            true_claims: default_true(),
            false_claims: default_false(),
            plans: Vec::new(),
        }
    }
}

impl MockSettings {
    pub fn validate(&self) -> Result<(), String> {
        let check = |t: usize, f: usize| {
            if t > MAX_TRUE_CLAIMS || f > MAX_FALSE_CLAIMS {
                Err(format!(
                    "mock claim counts ({t} true, {f} false) exceed the synthetic banks ({MAX_TRUE_CLAIMS}, {MAX_FALSE_CLAIMS})"
                ))
            } else {
                Ok(())
            }
        };
        check(self.true_claims, self.false_claims)?;
        for p in &self.plans {
            check(p.true_claims, p.false_claims)?;
        }
        Ok(())
    }

    /// `(true_claims, false_claims, refuse)` for a unit.
    pub fn plan_for(&self, topic_id: &str, language: LanguageCode) -> (usize, usize, bool) {
        let exact = self
            .plans
            .iter()
            .find(|p| p.topic_id == topic_id && p.language == Some(language));
        let any = || {
            self.plans
                .iter()
                .find(|p| p.topic_id == topic_id && p.language.is_none())
        };
        match exact.or_else(any) {
            Some(p) => (p.true_claims, p.false_claims, p.refuse),
            None => (self.true_claims, self.false_claims, false),
        }
    }
}

pub struct MockTransport {
    settings: MockSettings,
    roster: Arc<Roster>,
    templates: Arc<TemplateRegistry>,
}

impl MockTransport {
    pub fn new(settings: MockSettings, roster: Arc<Roster>, templates: Arc<TemplateRegistry>) -> Self {
        MockTransport {
            settings,
            roster,
            templates,
        }
    }

    pub fn respond(&self, request: &CompletionRequest) -> Result<String, GatewayError> {
        let m = self
            .templates
            .parse(&request.prompt)
            .ok_or_else(|| GatewayError::InvalidResponse("mock backend does not recognize this prompt".into()))?;
        Ok(match m.template_id {
            TemplateId::Biography => {
                let Some(topic) = self.roster.find_by_name(m.language, m.get("name")) else {
                    return Ok(MOCK_REFUSAL.to_string());
                };
                let (t, f, refuse) = self.settings.plan_for(&topic.id, m.language);
                if refuse {
                    MOCK_REFUSAL.to_string()
                } else {
                    synthetic::biography(topic, m.language, t, f, request.seed)
                }
            }
            TemplateId::Translate => m.get("text").to_string(),
            TemplateId::Decompose => split_sentences(m.get("sentence"))
                .into_iter()
                .map(|s| format!("- {s}"))
                .collect::<Vec<_>>()
                .join("\n"),
            TemplateId::Verify => {
                if m.get("evidence").contains(m.get("fact")) {
                    "Supported".to_string()
                } else {
                    "Not Supported".to_string()
                }
            }
        })
    }
}

impl Transport for MockTransport {
    fn send(&self, _model_id: &str, request: &CompletionRequest) -> Result<String, GatewayError> {
        self.respond(request)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mock(settings: MockSettings) -> (MockTransport, Arc<TemplateRegistry>) {
        let templates = Arc::new(TemplateRegistry::bundled());
        (
            MockTransport::new(settings, Arc::new(Roster::bundled()), templates.clone()),
            templates,
        )
    }

    fn req(prompt: String, seed: u64) -> CompletionRequest {
        CompletionRequest {
            prompt,
            temperature: 1.0,
            max_tokens: 100,
            seed,
        }
    }

    #[test]
    fn verify_answers_by_verbatim_containment() {
        let (m, t) = mock(MockSettings::default());
        let p = t
            .render(
                TemplateId::Verify,
                LanguageCode::En,
                &[
                    ("topic", "X"),
                    ("evidence", "Title: X\nText: X was born in Y."),
                    ("fact", "X was born in Y."),
                ],
            )
            .unwrap();
        assert_eq!(m.respond(&req(p, 0)).unwrap(), "Supported");
        let p = t
            .render(
                TemplateId::Verify,
                LanguageCode::En,
                &[
                    ("topic", "X"),
                    ("evidence", "Title: X\nText: X was born in Y."),
                    ("fact", "X was born in Z."),
                ],
            )
            .unwrap();
        assert_eq!(m.respond(&req(p, 0)).unwrap(), "Not Supported");
    }

    #[test]
    fn translate_echoes() {
        let (m, t) = mock(MockSettings::default());
        let p = t
            .render(
                TemplateId::Translate,
                LanguageCode::Ko,
                &[("text", "박근혜는 대통령이었다.\n둘째 줄")],
            )
            .unwrap();
        assert_eq!(m.respond(&req(p, 0)).unwrap(), "박근혜는 대통령이었다.\n둘째 줄");
    }

    #[test]
    fn decompose_one_fact_per_sentence() {
        let (m, t) = mock(MockSettings::default());
        let p = t
            .render(
                TemplateId::Decompose,
                LanguageCode::En,
                &[("sentence", "Alice is tall. Carol is short.")],
            )
            .unwrap();
        assert_eq!(m.respond(&req(p, 0)).unwrap(), "- Alice is tall.\n- Carol is short.");
    }

    #[test]
    fn biography_follows_plan_and_seed() {
        let settings = MockSettings {
            plans: vec![
                ClaimPlan {
                    topic_id: "south-korea".into(),
                    language: Some(LanguageCode::Ko),
                    true_claims: 0,
                    false_claims: 0,
                    refuse: true,
                },
                ClaimPlan {
                    topic_id: "south-korea".into(),
                    language: None,
                    true_claims: 4,
                    false_claims: 1,
                    refuse: false,
                },
            ],
            ..MockSettings::default()
        };
        let (m, t) = mock(settings);
        let ko = t
            .render(TemplateId::Biography, LanguageCode::Ko, &[("name", "박근혜")])
            .unwrap();
        assert_eq!(m.respond(&req(ko, 1)).unwrap(), MOCK_REFUSAL);

        let en = t
            .render(TemplateId::Biography, LanguageCode::En, &[("name", "Park Geun-hye")])
            .unwrap();
        let a = m.respond(&req(en.clone(), 5)).unwrap();
        assert_eq!(a, m.respond(&req(en, 5)).unwrap());
        assert_eq!(split_sentences(&a).len(), 5);

        let unknown = t
            .render(TemplateId::Biography, LanguageCode::En, &[("name", "Nobody Known")])
            .unwrap();
        assert_eq!(m.respond(&req(unknown, 0)).unwrap(), MOCK_REFUSAL);
    }

    #[test]
    fn plan_lookup_and_validation() {
        let s = MockSettings::default();
        assert_eq!(s.plan_for("japan", LanguageCode::En), (3, 2, false));
        let bad = MockSettings {
            true_claims: MAX_TRUE_CLAIMS + 1,
            ..MockSettings::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn unrecognized_prompt_is_an_error() {
        let (m, _) = mock(MockSettings::default());
        assert!(m.respond(&req("hello".into(), 0)).is_err());
    }
}
