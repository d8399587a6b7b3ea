use chrono::Utc;

use super::StageError;
use crate::config::{Ensemble, RefusalConfig};
use crate::gateway::{CompletionRequest, Gateway, TemplateId, TemplateRegistry};
use crate::knowledge::{retrieve, RetrievalIndex};
use crate::text::{content_tokens, normalize, split_sentences};
use crate::types::{AtomicFact, GenerationRecord, Label, LanguageCode, Topic, TranslationRecord, Verdict};

/// Model id recorded for English generations, which are not translated.
pub const IDENTITY_TRANSLATOR: &str = "identity";

/// Sampling settings shared by one call site.
#[derive(Debug, Clone, Copy)]
pub struct Sampling {
    pub temperature: f64,
    pub seed: u64,
}

fn call(gateway: &Gateway, prompt: String, sampling: Sampling) -> Result<String, StageError> {
    let request = CompletionRequest {
        prompt,
        temperature: sampling.temperature,
        max_tokens: gateway.spec().max_tokens,
        seed: sampling.seed,
    };
    Ok(gateway.complete(&request)?.text)
}

pub fn generate_biography(
    topic: &Topic,
    language: LanguageCode,
    gateway: &Gateway,
    templates: &TemplateRegistry,
    sampling: Sampling,
    refusal: &RefusalConfig,
) -> Result<GenerationRecord, StageError> {
    let prompt = templates.render(TemplateId::Biography, language, &[("name", topic.name_in(language))])?;
    let text = call(gateway, prompt, sampling)?;
    Ok(GenerationRecord {
        topic_id: topic.id.clone(),
        language,
        refusal: detect_refusal(&text, language, refusal),
        text,
        model_id: gateway.model_id().to_string(),
        temperature: sampling.temperature,
        created_at: Utc::now(),
    })
}

/// True when `text` is shorter than the configured minimum or contains a
/// refusal marker for `language` or for English.
pub fn detect_refusal(text: &str, language: LanguageCode, config: &RefusalConfig) -> bool {
    if text.trim().chars().count() < config.min_chars {
        return true;
    }
    let haystack = normalize(text);
    let mut languages = vec![LanguageCode::En];
    if language != LanguageCode::En {
        languages.push(language);
    }
    languages
        .iter()
        .filter_map(|l| config.markers.get(l))
        .flatten()
        .any(|m| !m.trim().is_empty() && haystack.contains(&normalize(m)))
}

/// English text for a generation: the text itself for English, otherwise one
/// translation call over the whole text.
pub fn translate_to_english(
    record: &GenerationRecord,
    gateway: &Gateway,
    templates: &TemplateRegistry,
    sampling: Sampling,
) -> Result<TranslationRecord, StageError> {
    if record.refusal {
        return Err(StageError::SkippedRefusal);
    }
    let (english_text, translator_model_id) = if record.language == LanguageCode::En {
        (record.text.clone(), IDENTITY_TRANSLATOR.to_string())
    } else {
        let prompt = templates.render(TemplateId::Translate, record.language, &[("text", &record.text)])?;
        (
            call(gateway, prompt, sampling)?.trim().to_string(),
            gateway.model_id().to_string(),
        )
    };
    Ok(TranslationRecord {
        topic_id: record.topic_id.clone(),
        source_language: record.language,
        english_text,
        translator_model_id,
    })
}

/// Facts listed in a decomposition reply. When any line is bulleted only the
/// bulleted lines count, which drops preambles such as "Facts:".
pub fn parse_fact_lines(reply: &str) -> Vec<String> {
    fn strip_bullet(line: &str) -> Option<&str> {
        for marker in ["- ", "* ", "• "] {
            if let Some(rest) = line.strip_prefix(marker) {
                return Some(rest);
            }
        }
        let digits = line.len() - line.trim_start_matches(|c: char| c.is_ascii_digit()).len();
        if digits > 0 {
            let rest = &line[digits..];
            if let Some(r) = rest.strip_prefix(". ").or_else(|| rest.strip_prefix(") ")) {
                return Some(r);
            }
        }
        None
    }
    let lines: Vec<&str> = reply.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    let bulleted: Vec<&str> = lines.iter().filter_map(|l| strip_bullet(l)).collect();
    let chosen = if bulleted.is_empty() { lines } else { bulleted };
    chosen
        .into_iter()
        .map(|l| l.trim().to_string())
        .filter(|l| !l.is_empty())
        .collect()
}

/// Splits `english_text` into sentences and decomposes each one with its own
/// call. Fact ids run from 0 across the whole text.
pub fn decompose(
    english_text: &str,
    gateway: &Gateway,
    templates: &TemplateRegistry,
    sampling: Sampling,
) -> Result<Vec<AtomicFact>, StageError> {
    if english_text.trim().is_empty() {
        return Err(StageError::EmptyText);
    }
    let mut facts = Vec::new();
    for (index, sentence) in split_sentences(english_text).iter().enumerate() {
        let prompt = templates.render(TemplateId::Decompose, LanguageCode::En, &[("sentence", sentence)])?;
        for text in parse_fact_lines(&call(gateway, prompt, sampling)?) {
            facts.push(AtomicFact {
                fact_id: facts.len(),
                text,
                source_sentence_index: index,
            });
        }
    }
    Ok(facts)
}

/// Reads a judge reply. The earliest positive or negative cue wins; a reply
/// with neither counts as not supported.
pub fn parse_judgement(reply: &str) -> bool {
    let r = reply.to_lowercase();
    let first = |cues: &[&str]| cues.iter().filter_map(|c| r.find(c)).min();
    match (
        first(&["true", "supported"]),
        first(&["false", "not supported", "unsupported"]),
    ) {
        (Some(p), Some(n)) => p < n,
        (Some(_), None) => true,
        _ => false,
    }
}

/// Share of the fact's distinct content tokens that also occur in `passage`.
/// Zero when the fact has no content tokens.
pub fn lexical_support(fact: &str, passage: &str) -> f64 {
    let mut fact_tokens = content_tokens(fact);
    fact_tokens.sort_unstable();
    fact_tokens.dedup();
    if fact_tokens.is_empty() {
        return 0.0;
    }
    let passage_tokens: std::collections::HashSet<String> = content_tokens(passage).into_iter().collect();
    let hits = fact_tokens.iter().filter(|t| passage_tokens.contains(*t)).count();
    hits as f64 / fact_tokens.len() as f64
}

/// The ensemble rule.
pub fn decide_label(judge_supported: bool, lexical_score: f64, npm_threshold: f64, ensemble: Ensemble) -> Label {
    let supported = match ensemble {
        Ensemble::JudgeOnly => judge_supported,
        Ensemble::Conjunction => judge_supported && lexical_score >= npm_threshold,
    };
    if supported {
        Label::Supported
    } else {
        Label::NotSupported
    }
}

#[derive(Debug, Clone, Copy)]
pub struct VerifySettings {
    pub top_k: usize,
    pub npm_threshold: f64,
    pub ensemble: Ensemble,
    pub sampling: Sampling,
}

pub fn format_evidence(index: &RetrievalIndex, hits: &[crate::types::PassageId]) -> String {
    hits.iter()
        .filter_map(|id| index.passage(id))
        .map(|p| format!("Title: {}\nText: {}", p.passage_id.title, p.text))
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Retrieves evidence for `fact`, asks the judge, and gates the answer on the
/// lexical score of the best-matching retrieved passage.
pub fn verify_fact(
    fact: &AtomicFact,
    topic: &Topic,
    index: &RetrievalIndex,
    gateway: &Gateway,
    templates: &TemplateRegistry,
    settings: &VerifySettings,
) -> Result<Verdict, StageError> {
    let hits: Vec<_> = retrieve(index, &fact.text, settings.top_k)?
        .into_iter()
        .map(|(id, _)| id)
        .collect();
    let evidence = format_evidence(index, &hits);
    let prompt = templates.render(
        TemplateId::Verify,
        LanguageCode::En,
        &[
            ("topic", &topic.leader_name),
            ("evidence", &evidence),
            ("fact", &fact.text),
        ],
    )?;
    let judge_supported = parse_judgement(&call(gateway, prompt, settings.sampling)?);
    let lexical_score = hits
        .iter()
        .filter_map(|id| index.passage(id))
        .map(|p| lexical_support(&fact.text, &p.text))
        .fold(0.0, f64::max);
    Ok(Verdict {
        fact_id: fact.fact_id,
        label: decide_label(
            judge_supported,
            lexical_score,
            settings.npm_threshold,
            settings.ensemble,
        ),
        judge_score: if judge_supported { 1.0 } else { 0.0 },
        lexical_score,
        evidence_passage_ids: hits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refusal_rules() {
        let cfg = RefusalConfig::default();
        assert!(detect_refusal("", LanguageCode::En, &cfg));
        assert!(detect_refusal(
            "I'm sorry, but there is no famous person by that name.",
            LanguageCode::Ko,
            &cfg
        ));
        assert!(detect_refusal(
            "죄송합니다. 해당 인물에 대한 정보가 없습니다.",
            LanguageCode::Ko,
            &cfg
        ));
        let long = "Angela Merkel is a German politician who served as chancellor. ".repeat(60);
        assert!(!detect_refusal(&long, LanguageCode::En, &cfg));
    }

    #[test]
    fn fact_lines() {
        assert_eq!(
            parse_fact_lines("Facts:\n- A was born.\n- B died.\n"),
            vec!["A was born.", "B died."]
        );
        assert_eq!(parse_fact_lines("1. One.\n2) Two."), vec!["One.", "Two."]);
        assert_eq!(parse_fact_lines("Plain fact."), vec!["Plain fact."]);
        assert!(parse_fact_lines("  \n").is_empty());
    }

    #[test]
    fn judgements() {
        assert!(parse_judgement("Supported"));
        assert!(parse_judgement("True"));
        assert!(!parse_judgement("Not Supported"));
        assert!(!parse_judgement("False. It is not true."));
        assert!(parse_judgement("True, although not supported elsewhere"));
        assert!(!parse_judgement("unclear"));
    }

    #[test]
    fn lexical_support_counts_distinct_content_tokens() {
        assert_eq!(
            lexical_support("Obama was born in Honolulu.", "Honolulu: Obama born there"),
            1.0
        );
        assert_eq!(
            lexical_support("Obama was born in Kenya.", "Obama was born in Honolulu"),
            2.0 / 3.0
        );
        assert_eq!(lexical_support("the of and", "anything"), 0.0);
        assert_eq!(lexical_support("Rowing medals.", "Obama"), 0.0);
    }
}
