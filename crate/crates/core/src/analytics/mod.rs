//! Aggregates over evaluation records: per-language and per-continent
//! statistics, top-K continental counts, subregion breakdowns, cross-language
//! correlation, heatmap rows and score-set error.
//!
//! Every function is pure. Only records with a defined score enter a mean;
//! means are macro averages over biographies, and standard deviations use the
//! population denominator.

mod report;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use report::{read_heatmap, write_reports, ReportError, ReportOutcome, REPORT_FILES, STD_CONVENTION};

use crate::pipeline::EvaluationRecord;
use crate::roster::Roster;
use crate::types::{Continent, LanguageCode, Topic};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum AnalyticsError {
    #[error("{language}: top-{k} needs {k} scored biographies, only {available} available")]
    InsufficientData {
        language: LanguageCode,
        k: usize,
        available: usize,
    },
    #[error("correlation undefined for {0} and {1}: fewer than two shared scores or zero variance")]
    DegeneratePair(LanguageCode, LanguageCode),
    #[error("score sets share no ids")]
    NoOverlap,
    #[error("zero-variance or too-short vectors")]
    Degenerate,
}

/// Mean, population standard deviation and count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStat {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl SummaryStat {
    /// `None` for an empty slice.
    pub fn of(values: &[f64]) -> Option<SummaryStat> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(SummaryStat {
            mean,
            std: var.sqrt(),
            n: values.len(),
        })
    }
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Records with a defined score for `language`.
fn scored(evals: &[EvaluationRecord], language: LanguageCode) -> impl Iterator<Item = (&EvaluationRecord, f64)> {
    evals
        .iter()
        .filter(move |e| e.language == language)
        .filter_map(|e| e.score.map(|s| (e, s)))
}

fn topic_index(roster: &Roster) -> HashMap<&str, &Topic> {
    roster.topics().iter().map(|t| (t.id.as_str(), t)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageSummary {
    /// Over defined scores; `None` when there are none.
    pub score: Option<SummaryStat>,
    /// Units of this language without a defined score.
    pub excluded_n: usize,
    pub refusals: usize,
    pub failures: usize,
    pub mean_correct: Option<f64>,
    pub mean_hallucinated: Option<f64>,
}

/// Per-language statistics over country scores.
pub fn language_summary(evals: &[EvaluationRecord]) -> BTreeMap<LanguageCode, LanguageSummary> {
    let mut out = BTreeMap::new();
    for language in LanguageCode::ALL {
        let units: Vec<&EvaluationRecord> = evals.iter().filter(|e| e.language == language).collect();
        if units.is_empty() {
            continue;
        }
        let with_score: Vec<(&EvaluationRecord, f64)> = scored(evals, language).collect();
        let scores: Vec<f64> = with_score.iter().map(|(_, s)| *s).collect();
        out.insert(
            language,
            LanguageSummary {
                score: SummaryStat::of(&scores),
                excluded_n: units.len() - scores.len(),
                refusals: units.iter().filter(|e| e.refusal).count(),
                failures: units
                    .iter()
                    .filter(|e| e.status == crate::pipeline::UnitStatus::Failed)
                    .count(),
                mean_correct: mean(with_score.iter().map(|(e, _)| e.n_correct as f64)),
                mean_hallucinated: mean(with_score.iter().map(|(e, _)| e.n_hallucinated as f64)),
            },
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinentRow {
    /// Mean score per continent; continents without scores are absent.
    pub by_continent: BTreeMap<Continent, f64>,
    /// Over all countries of the language, not over the continent means.
    pub overall: Option<SummaryStat>,
}

/// Mean score per (language, continent) plus the row statistics.
pub fn continent_table(evals: &[EvaluationRecord], roster: &Roster) -> BTreeMap<LanguageCode, ContinentRow> {
    let topics = topic_index(roster);
    let mut out = BTreeMap::new();
    for language in LanguageCode::ALL {
        let rows: Vec<(Continent, f64)> = scored(evals, language)
            .filter_map(|(e, s)| topics.get(e.topic_id.as_str()).map(|t| (t.geo.continent, s)))
            .collect();
        if !evals.iter().any(|e| e.language == language) {
            continue;
        }
        let by_continent = Continent::ALL
            .into_iter()
            .filter_map(|c| mean(rows.iter().filter(|(rc, _)| *rc == c).map(|(_, s)| *s)).map(|m| (c, m)))
            .collect();
        let scores: Vec<f64> = rows.iter().map(|(_, s)| *s).collect();
        out.insert(
            language,
            ContinentRow {
                by_continent,
                overall: SummaryStat::of(&scores),
            },
        );
    }
    out
}

/// Continent counts among the `k` best-scoring countries for `language`.
/// Ties go to the smaller topic id. Continents with no country in the top
/// `k` are absent.
pub fn topk_continent_distribution(
    evals: &[EvaluationRecord],
    roster: &Roster,
    language: LanguageCode,
    k: usize,
) -> Result<BTreeMap<Continent, usize>, AnalyticsError> {
    let topics = topic_index(roster);
    let mut ranked: Vec<(&str, f64, Continent)> = scored(evals, language)
        .filter_map(|(e, s)| {
            topics
                .get(e.topic_id.as_str())
                .map(|t| (e.topic_id.as_str(), s, t.geo.continent))
        })
        .collect();
    if ranked.len() < k {
        return Err(AnalyticsError::InsufficientData {
            language,
            k,
            available: ranked.len(),
        });
    }
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let mut counts = BTreeMap::new();
    for (_, _, c) in ranked.into_iter().take(k) {
        *counts.entry(c).or_insert(0) += 1;
    }
    Ok(counts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubregionStat {
    pub continent: Continent,
    /// Scored biographies in the subregion.
    pub n: usize,
    pub mean_correct: f64,
    pub mean_hallucinated: f64,
    pub mean_score: f64,
}

/// Subregions with only one country in the roster are left out.
pub fn singleton_subregions(roster: &Roster) -> Vec<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for t in roster.topics() {
        *counts.entry(t.geo.subregion.as_str()).or_insert(0) += 1;
    }
    counts
        .into_iter()
        .filter(|(_, n)| *n == 1)
        .map(|(s, _)| s.to_string())
        .collect()
}

/// Mean fact counts and score per subregion for `language`, excluding
/// subregions that hold a single roster country.
type ScoredRecord<'a> = (&'a EvaluationRecord, f64);

pub fn subregion_breakdown(
    evals: &[EvaluationRecord],
    roster: &Roster,
    language: LanguageCode,
) -> BTreeMap<String, SubregionStat> {
    let topics = topic_index(roster);
    let excluded = singleton_subregions(roster);
    let mut groups: BTreeMap<&str, (Continent, Vec<ScoredRecord>)> = BTreeMap::new();
    for (e, s) in scored(evals, language) {
        let Some(t) = topics.get(e.topic_id.as_str()) else {
            continue;
        };
        if excluded.contains(&t.geo.subregion) {
            continue;
        }
        groups
            .entry(t.geo.subregion.as_str())
            .or_insert_with(|| (t.geo.continent, Vec::new()))
            .1
            .push((e, s));
    }
    groups
        .into_iter()
        .map(|(name, (continent, rows))| {
            let n = rows.len() as f64;
            let stat = SubregionStat {
                continent,
                n: rows.len(),
                mean_correct: rows.iter().map(|(e, _)| e.n_correct as f64).sum::<f64>() / n,
                mean_hallucinated: rows.iter().map(|(e, _)| e.n_hallucinated as f64).sum::<f64>() / n,
                mean_score: rows.iter().map(|(_, s)| s).sum::<f64>() / n,
            };
            (name.to_string(), stat)
        })
        .collect()
}

/// Pearson's r, clamped to [-1, 1].
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, AnalyticsError> {
    assert_eq!(x.len(), y.len(), "pearson needs aligned vectors");
    if x.len() < 2 {
        return Err(AnalyticsError::Degenerate);
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(AnalyticsError::Degenerate);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub languages: Vec<LanguageCode>,
    /// `r[i][j]`, `None` for degenerate pairs. The diagonal is 1.0.
    pub r: Vec<Vec<Option<f64>>>,
    /// Countries scored in both languages.
    pub n: Vec<Vec<usize>>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: LanguageCode, b: LanguageCode) -> Option<f64> {
        self.r[a.index()][b.index()]
    }

    pub fn pair_n(&self, a: LanguageCode, b: LanguageCode) -> usize {
        self.n[a.index()][b.index()]
    }

    /// The degenerate off-diagonal pairs, each once.
    pub fn degenerate_pairs(&self) -> Vec<AnalyticsError> {
        let mut out = Vec::new();
        for (i, a) in self.languages.iter().enumerate() {
            for (j, b) in self.languages.iter().enumerate().skip(i + 1) {
                if self.r[i][j].is_none() {
                    out.push(AnalyticsError::DegeneratePair(*a, *b));
                }
            }
        }
        out
    }
}

/// Pearson correlation between the per-country score vectors of every pair
/// of the nine languages, using countries scored in both (pairwise deletion).
pub fn correlation_matrix(evals: &[EvaluationRecord]) -> CorrelationMatrix {
    let mut by_lang: Vec<BTreeMap<&str, f64>> = vec![BTreeMap::new(); LanguageCode::ALL.len()];
    for e in evals {
        if let Some(s) = e.score {
            by_lang[e.language.index()].insert(e.topic_id.as_str(), s);
        }
    }
    let k = LanguageCode::ALL.len();
    let mut r = vec![vec![None; k]; k];
    let mut n = vec![vec![0; k]; k];
    for i in 0..k {
        r[i][i] = Some(1.0);
        n[i][i] = by_lang[i].len();
        for j in (i + 1)..k {
            let (x, y): (Vec<f64>, Vec<f64>) = by_lang[i]
                .iter()
                .filter_map(|(id, a)| by_lang[j].get(id).map(|b| (*a, *b)))
                .unzip();
            let v = pearson(&x, &y).ok();
            r[i][j] = v;
            r[j][i] = v;
            n[i][j] = x.len();
            n[j][i] = x.len();
        }
    }
    CorrelationMatrix {
        languages: LanguageCode::ALL.to_vec(),
        r,
        n,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapRow {
    pub topic_id: String,
    pub country: String,
    pub iso_code: String,
    pub score: Option<f64>,
}

/// One row per roster country, in roster order.
pub fn heatmap_export(evals: &[EvaluationRecord], roster: &Roster, language: LanguageCode) -> Vec<HeatmapRow> {
    let scores: HashMap<&str, Option<f64>> = evals
        .iter()
        .filter(|e| e.language == language)
        .map(|e| (e.topic_id.as_str(), e.score))
        .collect();
    roster
        .topics()
        .iter()
        .map(|t| HeatmapRow {
            topic_id: t.id.clone(),
            country: t.country.clone(),
            iso_code: t.iso_code.clone(),
            score: scores.get(t.id.as_str()).copied().flatten(),
        })
        .collect()
}

/// Mean and population standard deviation of `system - reference` over the
/// ids present in both.
pub fn score_set_error(
    system: &BTreeMap<String, f64>,
    reference: &BTreeMap<String, f64>,
) -> Result<(f64, f64), AnalyticsError> {
    let diffs: Vec<f64> = system
        .iter()
        .filter_map(|(id, a)| reference.get(id).map(|b| a - b))
        .collect();
    let stat = SummaryStat::of(&diffs).ok_or(AnalyticsError::NoOverlap)?;
    Ok((stat.mean, stat.std))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::UnitStatus;

    fn rec(topic: &str, language: LanguageCode, score: Option<f64>, correct: usize, wrong: usize) -> EvaluationRecord {
        EvaluationRecord {
            topic_id: topic.into(),
            language,
            status: UnitStatus::Ok,
            score,
            n_correct: correct,
            n_hallucinated: wrong,
            n_facts: correct + wrong,
            refusal: score.is_none(),
            empty: false,
            error: None,
        }
    }

    #[test]
    fn summary_stat_uses_population_std() {
        let s = SummaryStat::of(&[0.5, 0.5, 0.5]).unwrap();
        assert_eq!((s.mean, s.std, s.n), (0.5, 0.0, 3));
        let s = SummaryStat::of(&[0.0, 1.0]).unwrap();
        assert_eq!((s.mean, s.std), (0.5, 0.5));
        assert!(SummaryStat::of(&[]).is_none());
    }

    #[test]
    fn language_summary_excludes_undefined() {
        use LanguageCode::*;
        let evals = vec![
            rec("japan", Ko, Some(0.0), 0, 2),
            rec("china", Ko, Some(1.0), 4, 0),
            rec("india", Ko, None, 0, 0),
            rec("japan", En, None, 0, 0),
        ];
        let s = language_summary(&evals);
        let ko = &s[&Ko];
        assert_eq!(ko.score.unwrap().mean, 0.5);
        assert_eq!(ko.excluded_n, 1);
        assert_eq!(ko.refusals, 1);
        assert_eq!(ko.mean_correct, Some(2.0));
        assert_eq!(ko.mean_hallucinated, Some(1.0));
        assert!(s[&En].score.is_none());
        assert!(!s.contains_key(&De));
    }

    #[test]
    fn subregion_means_and_exclusion() {
        use LanguageCode::*;
        let roster = Roster::bundled();
        let evals = vec![
            rec("japan", En, Some(0.5), 2, 2),
            rec("china", En, Some(1.0), 4, 0),
            rec("south-africa", En, Some(1.0), 5, 0),
            rec("uzbekistan", En, Some(1.0), 5, 0),
        ];
        let b = subregion_breakdown(&evals, &roster, En);
        assert_eq!(b["Eastern Asia"].mean_correct, 3.0);
        assert_eq!(b["Eastern Asia"].mean_score, 0.75);
        assert!(!b.contains_key("Southern Africa"));
        assert!(!b.contains_key("Central Asia"));
        assert_eq!(singleton_subregions(&roster), vec!["Central Asia", "Southern Africa"]);
        assert!(subregion_breakdown(&[], &roster, En).is_empty());
    }

    #[test]
    fn pearson_perfect_lines() {
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]), Ok(1.0));
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Ok(-1.0));
        assert_eq!(pearson(&[1.0, 1.0], &[2.0, 3.0]), Err(AnalyticsError::Degenerate));
        assert_eq!(pearson(&[1.0], &[2.0]), Err(AnalyticsError::Degenerate));
    }

    #[test]
    fn heatmap_has_a_row_per_country() {
        let roster = Roster::bundled();
        let evals = vec![
            rec("japan", LanguageCode::Ko, None, 0, 0),
            rec("china", LanguageCode::Ko, Some(0.25), 1, 3),
        ];
        let rows = heatmap_export(&evals, &roster, LanguageCode::Ko);
        assert_eq!(rows.len(), 80);
        assert_eq!(rows.iter().find(|r| r.topic_id == "japan").unwrap().score, None);
        assert_eq!(rows.iter().find(|r| r.topic_id == "china").unwrap().score, Some(0.25));
    }

    #[test]
    fn score_set_error_orientation() {
        let a: BTreeMap<String, f64> = [("x".to_string(), 0.2), ("y".to_string(), 0.7)].into();
        assert_eq!(score_set_error(&a, &a), Ok((0.0, 0.0)));
        let b: BTreeMap<String, f64> = a.iter().map(|(k, v)| (k.clone(), v + 0.1)).collect();
        let (m, s) = score_set_error(&a, &b).unwrap();
        assert!((m + 0.1).abs() < 1e-12 && s < 1e-12);
        assert_eq!(score_set_error(&a, &BTreeMap::new()), Err(AnalyticsError::NoOverlap));
    }
}
