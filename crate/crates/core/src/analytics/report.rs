use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::*;
use crate::pipeline::{read_evaluations, RunManifest, EVALUATIONS_FILE, MANIFEST_FILE};

pub const STD_CONVENTION: &str =
    "std uses the population denominator (n); row statistics pool countries rather than averaging continent means";

pub const REPORT_FILES: [&str; 6] = [
    "language_summary.csv",
    "continent_table.csv",
    "topk_distribution.json",
    "subregion_breakdown.csv",
    "correlation_matrix.csv",
    "heatmap.json",
];

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("missing input {0}")]
    MissingInput(PathBuf),
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
    #[error("cannot write {path}: {message}")]
    Io { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOutcome {
    pub files: Vec<PathBuf>,
    /// Languages whose top-K distribution could not be computed.
    pub insufficient: Vec<AnalyticsError>,
    pub manifest_sha256: String,
}

fn num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn header(out: &mut String, manifest_sha256: &str) {
    writeln!(out, "# manifest_sha256={manifest_sha256}").unwrap();
    writeln!(out, "# {STD_CONVENTION}").unwrap();
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Writes the six report files for the run in `run_dir` into `out_dir`.
/// A language with too few scores for the top-`k` distribution gets an
/// error entry in that file; every other report is still written.
pub fn write_reports(run_dir: &Path, out_dir: &Path, k: usize) -> Result<ReportOutcome, ReportError> {
    let manifest_path = run_dir.join(MANIFEST_FILE);
    let evals_path = run_dir.join(EVALUATIONS_FILE);
    for p in [&manifest_path, &evals_path] {
        if !p.is_file() {
            return Err(ReportError::MissingInput(p.clone()));
        }
    }
    let invalid = |path: &Path, e: &dyn std::fmt::Display| ReportError::Invalid {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let manifest_bytes = std::fs::read(&manifest_path).map_err(|e| invalid(&manifest_path, &e))?;
    let manifest: RunManifest = serde_json::from_slice(&manifest_bytes).map_err(|e| invalid(&manifest_path, &e))?;
    let roster = manifest.roster().map_err(|e| invalid(&manifest_path, &e))?;
    let evals = read_evaluations(&evals_path).map_err(|e| invalid(&evals_path, &e))?;
    let sha = hex::encode(Sha256::digest(&manifest_bytes));
    let languages = &manifest.languages;

    let mut contents: Vec<String> = Vec::new();

    let mut s = String::new();
    header(&mut s, &sha);
    s.push_str("language,n,excluded_n,refusals,failures,mean,std,mean_correct,mean_hallucinated\n");
    for (lang, row) in language_summary(&evals) {
        writeln!(
            s,
            "{lang},{},{},{},{},{},{},{},{}",
            row.score.map_or(0, |st| st.n),
            row.excluded_n,
            row.refusals,
            row.failures,
            num(row.score.map(|st| st.mean)),
            num(row.score.map(|st| st.std)),
            num(row.mean_correct),
            num(row.mean_hallucinated),
        )
        .unwrap();
    }
    contents.push(s);

    let mut s = String::new();
    header(&mut s, &sha);
    s.push_str("language,Africa,America,Asia,Europe,mean,std,n\n");
    for (lang, row) in continent_table(&evals, &roster) {
        let cells: Vec<String> = Continent::ALL
            .iter()
            .map(|c| num(row.by_continent.get(c).copied()))
            .collect();
        writeln!(
            s,
            "{lang},{},{},{},{}",
            cells.join(","),
            num(row.overall.map(|st| st.mean)),
            num(row.overall.map(|st| st.std)),
            row.overall.map_or(0, |st| st.n)
        )
        .unwrap();
    }
    contents.push(s);

    let mut insufficient = Vec::new();
    let mut dist = serde_json::Map::new();
    for &lang in languages {
        let entry = match topk_continent_distribution(&evals, &roster, lang, k) {
            Ok(counts) => json!({ "counts": counts }),
            Err(e) => {
                let v = json!({ "error": e.to_string() });
                insufficient.push(e);
                v
            }
        };
        dist.insert(lang.to_string(), entry);
    }
    contents.push(pretty(&json!({
        "manifest_sha256": sha,
        "std_convention": STD_CONVENTION,
        "k": k,
        "languages": dist,
    })));

    let mut s = String::new();
    header(&mut s, &sha);
    writeln!(
        s,
        "# excluded single-country subregions: {}",
        singleton_subregions(&roster).join("; ")
    )
    .unwrap();
    s.push_str("language,subregion,continent,n,mean_correct,mean_hallucinated,mean_score\n");
    for &lang in languages {
        for (name, st) in subregion_breakdown(&evals, &roster, lang) {
            writeln!(
                s,
                "{lang},{},{},{},{},{},{}",
                csv_field(&name),
                st.continent,
                st.n,
                st.mean_correct,
                st.mean_hallucinated,
                st.mean_score
            )
            .unwrap();
        }
    }
    contents.push(s);

    let matrix = correlation_matrix(&evals);
    let mut s = String::new();
    header(&mut s, &sha);
    s.push_str("language_a,language_b,r,n\n");
    for &a in languages {
        for &b in languages {
            writeln!(s, "{a},{b},{},{}", num(matrix.get(a, b)), matrix.pair_n(a, b)).unwrap();
        }
    }
    contents.push(s);

    let mut heat = serde_json::Map::new();
    for &lang in languages {
        heat.insert(
            lang.to_string(),
            serde_json::to_value(heatmap_export(&evals, &roster, lang)).expect("rows serialize"),
        );
    }
    contents.push(pretty(&json!({
        "manifest_sha256": sha,
        "std_convention": STD_CONVENTION,
        "languages": heat,
    })));

    std::fs::create_dir_all(out_dir).map_err(|e| ReportError::Io {
        path: out_dir.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut files = Vec::new();
    for (name, body) in REPORT_FILES.iter().zip(contents) {
        let path = out_dir.join(name);
        std::fs::write(&path, body).map_err(|e| ReportError::Io {
            path: path.clone(),
            message: e.to_string(),
        })?;
        files.push(path);
    }
    Ok(ReportOutcome {
        files,
        insufficient,
        manifest_sha256: sha,
    })
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json serializes");
    s.push('\n');
    s
}

/// Parses heatmap.json back into rows per language.
pub fn read_heatmap(path: &Path) -> Result<BTreeMap<String, Vec<HeatmapRow>>, ReportError> {
    let text = std::fs::read_to_string(path).map_err(|_| ReportError::MissingInput(path.to_path_buf()))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| ReportError::Invalid {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    serde_json::from_value(v["languages"].clone()).map_err(|e| ReportError::Invalid {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}
