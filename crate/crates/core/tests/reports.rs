mod common;

use common::*;
use geofact_core::analytics::*;
use geofact_core::pipeline::*;
use geofact_core::LanguageCode;
use sha2::{Digest, Sha256};

fn finished_run(dir: &std::path::Path) -> std::path::PathBuf {
    let pipeline = Pipeline::from_config(mock_config(dir)).unwrap();
    let run = dir.join("run");
    run_evaluation(&pipeline, &run, &RunOptions::default(), &mut |_| {}).unwrap();
    run
}

#[test]
fn writes_six_files_tagged_with_manifest_hash() {
    let dir = tempfile::tempdir().unwrap();
    let run = finished_run(dir.path());
    let out = dir.path().join("reports");
    let outcome = write_reports(&run, &out, 2).unwrap();
    assert!(outcome.insufficient.is_empty());
    assert_eq!(outcome.files.len(), 6);
    let sha = hex::encode(Sha256::digest(std::fs::read(run.join(MANIFEST_FILE)).unwrap()));
    assert_eq!(outcome.manifest_sha256, sha);
    for name in REPORT_FILES {
        let text = std::fs::read_to_string(out.join(name)).unwrap();
        if name.ends_with(".csv") {
            let mut lines = text.lines();
            assert_eq!(
                lines.next(),
                Some(format!("# manifest_sha256={sha}").as_str()),
                "{name}"
            );
            assert_eq!(lines.next(), Some(format!("# {STD_CONVENTION}").as_str()), "{name}");
        } else {
            let v: serde_json::Value = serde_json::from_str(&text).unwrap();
            assert_eq!(v["manifest_sha256"], sha.as_str(), "{name}");
            assert_eq!(v["std_convention"], STD_CONVENTION, "{name}");
        }
    }

    let summary = std::fs::read_to_string(out.join("language_summary.csv")).unwrap();
    let en = summary.lines().find(|l| l.starts_with("en,")).unwrap();
    let fields: Vec<&str> = en.split(',').collect();
    // japan 3/5, kenya 5/5, brazil 1/4, germany 2/4
    let scores = [0.6, 1.0, 0.25, 0.5];
    let mean = scores.iter().sum::<f64>() / 4.0;
    assert_eq!(fields[1], "4");
    assert!((fields[5].parse::<f64>().unwrap() - mean).abs() < 1e-12);
}

#[test]
fn rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = finished_run(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    write_reports(&run, &a, 3).unwrap();
    write_reports(&run, &b, 3).unwrap();
    for name in REPORT_FILES {
        assert_eq!(
            std::fs::read(a.join(name)).unwrap(),
            std::fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn oversized_k_reports_insufficient_data_per_language() {
    let dir = tempfile::tempdir().unwrap();
    let run = finished_run(dir.path());
    let out = dir.path().join("reports");
    let outcome = write_reports(&run, &out, 200).unwrap();
    assert_eq!(outcome.insufficient.len(), GRID_LANGUAGES.len());
    for e in &outcome.insufficient {
        assert!(
            matches!(
                e,
                AnalyticsError::InsufficientData {
                    k: 200,
                    available: 4,
                    ..
                }
            ),
            "{e:?}"
        );
    }
    for name in REPORT_FILES {
        assert!(out.join(name).is_file(), "{name}");
    }
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("topk_distribution.json")).unwrap()).unwrap();
    for lang in GRID_LANGUAGES {
        assert!(v["languages"][lang.as_str()]["error"].is_string());
    }
}

#[test]
fn heatmap_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let run = finished_run(dir.path());
    let out = dir.path().join("reports");
    write_reports(&run, &out, 2).unwrap();
    let parsed = read_heatmap(&out.join("heatmap.json")).unwrap();
    let evals = read_evaluations(&run.join(EVALUATIONS_FILE)).unwrap();
    let roster = read_manifest(&run).unwrap().roster().unwrap();
    for lang in GRID_LANGUAGES {
        assert_eq!(parsed[lang.as_str()], heatmap_export(&evals, &roster, lang));
    }
    let japan = parsed["en"].iter().find(|r| r.topic_id == "japan").unwrap();
    assert_eq!((japan.iso_code.as_str(), japan.score), ("JPN", Some(0.6)));
    assert!(!parsed.contains_key(LanguageCode::De.as_str()));
}

#[test]
fn missing_inputs_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        write_reports(dir.path(), &dir.path().join("o"), 20),
        Err(ReportError::MissingInput(_))
    ));
    assert!(!dir.path().join("o").exists());
}
