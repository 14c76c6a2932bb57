//! Small grids end to end against the mock backend.

mod common;

use std::path::Path;

use common::*;
use reqgrid::runner::{self, audit, load_results, pivot_for_friedman, Config, FamilyFilter, Factor, Harness, Measure, RunLayout};
use reqgrid::{PatternId, Pipeline, TaskKind, VariationKind};

fn small_config() -> Config {
    let mut config = canonical_config();
    config.models.retain(|m| m.id == "bloom-mock" || m.id == "sbert-mock");
    config.grid.patterns = Some(vec![PatternId::ALL[0], PatternId::ALL[5]]);
    config.grid.variations = Some(vec![VariationKind::PunctStrip, VariationKind::LabelUpper]);
    config.grid.tasks = Some(vec!["Security".into(), "NFR-Top4".into()]);
    config
}

fn run(config: &Config, family: FamilyFilter, out: &Path, resume: bool) -> runner::RunOutcome {
    let harness = Harness::from_config(config.clone()).unwrap();
    runner::run(&harness, family, None, out, resume, |_, _, _| {}).unwrap()
}

#[test]
fn small_grid_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let outcome = run(&small_config(), FamilyFilter::All, dir.path(), false);
    assert_eq!(outcome.planned, 10);
    assert_eq!(outcome.results.len(), 10);

    for name in [
        "results.csv",
        "report.md",
        "timings.csv",
        "stats_friedman.csv",
        "stats_wilcoxon.csv",
        "summary_model.csv",
        "summary_pattern.csv",
        "summary_variation.csv",
        "summary_task.csv",
    ] {
        assert!(dir.path().join(name).is_file(), "{name} missing");
    }
    let report = std::fs::read_to_string(dir.path().join("report.md")).unwrap();
    assert!(report.contains("Planned settings: 10. Executed settings: 10 (8 inference, 2 embedding)."));

    let records = load_results(RunLayout::new(dir.path()).results_csv()).unwrap();
    assert_eq!(records.len(), 10);
    for r in records.iter().filter(|r| r.setting.task == "Security") {
        assert_eq!(r.n, 510);
        assert!(r.backend_calls >= 510);
    }

    let pivot = pivot_for_friedman(&records, Factor::Pattern, Measure::WeightedF1, TaskKind::Binary).unwrap();
    assert_eq!(pivot.levels.len(), 2);
    assert_eq!(pivot.blocks.len(), 2);

    let clean = audit(dir.path()).unwrap();
    assert!(clean.is_clean());
    assert_eq!(clean.checked, 30);
}

#[test]
fn audit_catches_a_tampered_value() {
    let dir = tempfile::tempdir().unwrap();
    run(&small_config(), FamilyFilter::Binary, dir.path(), false);
    let path = dir.path().join("results.csv");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let mut cells: Vec<String> = lines[1].split(',').map(str::to_string).collect();
    let v: f64 = cells[8].parse().unwrap();
    cells[8] = format!("{:?}", v + 1e-12);
    lines[1] = cells.join(",");
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();
    let report = audit(dir.path()).unwrap();
    assert_eq!(report.mismatches.len(), 1, "{:?}", report.mismatches);
}

#[test]
fn family_and_pipeline_filters() {
    let config = small_config();
    let harness = Harness::from_config(config).unwrap();
    let binary = harness.plan(FamilyFilter::Binary, None).unwrap();
    assert_eq!(binary.len(), 5);
    assert!(binary.iter().all(|s| s.task == "Security"));
    let embedding = harness.plan(FamilyFilter::All, Some(Pipeline::Embedding)).unwrap();
    assert_eq!(embedding.len(), 2);
    assert!(embedding.iter().all(|s| s.pattern.is_none() && s.variation.is_none()));
}

#[test]
fn resume_of_a_finished_run_changes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config();
    run(&config, FamilyFilter::All, dir.path(), false);
    let before = std::fs::read(dir.path().join("results.csv")).unwrap();
    let again = run(&config, FamilyFilter::All, dir.path(), true);
    assert!(again.results.iter().all(|r| r.wall_time.is_zero()));
    assert_eq!(std::fs::read(dir.path().join("results.csv")).unwrap(), before);
}

#[test]
fn interrupted_run_resumes_to_the_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config();
    run(&config, FamilyFilter::All, &dir.path().join("clean"), false);
    let (_, partials) = run_interrupted(&config, &dir.path().join("resumed"), "bloom-mock", 1500).unwrap();
    assert_eq!(partials, 1);
    for name in ["results.csv", "stats_friedman.csv", "stats_wilcoxon.csv", "summary_model.csv"] {
        assert_eq!(
            std::fs::read(dir.path().join("clean").join(name)).unwrap(),
            std::fs::read(dir.path().join("resumed").join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn config_round_trips_through_toml_file() {
    let config = canonical_config();
    let text = std::fs::read_to_string(workspace_root().join("configs/canonical.toml")).unwrap();
    let parsed = Config::parse(&text).unwrap();
    assert_eq!(parsed.models, config.models);
    assert!(Config::parse("unknown_key = 1").is_err());
}
