//! Factor summaries, significance tests and the files written for a run.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::compare::{best_setting, compare_records, write_comparisons, Comparison};
use super::exec::RunLayout;
use super::predictions::fmt_f64;
use super::summary::{pivot_for_friedman, summarize_pivot, write_results, write_summaries, Factor, FactorSummary, Measure, ScoreRecord};
use crate::corpus::TaskKind;
use crate::error::{Error, Result};
use crate::stats::{friedman_test, significance_mark, StatTestResult};
use crate::zsl::Pipeline;

const FAMILIES: [TaskKind; 2] = [TaskKind::Binary, TaskKind::Multiclass];

#[derive(Debug, Clone, PartialEq)]
pub struct FriedmanRow {
    pub family: TaskKind,
    pub factor: Factor,
    pub measure: Measure,
    pub levels: Vec<String>,
    pub blocks: usize,
    /// `None` when the factor has fewer than two levels or blocks.
    pub result: Option<StatTestResult>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Analysis {
    pub planned: usize,
    pub summaries: Vec<FactorSummary>,
    pub friedman: Vec<FriedmanRow>,
    pub comparisons: Vec<Comparison>,
    pub notes: Vec<String>,
}

pub const FRIEDMAN_HEADER: [&str; 9] = ["family", "measure", "factor", "method", "statistic", "df", "p_value", "n", "mark"];

fn families_with_inference(records: &[ScoreRecord]) -> Vec<TaskKind> {
    FAMILIES
        .into_iter()
        .filter(|f| {
            records
                .iter()
                .any(|r| r.setting.family == *f && r.setting.pipeline == Pipeline::Inference)
        })
        .collect()
}

/// Friedman tests for one factor and measure in each family present.
pub fn friedman_rows(records: &[ScoreRecord], factor: Factor, measure: Measure) -> Result<Vec<(FactorSummary, FriedmanRow)>> {
    families_with_inference(records)
        .into_iter()
        .map(|family| {
            let pivot = pivot_for_friedman(records, factor, measure, family)?;
            let summary = summarize_pivot(&pivot, family, factor, measure);
            let result = if pivot.levels.len() >= 2 && pivot.blocks.len() >= 2 {
                Some(friedman_test(&pivot.values)?)
            } else {
                None
            };
            Ok((
                summary,
                FriedmanRow {
                    family,
                    factor,
                    measure,
                    levels: pivot.levels,
                    blocks: pivot.blocks.len(),
                    result,
                },
            ))
        })
        .collect()
}

/// Summaries and Friedman tests for every factor × measure, plus a Wilcoxon
/// comparison of the best inference and best embedding setting per task.
///
/// Prediction files for the comparisons are read from `out_dir`.
pub fn analyze(records: &[ScoreRecord], planned: usize, out_dir: &Path) -> Result<Analysis> {
    let mut analysis = Analysis {
        planned,
        ..Analysis::default()
    };
    for factor in Factor::ALL {
        for measure in Measure::ALL {
            for (summary, row) in friedman_rows(records, factor, measure)? {
                analysis.summaries.push(summary);
                analysis.friedman.push(row);
            }
        }
    }
    let mut tasks: Vec<&str> = Vec::new();
    for r in records {
        if !tasks.contains(&r.setting.task.as_str()) {
            tasks.push(&r.setting.task);
        }
    }
    for task in tasks {
        let inference = best_setting(records, task, Some(Pipeline::Inference));
        let embedding = best_setting(records, task, Some(Pipeline::Embedding));
        if let (Some(a), Some(b)) = (inference, embedding) {
            match compare_records(out_dir, a, out_dir, b, None) {
                Ok(c) => analysis.comparisons.push(c),
                Err(Error::Design(msg)) => analysis.notes.push(format!("task `{task}`: {msg}")),
                Err(e) => return Err(e),
            }
        }
    }
    Ok(analysis)
}

pub fn write_friedman<W: std::io::Write>(out: W, rows: &[FriedmanRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(FRIEDMAN_HEADER)?;
    for row in rows {
        if let Some(r) = &row.result {
            wtr.write_record([
                row.family.as_str().to_string(),
                row.measure.to_string(),
                row.factor.to_string(),
                r.method.to_string(),
                fmt_f64(r.statistic),
                r.df.map(|d| d.to_string()).unwrap_or_default(),
                fmt_f64(r.p_value),
                r.n_effective.to_string(),
                r.mark().to_string(),
            ])?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<stats_friedman.csv>", e))
}

fn write_file(path: PathBuf, bytes: &[u8], written: &mut Vec<PathBuf>) -> Result<()> {
    std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(())
}

/// Writes `results.csv`, `summary_<factor>.csv`, `stats_friedman.csv`,
/// `stats_wilcoxon.csv` and `report.md`. Output bytes depend only on the inputs.
pub fn emit_report(records: &[ScoreRecord], analysis: &Analysis, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();

    let mut buf = Vec::new();
    write_results(&mut buf, records)?;
    write_file(RunLayout::new(out_dir).results_csv(), &buf, &mut written)?;

    for factor in Factor::ALL {
        let selected: Vec<&FactorSummary> = analysis.summaries.iter().filter(|s| s.factor == factor).collect();
        let mut buf = Vec::new();
        write_summaries(&mut buf, &selected)?;
        write_file(out_dir.join(format!("summary_{factor}.csv")), &buf, &mut written)?;
    }

    let mut buf = Vec::new();
    write_friedman(&mut buf, &analysis.friedman)?;
    write_file(out_dir.join("stats_friedman.csv"), &buf, &mut written)?;

    let mut buf = Vec::new();
    write_comparisons(&mut buf, &analysis.comparisons)?;
    write_file(out_dir.join("stats_wilcoxon.csv"), &buf, &mut written)?;

    let md = render_markdown(records, analysis);
    write_file(out_dir.join("report.md"), md.as_bytes(), &mut written)?;
    Ok(written)
}

fn score(x: f64) -> String {
    format!("{x:.4}")
}

fn p_value(p: f64) -> String {
    if p != 0.0 && p < 1e-4 {
        format!("{p:.2e}")
    } else {
        format!("{p:.4}")
    }
}

fn family_title(f: TaskKind) -> &'static str {
    match f {
        TaskKind::Binary => "Binary tasks",
        TaskKind::Multiclass => "Multi-class tasks",
    }
}

pub fn render_markdown(records: &[ScoreRecord], analysis: &Analysis) -> String {
    let mut md = String::from("# Experiment report\n\n");
    let inference = records.iter().filter(|r| r.setting.pipeline == Pipeline::Inference).count();
    let _ = writeln!(
        md,
        "Planned settings: {}. Executed settings: {} ({} inference, {} embedding).\n",
        analysis.planned,
        records.len(),
        inference,
        records.len() - inference
    );
    md.push_str("Scores are support-weighted precision (wP), recall (wR) and F1 (wF1). ");
    md.push_str("Significant results (p < 0.05) are marked by (*).\n\n");

    if records.is_empty() {
        md.push_str("## No settings run\n\nThe run selected no settings, so there are no scores to summarize.\n");
        return md;
    }

    for family in families_with_inference(records) {
        let _ = writeln!(md, "## {}\n", family_title(family));
        for factor in Factor::ALL {
            let by_measure: Vec<&FactorSummary> = Measure::ALL
                .iter()
                .filter_map(|m| {
                    analysis
                        .summaries
                        .iter()
                        .find(|s| s.family == family && s.factor == factor && s.measure == *m)
                })
                .collect();
            let Some(first) = by_measure.first() else {
                continue;
            };
            let _ = writeln!(md, "### Factor summary: {}\n", factor.title());
            md.push_str("| Level |");
            for s in &by_measure {
                let _ = write!(md, " Avg {0} | Max {0} | Best {0} |", s.measure);
            }
            md.push_str("\n|---|");
            md.push_str(&"---:|".repeat(3 * by_measure.len()));
            md.push('\n');
            for (i, level) in first.per_level.iter().enumerate() {
                let _ = write!(md, "| {} |", level.level);
                for s in &by_measure {
                    let l = &s.per_level[i];
                    let _ = write!(md, " {} | {} | {} |", score(l.avg), score(l.max), l.times_best);
                }
                md.push('\n');
            }
            let _ = writeln!(md, "\nContexts compared: {}.", first.contexts);
            for s in &by_measure {
                for note in &s.notes {
                    let _ = writeln!(md, "- {}: {note}", s.measure);
                }
            }
            md.push('\n');
        }

        md.push_str("### Friedman tests\n\n| Factor | Measure | Levels | Blocks | Q | df | p | |\n|---|---|---:|---:|---:|---:|---:|---|\n");
        for row in analysis.friedman.iter().filter(|r| r.family == family) {
            match &row.result {
                Some(r) => {
                    let _ = writeln!(
                        md,
                        "| {} | {} | {} | {} | {} | {} | {} | {} |",
                        row.factor.title(),
                        row.measure,
                        row.levels.len(),
                        row.blocks,
                        score(r.statistic),
                        r.df.unwrap_or(0),
                        p_value(r.p_value),
                        r.mark()
                    );
                }
                None => {
                    let _ = writeln!(
                        md,
                        "| {} | {} | {} | {} | n/a | | | |",
                        row.factor.title(),
                        row.measure,
                        row.levels.len(),
                        row.blocks
                    );
                }
            }
        }
        md.push('\n');
    }

    let embedding: Vec<&ScoreRecord> = records
        .iter()
        .filter(|r| r.setting.pipeline == Pipeline::Embedding)
        .collect();
    if !embedding.is_empty() {
        md.push_str("## Embedding settings\n\n| Model | Task | wP | wR | wF1 |\n|---|---|---:|---:|---:|\n");
        for r in embedding {
            let _ = writeln!(
                md,
                "| {} | {} | {} | {} | {} |",
                r.setting.model_id,
                r.setting.task,
                score(r.weighted.precision),
                score(r.weighted.recall),
                score(r.weighted.f1)
            );
        }
        md.push('\n');
    }

    if !analysis.comparisons.is_empty() || !analysis.notes.is_empty() {
        md.push_str("## Best inference vs best embedding (Wilcoxon signed-rank on group wF1)\n\n");
        md.push_str("| Task | Inference | Embedding | Groups | W | n | p | |\n|---|---|---|---:|---:|---:|---:|---|\n");
        for c in &analysis.comparisons {
            let _ = writeln!(
                md,
                "| {} | {} | {} | {} | {} | {} | {} | {} |",
                c.task,
                c.a_setting,
                c.b_setting,
                c.groups.len(),
                score(c.result.statistic),
                c.result.n_effective,
                p_value(c.result.p_value),
                significance_mark(c.result.p_value)
            );
        }
        for note in &analysis.notes {
            let _ = writeln!(md, "- {note}");
        }
        md.push('\n');
    }
    md
}

/// Analyzes `records` and writes every report file into `out_dir`.
pub fn write_report(records: &[ScoreRecord], planned: usize, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let analysis = analyze(records, planned, out_dir)?;
    emit_report(records, &analysis, out_dir)
}
