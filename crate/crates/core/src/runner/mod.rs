//! Grid planning, execution, persistence, summaries and reports.
//!
//! A results directory holds:
//! - `predictions/<setting>.csv`: one row per requirement
//! - `settings/<setting>.json`: metric report and call count per setting
//! - `results.csv`, `summary_<factor>.csv`, `stats_friedman.csv`,
//!   `stats_wilcoxon.csv`, `report.md`
//! - `timings.csv`: wall time per setting (not reproducible, kept apart)

pub mod audit;
pub mod compare;
pub mod config;
pub mod exec;
pub mod grid;
pub mod predictions;
pub mod report;
pub mod summary;

use std::fmt::Write as _;
use std::path::Path;

pub use audit::{audit, AuditReport};
pub use compare::{compare_best, compare_tables, Comparison};
pub use config::Config;
pub use exec::{ExperimentResult, Harness, RunLayout};
pub use grid::{plan_grid, ExperimentSetting, FamilyFilter};
pub use report::{analyze, emit_report, write_report, Analysis};
pub use summary::{load_results, pivot_for_friedman, summarize_factor, Factor, FactorSummary, Measure, ScoreRecord};

use crate::error::{Error, Result};
use crate::zsl::Pipeline;

/// What [`run`] executed.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub planned: usize,
    pub results: Vec<ExperimentResult>,
}

/// Plans the grid, runs every setting and writes the report files.
///
/// `observer` is called after each setting with its index and the plan size.
pub fn run(
    harness: &Harness,
    family: FamilyFilter,
    pipeline: Option<Pipeline>,
    out_dir: &Path,
    resume: bool,
    mut observer: impl FnMut(usize, usize, &ExperimentResult),
) -> Result<RunOutcome> {
    let settings = harness.plan(family, pipeline)?;
    let planned = settings.len();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let results = harness.run_settings(&settings, out_dir, resume, |i, r| observer(i, planned, r))?;

    let mut timings = String::from("setting,wall_ms\n");
    for r in &results {
        let _ = writeln!(timings, "{},{}", r.setting.id(), r.wall_time.as_millis());
    }
    let path = out_dir.join("timings.csv");
    std::fs::write(&path, timings).map_err(|e| Error::io(&path, e))?;

    let records: Vec<ScoreRecord> = results.iter().map(ScoreRecord::from).collect();
    write_report(&records, planned, out_dir)?;
    Ok(RunOutcome { planned, results })
}
