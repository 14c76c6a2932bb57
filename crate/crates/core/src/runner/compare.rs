//! Paired comparison of the best setting of two result sets on one task:
//! group-level wF1 over identical {3,4}-sized groups, then Wilcoxon.

use std::path::Path;

use super::exec::RunLayout;
use super::predictions::{fmt_f64, PredictionTable};
use super::summary::{load_results, Measure, ScoreRecord};
use crate::corpus::TaskKind;
use crate::error::{Error, Result};
use crate::stats::{group_wf1, partition_groups, wilcoxon_signed_rank, StatTestResult};
use crate::zsl::Pipeline;

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub family: TaskKind,
    pub task: String,
    pub a_setting: String,
    pub b_setting: String,
    pub groups: Vec<usize>,
    pub a_scores: Vec<f64>,
    pub b_scores: Vec<f64>,
    pub result: StatTestResult,
}

pub const COMPARISON_HEADER: [&str; 10] = [
    "family",
    "measure",
    "task",
    "comparison",
    "method",
    "statistic",
    "df",
    "p_value",
    "n",
    "mark",
];

impl Comparison {
    pub fn label(&self) -> String {
        format!("{} vs {}", self.a_setting, self.b_setting)
    }

    pub fn csv_record(&self) -> [String; 10] {
        let r = &self.result;
        [
            self.family.as_str().to_string(),
            Measure::WeightedF1.to_string(),
            self.task.clone(),
            self.label(),
            r.method.to_string(),
            fmt_f64(r.statistic),
            r.df.map(|d| d.to_string()).unwrap_or_default(),
            fmt_f64(r.p_value),
            r.n_effective.to_string(),
            r.mark().to_string(),
        ]
    }
}

pub fn write_comparisons<W: std::io::Write>(out: W, rows: &[Comparison]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(COMPARISON_HEADER)?;
    for c in rows {
        wtr.write_record(c.csv_record())?;
    }
    wtr.flush().map_err(|e| Error::io("<comparison csv>", e))
}

/// Group-level wF1 of two prediction tables over the same items, and the
/// Wilcoxon test on the paired group scores.
///
/// `groups` defaults to [`partition_groups`] of the item count.
pub fn compare_tables(
    a: &PredictionTable,
    b: &PredictionTable,
    groups: Option<&[usize]>,
) -> Result<(Vec<usize>, Vec<f64>, Vec<f64>, StatTestResult)> {
    if a.classes != b.classes {
        return Err(Error::Input(format!(
            "class rosters differ: {:?} vs {:?}",
            a.classes, b.classes
        )));
    }
    if a.len() != b.len() {
        return Err(Error::Input(format!("{} vs {} predictions", a.len(), b.len())));
    }
    if let Some((x, y)) = a.rows.iter().zip(&b.rows).find(|(x, y)| x.id != y.id || x.gold != y.gold) {
        return Err(Error::Input(format!(
            "prediction files disagree at index {}: `{}`/{} vs `{}`/{}",
            x.index, x.id, x.gold, y.id, y.gold
        )));
    }
    let groups = match groups {
        Some(g) => g.to_vec(),
        None => partition_groups(a.len())?,
    };
    let golds = a.golds();
    let a_scores = group_wf1(&a.predicted(), &golds, &groups, &a.classes)?;
    let b_scores = group_wf1(&b.predicted(), &golds, &groups, &b.classes)?;
    let result = wilcoxon_signed_rank(&a_scores, &b_scores)?;
    Ok((groups, a_scores, b_scores, result))
}

/// Highest-wF1 record for `task`; ties go to the earliest record.
pub fn best_setting<'a>(records: &'a [ScoreRecord], task: &str, pipeline: Option<Pipeline>) -> Option<&'a ScoreRecord> {
    records
        .iter()
        .filter(|r| r.setting.task == task && pipeline.is_none_or(|p| r.setting.pipeline == p))
        .fold(None, |best: Option<&ScoreRecord>, r| match best {
            Some(b) if b.weighted.f1 >= r.weighted.f1 => Some(b),
            _ => Some(r),
        })
}

/// Compares two specific settings stored under `a_dir` and `b_dir`.
pub fn compare_records(
    a_dir: &Path,
    a: &ScoreRecord,
    b_dir: &Path,
    b: &ScoreRecord,
    groups: Option<&[usize]>,
) -> Result<Comparison> {
    if a.setting.task != b.setting.task {
        return Err(Error::Input(format!(
            "cannot compare task `{}` with task `{}`",
            a.setting.task, b.setting.task
        )));
    }
    let (a_id, b_id) = (a.setting.id(), b.setting.id());
    let ta = PredictionTable::load(RunLayout::new(a_dir).predictions(&a_id))?;
    let tb = PredictionTable::load(RunLayout::new(b_dir).predictions(&b_id))?;
    let (groups, a_scores, b_scores, result) = compare_tables(&ta, &tb, groups)?;
    Ok(Comparison {
        family: a.setting.family,
        task: a.setting.task.clone(),
        a_setting: a_id,
        b_setting: b_id,
        groups,
        a_scores,
        b_scores,
        result,
    })
}

/// Compares the best `task` setting of the results in `a_dir` with that of `b_dir`.
pub fn compare_best(a_dir: &Path, b_dir: &Path, task: &str, groups: Option<&[usize]>) -> Result<Comparison> {
    let best = |dir: &Path| -> Result<ScoreRecord> {
        let records = load_results(RunLayout::new(dir).results_csv())?;
        best_setting(&records, task, None)
            .cloned()
            .ok_or_else(|| Error::Input(format!("{}: no results for task `{task}`", dir.display())))
    };
    let (a, b) = (best(a_dir)?, best(b_dir)?);
    compare_records(a_dir, &a, b_dir, &b, groups)
}
