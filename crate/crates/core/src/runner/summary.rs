//! Flat result records, `results.csv` I/O, factor summaries and Friedman pivots.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::exec::ExperimentResult;
use super::grid::{parse_family, ExperimentSetting};
use super::predictions::fmt_f64;
use crate::corpus::TaskKind;
use crate::error::{Error, Result};
use crate::metrics::Prf;
use crate::zsl::Pipeline;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Factor {
    Model,
    Pattern,
    Variation,
    Task,
}

impl Factor {
    pub const ALL: [Factor; 4] = [Factor::Model, Factor::Pattern, Factor::Variation, Factor::Task];

    pub fn as_str(self) -> &'static str {
        match self {
            Factor::Model => "model",
            Factor::Pattern => "pattern",
            Factor::Variation => "variation",
            Factor::Task => "task",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Factor::Model => "Model",
            Factor::Pattern => "Pattern",
            Factor::Variation => "Variation",
            Factor::Task => "Task",
        }
    }

    /// Level of this factor in an inference setting.
    fn level(self, s: &ExperimentSetting) -> String {
        match self {
            Factor::Model => s.model_id.clone(),
            Factor::Pattern => s.pattern.map(|p| p.to_string()).unwrap_or_default(),
            Factor::Variation => s.variation.map(|v| v.to_string()).unwrap_or_default(),
            Factor::Task => s.task.clone(),
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Factor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Factor::ALL
            .into_iter()
            .find(|f| f.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Input(format!("unknown factor `{s}` (model, pattern, variation, task)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Measure {
    #[serde(rename = "wP")]
    WeightedPrecision,
    #[serde(rename = "wR")]
    WeightedRecall,
    #[serde(rename = "wF1")]
    WeightedF1,
}

impl Measure {
    pub const ALL: [Measure; 3] = [Measure::WeightedPrecision, Measure::WeightedRecall, Measure::WeightedF1];

    pub fn as_str(self) -> &'static str {
        match self {
            Measure::WeightedPrecision => "wP",
            Measure::WeightedRecall => "wR",
            Measure::WeightedF1 => "wF1",
        }
    }

    pub fn of(self, prf: &Prf) -> f64 {
        match self {
            Measure::WeightedPrecision => prf.precision,
            Measure::WeightedRecall => prf.recall,
            Measure::WeightedF1 => prf.f1,
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Measure::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Input(format!("unknown measure `{s}` (wP, wR, wF1)")))
    }
}

/// The weighted scores of one setting, as persisted in `results.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRecord {
    pub setting: ExperimentSetting,
    pub weighted: Prf,
    pub n: usize,
    pub backend_calls: u64,
}

impl ScoreRecord {
    pub fn value(&self, measure: Measure) -> f64 {
        measure.of(&self.weighted)
    }
}

impl From<&ExperimentResult> for ScoreRecord {
    fn from(r: &ExperimentResult) -> Self {
        ScoreRecord {
            setting: r.setting.clone(),
            weighted: r.report.weighted,
            n: r.n,
            backend_calls: r.backend_calls,
        }
    }
}

pub const RESULTS_HEADER: [&str; 11] = [
    "setting",
    "model",
    "pipeline",
    "family",
    "task",
    "pattern",
    "variation",
    "measure",
    "value",
    "n",
    "backend_calls",
];

/// One row per setting × measure; wall time is deliberately absent so the
/// file is reproducible.
pub fn write_results<W: std::io::Write>(out: W, records: &[ScoreRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(RESULTS_HEADER)?;
    for r in records {
        let s = &r.setting;
        for m in Measure::ALL {
            wtr.write_record([
                s.id(),
                s.model_id.clone(),
                s.pipeline.to_string(),
                s.family.as_str().to_string(),
                s.task.clone(),
                s.pattern.map(|p| p.to_string()).unwrap_or_default(),
                s.variation.map(|v| v.to_string()).unwrap_or_default(),
                m.to_string(),
                fmt_f64(r.value(m)),
                r.n.to_string(),
                r.backend_calls.to_string(),
            ])?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<results.csv>", e))
}

pub fn read_results<R: std::io::Read>(input: R, path: &Path) -> Result<Vec<ScoreRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    for column in RESULTS_HEADER {
        if !headers.iter().any(|h| h == column) {
            return Err(Error::Schema {
                path: path.to_path_buf(),
                column: column.into(),
            });
        }
    }
    let col = |name: &str| headers.iter().position(|h| h == name).expect("checked above");
    let mut records: Vec<ScoreRecord> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let err = |message: String| Error::Row {
            path: path.to_path_buf(),
            row: i + 2,
            message,
        };
        let get = |name: &str| rec.get(col(name)).unwrap_or("");
        let opt = |name: &str| Some(get(name)).filter(|v| !v.is_empty());
        let setting = ExperimentSetting {
            model_id: get("model").to_string(),
            pipeline: get("pipeline").parse::<Pipeline>().map_err(|e| err(e.to_string()))?,
            task: get("task").to_string(),
            pattern: opt("pattern").map(str::parse).transpose().map_err(|e: Error| err(e.to_string()))?,
            variation: opt("variation").map(str::parse).transpose().map_err(|e: Error| err(e.to_string()))?,
            family: parse_family(get("family")).map_err(|e| err(e.to_string()))?,
        };
        if setting.id() != get("setting") {
            return Err(err(format!("setting id `{}` does not match its columns", get("setting"))));
        }
        let measure: Measure = get("measure").parse().map_err(|e: Error| err(e.to_string()))?;
        let value: f64 = get("value").parse().map_err(|e| err(format!("bad value: {e}")))?;
        let n: usize = get("n").parse().map_err(|e| err(format!("bad n: {e}")))?;
        let calls: u64 = get("backend_calls").parse().map_err(|e| err(format!("bad backend_calls: {e}")))?;
        let id = setting.id();
        let slot = match index.get(&id) {
            Some(&j) => j,
            None => {
                index.insert(id, records.len());
                records.push(ScoreRecord {
                    setting,
                    weighted: Prf::default(),
                    n,
                    backend_calls: calls,
                });
                records.len() - 1
            }
        };
        let w = &mut records[slot].weighted;
        match measure {
            Measure::WeightedPrecision => w.precision = value,
            Measure::WeightedRecall => w.recall = value,
            Measure::WeightedF1 => w.f1 = value,
        }
    }
    Ok(records)
}

pub fn load_results(path: impl AsRef<Path>) -> Result<Vec<ScoreRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_results(file, path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub level: String,
    pub avg: f64,
    pub max: f64,
    pub times_best: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorSummary {
    pub factor: Factor,
    pub measure: Measure,
    pub family: TaskKind,
    /// Levels in order of first appearance.
    pub per_level: Vec<LevelSummary>,
    /// Number of fixings of the other factors.
    pub contexts: usize,
    pub notes: Vec<String>,
}

/// A complete contexts × levels table for one factor.
#[derive(Debug, Clone, PartialEq)]
pub struct Pivot {
    pub levels: Vec<String>,
    /// Context labels, `a/b/c` over the other factors' levels.
    pub blocks: Vec<String>,
    /// `values[block][level]`.
    pub values: Vec<Vec<f64>>,
}

/// Arranges the inference records of `family` into a block × level matrix.
///
/// Blocks and levels keep their order of first appearance, so a planned grid
/// yields a stable layout.
pub fn pivot_for_friedman(records: &[ScoreRecord], factor: Factor, measure: Measure, family: TaskKind) -> Result<Pivot> {
    let others: Vec<Factor> = Factor::ALL.into_iter().filter(|f| *f != factor).collect();
    let mut levels: Vec<String> = Vec::new();
    let mut blocks: Vec<String> = Vec::new();
    let mut cells: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for r in records
        .iter()
        .filter(|r| r.setting.family == family && r.setting.pipeline == Pipeline::Inference)
    {
        let level = factor.level(&r.setting);
        let block = others.iter().map(|f| f.level(&r.setting)).collect::<Vec<_>>().join("/");
        let li = position_or_push(&mut levels, level);
        let bi = position_or_push(&mut blocks, block);
        if cells.insert((bi, li), r.value(measure)).is_some() {
            return Err(Error::Design(format!(
                "duplicate result for {} `{}` in context `{}`",
                factor, levels[li], blocks[bi]
            )));
        }
    }
    if cells.is_empty() {
        return Err(Error::Design(format!("no {} inference results", family.as_str())));
    }
    let missing: Vec<String> = (0..blocks.len())
        .flat_map(|b| (0..levels.len()).map(move |l| (b, l)))
        .filter(|k| !cells.contains_key(k))
        .map(|(b, l)| format!("{}={} at {}", factor, levels[l], blocks[b]))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Design(format!(
            "incomplete {} grid, missing {} cell(s): {}",
            family.as_str(),
            missing.len(),
            missing.join("; ")
        )));
    }
    let values = (0..blocks.len())
        .map(|b| (0..levels.len()).map(|l| cells[&(b, l)]).collect())
        .collect();
    Ok(Pivot { levels, blocks, values })
}

fn position_or_push(items: &mut Vec<String>, item: String) -> usize {
    match items.iter().position(|x| *x == item) {
        Some(i) => i,
        None => {
            items.push(item);
            items.len() - 1
        }
    }
}

/// Average, maximum and best-in-context tallies per level.
pub fn summarize_factor(records: &[ScoreRecord], family: TaskKind, factor: Factor, measure: Measure) -> Result<FactorSummary> {
    let pivot = pivot_for_friedman(records, factor, measure, family)?;
    Ok(summarize_pivot(&pivot, family, factor, measure))
}

pub fn summarize_pivot(pivot: &Pivot, family: TaskKind, factor: Factor, measure: Measure) -> FactorSummary {
    let k = pivot.levels.len();
    let mut times_best = vec![0usize; k];
    let mut tied_contexts = 0;
    for row in &pivot.values {
        let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let winners: Vec<usize> = (0..k).filter(|&l| row[l] == best).collect();
        if winners.len() > 1 {
            tied_contexts += 1;
        }
        for l in winners {
            times_best[l] += 1;
        }
    }
    let n = pivot.values.len() as f64;
    let per_level = (0..k)
        .map(|l| {
            let column = pivot.values.iter().map(|row| row[l]);
            LevelSummary {
                level: pivot.levels[l].clone(),
                avg: column.clone().sum::<f64>() / n,
                max: column.fold(f64::NEG_INFINITY, f64::max),
                times_best: times_best[l],
            }
        })
        .collect();
    let mut notes = Vec::new();
    if tied_contexts > 0 {
        notes.push(format!(
            "{tied_contexts} context(s) had tied best levels; every tied level was credited"
        ));
    }
    FactorSummary {
        factor,
        measure,
        family,
        per_level,
        contexts: pivot.values.len(),
        notes,
    }
}

pub const SUMMARY_HEADER: [&str; 8] = ["family", "measure", "factor", "level", "avg", "max", "times_best", "contexts"];

pub fn write_summaries<W: std::io::Write>(out: W, summaries: &[&FactorSummary]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(SUMMARY_HEADER)?;
    for s in summaries {
        for l in &s.per_level {
            wtr.write_record([
                s.family.as_str().to_string(),
                s.measure.to_string(),
                s.factor.to_string(),
                l.level.clone(),
                fmt_f64(l.avg),
                fmt_f64(l.max),
                l.times_best.to_string(),
                s.contexts.to_string(),
            ])?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<summary csv>", e))
}

/// Records whose setting ids repeat, for sanity checks.
pub fn duplicate_settings(records: &[ScoreRecord]) -> Vec<String> {
    let mut seen = BTreeSet::new();
    records
        .iter()
        .map(|r| r.setting.id())
        .filter(|id| !seen.insert(id.clone()))
        .collect()
}
