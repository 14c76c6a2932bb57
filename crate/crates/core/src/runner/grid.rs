//! Experiment settings and grid planning.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::Config;
use crate::corpus::TaskKind;
use crate::error::{Error, Result};
use crate::prompts::PatternId;
use crate::variations::VariationKind;
use crate::zsl::Pipeline;

/// Which task families a run covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FamilyFilter {
    Binary,
    Multiclass,
    #[default]
    All,
}

impl FamilyFilter {
    pub fn admits(self, kind: TaskKind) -> bool {
        match self {
            FamilyFilter::All => true,
            FamilyFilter::Binary => kind == TaskKind::Binary,
            FamilyFilter::Multiclass => kind == TaskKind::Multiclass,
        }
    }
}

impl FromStr for FamilyFilter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(FamilyFilter::Binary),
            "multiclass" => Ok(FamilyFilter::Multiclass),
            "all" => Ok(FamilyFilter::All),
            _ => Err(Error::Config(format!("unknown family `{s}`"))),
        }
    }
}

pub fn parse_family(s: &str) -> Result<TaskKind> {
    match s {
        "binary" => Ok(TaskKind::Binary),
        "multiclass" => Ok(TaskKind::Multiclass),
        _ => Err(Error::Input(format!("unknown family `{s}`"))),
    }
}

/// One cell of the grid.
///
/// Inference settings carry a pattern and a variation; embedding settings
/// carry neither (they run once per task).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ExperimentSetting {
    pub model_id: String,
    pub pipeline: Pipeline,
    pub task: String,
    pub pattern: Option<PatternId>,
    pub variation: Option<VariationKind>,
    pub family: TaskKind,
}

impl ExperimentSetting {
    /// Stable identifier, also used as the predictions file stem.
    pub fn id(&self) -> String {
        match (self.pattern, self.variation) {
            (Some(p), Some(v)) => format!("{}__{}__{p}__{v}", self.model_id, self.task),
            _ => format!("{}__{}__{}", self.model_id, self.task, self.pipeline),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.pipeline, self.pattern, self.variation) {
            (Pipeline::Inference, Some(_), Some(_)) | (Pipeline::Embedding, None, None) => Ok(()),
            _ => Err(Error::Input(format!(
                "setting `{}`: inference needs a pattern and variation, embedding takes neither",
                self.id()
            ))),
        }
    }
}

impl fmt::Display for ExperimentSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

/// Cartesian product of models × tasks × patterns × variations, in that
/// nesting order. Embedding models contribute one setting per task.
pub fn plan_grid(config: &Config, family: FamilyFilter, pipeline: Option<Pipeline>) -> Result<Vec<ExperimentSetting>> {
    let tasks = config.grid_tasks()?;
    let patterns: Vec<PatternId> = config.patterns()?.iter().map(|p| p.id).collect();
    let variations = config.variation_kinds();
    let mut out = Vec::new();
    for model in &config.models {
        if pipeline.is_some_and(|p| p != model.pipeline) {
            continue;
        }
        for task in tasks.iter().filter(|t| family.admits(t.kind)) {
            let setting = |pattern, variation| ExperimentSetting {
                model_id: model.id.clone(),
                pipeline: model.pipeline,
                task: task.name.clone(),
                pattern,
                variation,
                family: task.kind,
            };
            match model.pipeline {
                Pipeline::Inference => {
                    for &p in &patterns {
                        for &v in &variations {
                            out.push(setting(Some(p), Some(v)));
                        }
                    }
                }
                Pipeline::Embedding => out.push(setting(None, None)),
            }
        }
    }
    Ok(out)
}
