//! Zero-shot requirements classification experiment harness.
//!
//! The crate runs prompt-scoring and embedding classifiers over a factorial grid
//! of models, prompt patterns, dataset variations and tasks, scores every
//! setting with support-weighted precision/recall/F1, and tests factor effects
//! with the Friedman and Wilcoxon signed-rank tests.
//!
//! Module map:
//! - [`corpus`]: dataset CSV ingestion and task materialization
//! - [`variations`]: text and label surface transforms
//! - [`prompts`]: the six prompt patterns
//! - [`backend`]: scoring/embedding wire protocol, HTTP client and mock backend
//! - [`zsl`]: inference and embedding classification pipelines
//! - [`metrics`]: confusion matrices and weighted P/R/F1
//! - [`stats`]: Friedman and Wilcoxon tests
//! - [`runner`]: grid planning, execution, summaries and reports

pub mod backend;
pub mod corpus;
pub mod error;
pub mod metrics;
pub mod prompts;
pub mod runner;
pub mod stats;
pub mod synth;
pub mod variations;
pub mod zsl;

pub use corpus::{Requirement, TaskInstance, TaskKind, TaskSpec};
pub use error::{Error, Result};
pub use metrics::{ConfusionMatrix, MetricReport, Prf};
pub use prompts::{PatternId, PromptPattern, RenderedPrompt};
pub use stats::StatTestResult;
pub use variations::VariationKind;
pub use zsl::{Pipeline, Prediction};
