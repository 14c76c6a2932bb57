//! The single structured config file that defines datasets, tasks, patterns,
//! lexicons and backends for a run.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::backend::Normalize;
use crate::corpus::{canonical_tasks, TaskSpec};
use crate::error::{Error, Result};
use crate::prompts::{DefinitionLexicon, PatternId, PromptPattern};
use crate::variations::{TextVariations, VariationKind};
use crate::zsl::{EmbeddingMode, LabelLexicon, Pipeline, DEFAULT_THRESHOLD};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    /// Relative paths resolve against the config file's directory.
    pub path: PathBuf,
    pub schemes: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub patterns: Option<Vec<PatternId>>,
    pub variations: Option<Vec<VariationKind>>,
    pub tasks: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub id: String,
    #[serde(default = "default_pipeline")]
    pub pipeline: Pipeline,
    #[serde(default)]
    pub backend: BackendKind,
    /// Endpoint base URL for HTTP models; falls back to `backend.url`.
    #[serde(default)]
    pub url: Option<String>,
    /// Mock only: tiebreak salt distinguishing several mock aliases.
    #[serde(default)]
    pub salt: Option<String>,
    /// Mock only: embedding dimension.
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default = "default_normalize")]
    pub normalize: Normalize,
}

fn default_pipeline() -> Pipeline {
    Pipeline::Inference
}

fn default_normalize() -> Normalize {
    Normalize::MeanLogProb
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub url: Option<String>,
    #[serde(default = "default_retries")]
    pub retries: usize,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default = "default_backoff_ms")]
    pub initial_backoff_ms: u64,
}

fn default_retries() -> usize {
    2
}

fn default_parallelism() -> usize {
    4
}

fn default_backoff_ms() -> u64 {
    100
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            url: None,
            retries: default_retries(),
            parallelism: default_parallelism(),
            initial_backoff_ms: default_backoff_ms(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockConfig {
    /// Reserved; the mock backend is deterministic without a seed.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingModeName {
    #[default]
    Argmax,
    Threshold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingConfig {
    #[serde(default)]
    pub mode: EmbeddingModeName,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            mode: EmbeddingModeName::Argmax,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

impl EmbeddingConfig {
    pub fn mode(&self) -> EmbeddingMode {
        match self.mode {
            EmbeddingModeName::Argmax => EmbeddingMode::Argmax,
            EmbeddingModeName::Threshold => EmbeddingMode::Threshold {
                threshold: self.threshold,
            },
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariationsConfig {
    pub punct_chars: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptsConfig {
    /// Pattern id → template overriding the built-in one.
    #[serde(default)]
    pub templates: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub datasets: BTreeMap<String, DatasetConfig>,
    /// Task definitions; the five canonical tasks when empty.
    #[serde(default)]
    pub tasks: Vec<TaskSpec>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub models: Vec<ModelConfig>,
    #[serde(default)]
    pub backend: BackendConfig,
    #[serde(default)]
    pub mock: MockConfig,
    #[serde(default)]
    pub embedding: EmbeddingConfig,
    #[serde(default)]
    pub variations: VariationsConfig,
    #[serde(default)]
    pub prompts: PromptsConfig,
    /// Extra or replacement class definitions, merged over the built-ins.
    #[serde(default)]
    pub definitions: BTreeMap<String, String>,
    /// Extra or replacement label lexicon entries, merged over the built-ins.
    #[serde(default)]
    pub lexicon: BTreeMap<String, Vec<String>>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Config {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::parse(&text)?;
        config.base_dir = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();
        config.validate()?;
        Ok(config)
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// The canonical setup: bundled datasets in `data_dir`, three mock
    /// generative models and two mock embedding models.
    pub fn canonical(data_dir: impl AsRef<Path>) -> Self {
        let data_dir = data_dir.as_ref();
        let dataset = |file: &str, schemes: &[&str]| DatasetConfig {
            path: data_dir.join(file),
            schemes: schemes.iter().map(|s| s.to_string()).collect(),
        };
        let model = |id: &str, pipeline: Pipeline, salt: Option<&str>, dim: Option<usize>| ModelConfig {
            id: id.into(),
            pipeline,
            backend: BackendKind::Mock,
            url: None,
            salt: salt.map(str::to_string),
            dim,
            normalize: Normalize::MeanLogProb,
        };
        Config {
            datasets: [
                ("promise".to_string(), dataset("promise.csv", &["promise"])),
                ("secreq".to_string(), dataset("secreq.csv", &["secreq"])),
                (
                    "functional_quality".to_string(),
                    dataset("functional_quality.csv", &["functional", "quality"]),
                ),
            ]
            .into(),
            tasks: Vec::new(),
            grid: GridConfig::default(),
            models: vec![
                model("bloom-mock", Pipeline::Inference, Some("bloom"), None),
                model("gemma-mock", Pipeline::Inference, Some("gemma"), None),
                model("llama-mock", Pipeline::Inference, Some("llama"), None),
                model("sbert-mock", Pipeline::Embedding, None, Some(384)),
                model("allmini-mock", Pipeline::Embedding, None, Some(256)),
            ],
            backend: BackendConfig::default(),
            mock: MockConfig::default(),
            embedding: EmbeddingConfig::default(),
            variations: VariationsConfig::default(),
            prompts: PromptsConfig::default(),
            definitions: BTreeMap::new(),
            lexicon: BTreeMap::new(),
            base_dir: PathBuf::new(),
        }
    }

    pub fn task_specs(&self) -> Vec<TaskSpec> {
        if self.tasks.is_empty() {
            canonical_tasks()
        } else {
            self.tasks.clone()
        }
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    /// Name of the dataset that carries `scheme`.
    pub fn dataset_for_scheme(&self, scheme: &str) -> Result<&str> {
        self.datasets
            .iter()
            .find(|(_, d)| d.schemes.iter().any(|s| s == scheme))
            .map(|(name, _)| name.as_str())
            .ok_or_else(|| Error::Config(format!("no dataset provides labeling scheme `{scheme}`")))
    }

    pub fn patterns(&self) -> Result<Vec<PromptPattern>> {
        let ids = self.grid.patterns.clone().unwrap_or_else(|| PatternId::ALL.to_vec());
        for key in self.prompts.templates.keys() {
            key.parse::<PatternId>()?;
        }
        ids.into_iter()
            .map(|id| match self.prompts.templates.get(&id.to_string()) {
                Some(t) => PromptPattern::new(id, t),
                None => Ok(PromptPattern::canonical(id)),
            })
            .collect()
    }

    pub fn variation_kinds(&self) -> Vec<VariationKind> {
        self.grid.variations.clone().unwrap_or_else(|| VariationKind::ALL.to_vec())
    }

    /// Task specs selected by `grid.tasks`, in config order.
    pub fn grid_tasks(&self) -> Result<Vec<TaskSpec>> {
        let specs = self.task_specs();
        match &self.grid.tasks {
            None => Ok(specs),
            Some(names) => names
                .iter()
                .map(|n| {
                    specs
                        .iter()
                        .find(|t| &t.name == n)
                        .cloned()
                        .ok_or_else(|| Error::Config(format!("unknown task `{n}`")))
                })
                .collect(),
        }
    }

    pub fn definitions(&self) -> DefinitionLexicon {
        let mut lex = DefinitionLexicon::builtin();
        lex.entries.extend(self.definitions.clone());
        lex
    }

    pub fn label_lexicon(&self) -> LabelLexicon {
        let mut lex = LabelLexicon::builtin();
        lex.entries.extend(self.lexicon.clone());
        lex
    }

    pub fn text_variations(&self) -> TextVariations {
        match &self.variations.punct_chars {
            Some(chars) => TextVariations::with_punct_chars(chars),
            None => TextVariations::default(),
        }
    }

    pub fn model(&self, id: &str) -> Result<&ModelConfig> {
        self.models
            .iter()
            .find(|m| m.id == id)
            .ok_or_else(|| Error::Config(format!("unknown model `{id}`")))
    }

    pub fn validate(&self) -> Result<()> {
        let specs = self.task_specs();
        let mut names = BTreeSet::new();
        for spec in &specs {
            spec.validate()?;
            if !names.insert(&spec.name) {
                return Err(Error::Config(format!("duplicate task `{}`", spec.name)));
            }
            self.dataset_for_scheme(&spec.labeling_scheme)?;
        }
        self.grid_tasks()?;
        self.patterns()?;
        let mut ids = BTreeSet::new();
        for m in &self.models {
            if m.id.trim().is_empty() || m.id.contains(['/', '\\']) || m.id.contains("__") {
                return Err(Error::Config(format!("invalid model id `{}`", m.id)));
            }
            if !ids.insert(&m.id) {
                return Err(Error::Config(format!("duplicate model `{}`", m.id)));
            }
            if m.backend == BackendKind::Http && m.url.is_none() && self.backend.url.is_none() {
                return Err(Error::Config(format!("model `{}` needs a url", m.id)));
            }
            if m.dim == Some(0) {
                return Err(Error::Config(format!("model `{}` has dim 0", m.id)));
            }
        }
        if self.backend.parallelism == 0 {
            return Err(Error::Config("backend.parallelism must be at least 1".into()));
        }
        if !self.embedding.threshold.is_finite() {
            return Err(Error::Config("embedding.threshold must be finite".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = Config::parse(
            r#"
            [datasets.promise]
            path = "promise.csv"
            schemes = ["promise"]
            [datasets.secreq]
            path = "secreq.csv"
            schemes = ["secreq"]
            [datasets.fq]
            path = "fq.csv"
            schemes = ["functional", "quality"]

            [[models]]
            id = "m"
            "#,
        )
        .unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.backend.retries, 2);
        assert_eq!(cfg.backend.parallelism, 4);
        assert_eq!(cfg.patterns().unwrap().len(), 6);
        assert_eq!(cfg.variation_kinds().len(), 5);
        assert_eq!(cfg.grid_tasks().unwrap().len(), 5);
        assert_eq!(cfg.models[0].pipeline, Pipeline::Inference);
    }

    #[test]
    fn rejects_unknown_names() {
        let mut cfg = Config::canonical("data");
        cfg.grid.tasks = Some(vec!["Nope".into()]);
        assert!(cfg.validate().is_err());
        assert!(Config::parse("[grid]\npatterns = [\"is-about-essay\"]").is_err());
        assert!(Config::parse("surprise = 1").is_err());
    }

    #[test]
    fn template_override_is_validated() {
        let mut cfg = Config::canonical("data");
        cfg.prompts
            .templates
            .insert("is-about-assertion".into(), "Req {text} is about {label}.".into());
        assert_eq!(cfg.patterns().unwrap()[0].template(), "Req {text} is about {label}.");
        cfg.prompts.templates.insert("is-about-qa".into(), "no placeholders".into());
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn http_model_needs_url() {
        let mut cfg = Config::canonical("data");
        cfg.models[0].backend = BackendKind::Http;
        assert!(cfg.validate().is_err());
        cfg.backend.url = Some("http://127.0.0.1:9".into());
        cfg.validate().unwrap();
    }

    #[test]
    fn lexicon_overrides_merge() {
        let mut cfg = Config::canonical("data");
        cfg.lexicon.insert("Legal".into(), vec!["statute".into()]);
        let lex = cfg.label_lexicon();
        assert_eq!(lex.terms("Legal").unwrap(), ["statute"]);
        assert!(lex.terms("Usability").is_some());
    }
}
