//! Setting execution with per-setting prediction files and resumable checkpoints.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{BackendKind, Config, ModelConfig};
use super::grid::{plan_grid, ExperimentSetting, FamilyFilter};
use super::predictions::{PredictionTable, RowWriter};
use crate::backend::{Backend, HttpBackend, MockBackend, RetryPolicy, ScoreRequest, DEFAULT_EMBED_DIM};
use crate::corpus::{load_dataset, materialize_task, TaskInstance, TaskSpec};
use crate::error::{Error, Result};
use crate::metrics::MetricReport;
use crate::prompts::{candidate_prompts, DefinitionLexicon, Family, PatternId, PromptPattern};
use crate::variations::{TextVariations, VariationKind};
use crate::zsl::{classify_embedding, label_vector, predict_inference, EmbeddingMode, LabelLexicon, Pipeline, Prediction};

/// Requirements classified between two checkpoints.
pub const DEFAULT_CHUNK_SIZE: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub setting: ExperimentSetting,
    pub report: MetricReport,
    pub predictions_path: PathBuf,
    /// Zero when the result was loaded from a previous run.
    pub wall_time: Duration,
    pub backend_calls: u64,
    pub n: usize,
}

/// Persisted next to the predictions once a setting completes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingMeta {
    pub setting: ExperimentSetting,
    pub n: usize,
    pub backend_calls: u64,
    pub report: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Checkpoint {
    setting: String,
    completed: usize,
    backend_calls: u64,
}

/// File locations inside a results directory.
#[derive(Debug, Clone)]
pub struct RunLayout {
    root: PathBuf,
}

impl RunLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RunLayout { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn predictions(&self, id: &str) -> PathBuf {
        self.root.join("predictions").join(format!("{id}.csv"))
    }

    fn partial(&self, id: &str) -> PathBuf {
        self.root.join("predictions").join(format!("{id}.csv.partial"))
    }

    fn checkpoint(&self, id: &str) -> PathBuf {
        self.root.join("predictions").join(format!("{id}.ckpt.json"))
    }

    pub fn meta(&self, id: &str) -> PathBuf {
        self.root.join("settings").join(format!("{id}.json"))
    }

    pub fn results_csv(&self) -> PathBuf {
        self.root.join("results.csv")
    }

    fn create_dirs(&self) -> Result<()> {
        for sub in ["predictions", "settings"] {
            let dir = self.root.join(sub);
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        Ok(())
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let body = serde_json::to_string_pretty(value).expect("plain data serializes");
    std::fs::write(&tmp, body + "\n").map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

/// Surface label and class name of every task class → label-lexicon terms.
pub fn mock_label_terms(specs: &[TaskSpec], lexicon: &LabelLexicon) -> Vec<(String, Vec<String>)> {
    let mut out = Vec::new();
    for spec in specs {
        for class in &spec.classes {
            if let Some(terms) = lexicon.terms(class) {
                out.push((spec.display_label(class).to_string(), terms.to_vec()));
                out.push((class.clone(), terms.to_vec()));
            }
        }
    }
    out
}

/// The mock backend a model alias resolves to.
pub fn mock_backend(config: &Config, model: &ModelConfig) -> MockBackend {
    let pairs = mock_label_terms(&config.task_specs(), &config.label_lexicon());
    MockBackend::new(pairs.iter().map(|(l, t)| (l.as_str(), t.as_slice())))
        .with_dim(model.dim.unwrap_or(DEFAULT_EMBED_DIM))
        .with_salt(model.salt.clone().unwrap_or_default())
}

/// Loaded tasks, prompt patterns, lexicons and backends for one config.
pub struct Harness {
    config: Config,
    tasks: BTreeMap<String, TaskInstance>,
    patterns: BTreeMap<PatternId, PromptPattern>,
    definitions: DefinitionLexicon,
    labels: LabelLexicon,
    text_variations: TextVariations,
    embedding_mode: EmbeddingMode,
    backends: BTreeMap<String, Arc<dyn Backend>>,
    pool: rayon::ThreadPool,
    chunk_size: usize,
    warnings: Vec<String>,
}

impl Harness {
    pub fn from_config(config: Config) -> Result<Self> {
        config.validate()?;
        let grid_tasks = config.grid_tasks()?;
        let mut datasets = BTreeMap::new();
        let mut tasks = BTreeMap::new();
        let mut warnings = Vec::new();
        for spec in &grid_tasks {
            let name = config.dataset_for_scheme(&spec.labeling_scheme)?;
            if !datasets.contains_key(name) {
                let ds = &config.datasets[name];
                let schemes: Vec<&str> = ds.schemes.iter().map(String::as_str).collect();
                datasets.insert(name.to_string(), load_dataset(config.resolve(&ds.path), &schemes)?);
            }
            let instance = materialize_task(&datasets[name], spec)?;
            warnings.extend(instance.warnings.iter().cloned());
            tasks.insert(spec.name.clone(), instance);
        }

        let patterns: BTreeMap<PatternId, PromptPattern> =
            config.patterns()?.into_iter().map(|p| (p.id, p)).collect();
        let definitions = config.definitions();
        let labels = config.label_lexicon();
        let has_model = |p: Pipeline| config.models.iter().any(|m| m.pipeline == p);
        if has_model(Pipeline::Inference) && patterns.keys().any(|p| p.family == Family::Definition) {
            for spec in &grid_tasks {
                definitions.check_covers(spec)?;
            }
        }
        if has_model(Pipeline::Embedding) {
            for spec in &grid_tasks {
                labels.check_covers(spec)?;
            }
        }

        let policy = RetryPolicy {
            retries: config.backend.retries,
            initial_backoff: Duration::from_millis(config.backend.initial_backoff_ms),
        };
        let mut backends: BTreeMap<String, Arc<dyn Backend>> = BTreeMap::new();
        for model in &config.models {
            let backend: Arc<dyn Backend> = match model.backend {
                BackendKind::Mock => Arc::new(mock_backend(&config, model)),
                BackendKind::Http => {
                    let url = model.url.as_ref().or(config.backend.url.as_ref()).expect("validated");
                    Arc::new(HttpBackend::new(url, policy)?)
                }
            };
            backends.insert(model.id.clone(), backend);
        }

        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.backend.parallelism)
            .build()
            .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;

        Ok(Harness {
            text_variations: config.text_variations(),
            embedding_mode: config.embedding.mode(),
            config,
            tasks,
            patterns,
            definitions,
            labels,
            backends,
            pool,
            chunk_size: DEFAULT_CHUNK_SIZE,
            warnings,
        })
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    /// Replaces the backend behind a model alias, e.g. with a test double.
    pub fn set_backend(&mut self, model_id: &str, backend: Arc<dyn Backend>) -> Result<()> {
        self.config.model(model_id)?;
        self.backends.insert(model_id.to_string(), backend);
        Ok(())
    }

    pub fn with_chunk_size(mut self, chunk_size: usize) -> Self {
        self.chunk_size = chunk_size.max(1);
        self
    }

    pub fn task(&self, name: &str) -> Result<&TaskInstance> {
        self.tasks
            .get(name)
            .ok_or_else(|| Error::Config(format!("task `{name}` is not loaded")))
    }

    /// Dataset notes, e.g. binary classes without support.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn plan(&self, family: FamilyFilter, pipeline: Option<Pipeline>) -> Result<Vec<ExperimentSetting>> {
        plan_grid(&self.config, family, pipeline)
    }

    fn backend(&self, model_id: &str) -> Result<&dyn Backend> {
        self.backends
            .get(model_id)
            .map(|b| b.as_ref())
            .ok_or_else(|| Error::Config(format!("unknown model `{model_id}`")))
    }

    /// Classifies requirement `i` by prompt scoring; returns the number of
    /// score requests issued (one per distinct prompt context).
    fn classify_inference(
        &self,
        backend: &dyn Backend,
        model: &ModelConfig,
        task: &TaskInstance,
        pattern: &PromptPattern,
        variation: VariationKind,
        i: usize,
    ) -> Result<(Prediction, u64)> {
        let req = &task.requirements[i];
        let text = if variation.is_text() {
            self.text_variations.apply(&req.text, variation)?
        } else {
            req.text.clone()
        };
        let label_variation = variation.is_label().then_some(variation);
        let candidates = candidate_prompts(&task.spec, &text, pattern, label_variation, Some(&self.definitions))?;

        let mut groups: Vec<(&str, Vec<usize>)> = Vec::new();
        for (ci, (_, prompt)) in candidates.iter().enumerate() {
            match groups.iter_mut().find(|(ctx, _)| *ctx == prompt.context) {
                Some((_, members)) => members.push(ci),
                None => groups.push((&prompt.context, vec![ci])),
            }
        }
        let mut scores = vec![0.0; candidates.len()];
        for (context, members) in &groups {
            let request = ScoreRequest {
                context: context.to_string(),
                continuations: members.iter().map(|&m| candidates[m].1.continuation.clone()).collect(),
                normalize: model.normalize,
            };
            let response = backend.score(&request)?;
            response.check_against(&request)?;
            for (&m, s) in members.iter().zip(response.scores) {
                scores[m] = s;
            }
        }
        let class_scores: Vec<(String, f64)> = candidates
            .iter()
            .zip(scores)
            .map(|((class, _), s)| (class.clone(), s))
            .collect();
        Ok((predict_inference(&task.spec, &req.id, &class_scores)?, groups.len() as u64))
    }

    fn label_vectors(&self, backend: &dyn Backend, spec: &TaskSpec) -> Result<Vec<(String, Vec<f64>)>> {
        spec.classes
            .iter()
            .map(|class| {
                let terms = self.labels.terms(class).ok_or_else(|| Error::Lexicon(class.clone()))?;
                let v = label_vector(terms, |t| {
                    let resp = backend.embed(t)?;
                    resp.check_against(t)?;
                    Ok(resp.vectors)
                })?;
                Ok((class.clone(), v))
            })
            .collect()
    }

    fn classify_embedded(
        &self,
        backend: &dyn Backend,
        task: &TaskInstance,
        label_vecs: &[(String, Vec<f64>)],
        i: usize,
    ) -> Result<(Prediction, u64)> {
        let req = &task.requirements[i];
        let texts = [req.text.clone()];
        let resp = backend.embed(&texts)?;
        resp.check_against(&texts)?;
        let p = classify_embedding(&req.id, &resp.vectors[0], label_vecs, self.embedding_mode)?;
        Ok((p, 1))
    }

    /// Runs one setting, writing `predictions/<id>.csv` and `settings/<id>.json`
    /// under `out_dir`.
    ///
    /// With `resume`, a completed setting is loaded instead of rerun and a
    /// partial one continues from its checkpoint.
    pub fn run_setting(&self, setting: &ExperimentSetting, out_dir: &Path, resume: bool) -> Result<ExperimentResult> {
        setting.validate()?;
        let layout = RunLayout::new(out_dir);
        layout.create_dirs()?;
        let id = setting.id();
        let final_path = layout.predictions(&id);
        let meta_path = layout.meta(&id);
        if resume && final_path.exists() && meta_path.exists() {
            let meta: SettingMeta = read_json(&meta_path)?;
            if &meta.setting == setting {
                // JSON floats need not round-trip; the predictions file is authoritative
                let report = PredictionTable::load(&final_path)?.report()?;
                return Ok(ExperimentResult {
                    setting: meta.setting,
                    report,
                    predictions_path: final_path,
                    wall_time: Duration::ZERO,
                    backend_calls: meta.backend_calls,
                    n: meta.n,
                });
            }
        }

        let started = Instant::now();
        let task = self.task(&setting.task)?;
        let model = self.config.model(&setting.model_id)?;
        if model.pipeline != setting.pipeline {
            return Err(Error::Input(format!("setting `{id}` does not match model `{}`", model.id)));
        }
        let backend = self.backend(&setting.model_id)?;
        let partial = layout.partial(&id);
        let ckpt_path = layout.checkpoint(&id);

        let resumed = if resume && partial.exists() && ckpt_path.exists() {
            let ckpt: Checkpoint = read_json(&ckpt_path)?;
            if ckpt.setting != id || ckpt.completed > task.len() {
                return Err(Error::Input(format!("{}: checkpoint does not match setting", ckpt_path.display())));
            }
            super::predictions::truncate_rows(&partial, ckpt.completed)?;
            Some(ckpt)
        } else {
            None
        };
        let (start, mut calls, mut writer) = match resumed {
            Some(ckpt) => {
                let file = OpenOptions::new()
                    .append(true)
                    .open(&partial)
                    .map_err(|e| Error::io(&partial, e))?;
                (ckpt.completed, ckpt.backend_calls, RowWriter::new(file, None)?)
            }
            None => {
                let file = File::create(&partial).map_err(|e| Error::io(&partial, e))?;
                let mut w = RowWriter::new(file, Some(&task.spec.classes))?;
                w.flush(&partial)?;
                (0, 0, w)
            }
        };
        let checkpoint = |completed: usize, backend_calls: u64| {
            write_json(
                &ckpt_path,
                &Checkpoint {
                    setting: id.clone(),
                    completed,
                    backend_calls,
                },
            )
        };
        checkpoint(start, calls)?;

        let (label_vecs, label_calls) = match setting.pipeline {
            Pipeline::Embedding => {
                let v = self.label_vectors(backend, &task.spec)?;
                let k = v.len() as u64;
                (v, k)
            }
            Pipeline::Inference => (Vec::new(), 0),
        };
        let pattern = match setting.pattern {
            Some(p) => Some(
                self.patterns
                    .get(&p)
                    .ok_or_else(|| Error::Config(format!("pattern `{p}` is not configured")))?,
            ),
            None => None,
        };
        let classify = |i: usize| match (pattern, setting.variation) {
            (Some(pattern), Some(variation)) => self.classify_inference(backend, model, task, pattern, variation, i),
            _ => self.classify_embedded(backend, task, &label_vecs, i),
        };

        let mut lo = start;
        while lo < task.len() {
            let hi = (lo + self.chunk_size).min(task.len());
            let outcomes: Vec<Result<(Prediction, u64)>> =
                self.pool.install(|| (lo..hi).into_par_iter().map(classify).collect());
            let mut failure = None;
            let mut done = lo;
            for (i, outcome) in (lo..hi).zip(outcomes) {
                match outcome {
                    Ok((p, c)) => {
                        writer.write(i, task.gold(i), &p)?;
                        calls += c;
                        done = i + 1;
                    }
                    Err(e) => {
                        failure = Some(e);
                        break;
                    }
                }
            }
            writer.flush(&partial)?;
            checkpoint(done, calls)?;
            if let Some(e) = failure {
                return Err(e);
            }
            lo = hi;
        }
        drop(writer);

        std::fs::rename(&partial, &final_path).map_err(|e| Error::io(&final_path, e))?;
        std::fs::remove_file(&ckpt_path).map_err(|e| Error::io(&ckpt_path, e))?;
        let table = PredictionTable::load(&final_path)?;
        if table.len() != task.len() {
            return Err(Error::Input(format!(
                "{}: {} rows for {} requirements",
                final_path.display(),
                table.len(),
                task.len()
            )));
        }
        let report = table.report()?;
        let meta = SettingMeta {
            setting: setting.clone(),
            n: task.len(),
            backend_calls: calls + label_calls,
            report,
        };
        write_json(&meta_path, &meta)?;
        Ok(ExperimentResult {
            setting: meta.setting,
            report: meta.report,
            predictions_path: final_path,
            wall_time: started.elapsed(),
            backend_calls: meta.backend_calls,
            n: meta.n,
        })
    }

    /// Runs settings in order, stopping at the first failure. `observer` sees
    /// each finished setting with its position in `settings`.
    pub fn run_settings(
        &self,
        settings: &[ExperimentSetting],
        out_dir: &Path,
        resume: bool,
        mut observer: impl FnMut(usize, &ExperimentResult),
    ) -> Result<Vec<ExperimentResult>> {
        let mut results = Vec::with_capacity(settings.len());
        for (i, setting) in settings.iter().enumerate() {
            let result = self.run_setting(setting, out_dir, resume)?;
            observer(i, &result);
            results.push(result);
        }
        Ok(results)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::write_dataset;
    use crate::corpus::Requirement;

    fn tiny_config(dir: &Path) -> Config {
        let reqs: Vec<Requirement> = (0..10)
            .map(|i| Requirement {
                id: format!("S{i}"),
                project: "p".into(),
                text: if i % 2 == 0 {
                    format!("The system shall encrypt password {i} for authorized access.")
                } else {
                    format!("The system shall display report {i}")
                },
                labels: [("secreq".to_string(), if i % 2 == 0 { "sec" } else { "nonsec" }.to_string())].into(),
            })
            .collect();
        write_dataset(dir.join("secreq.csv"), &reqs, &["secreq"]).unwrap();
        let mut cfg = Config::canonical(dir);
        cfg.datasets.retain(|k, _| k == "secreq");
        cfg.grid.tasks = Some(vec!["Security".into()]);
        cfg.tasks = crate::corpus::canonical_tasks()
            .into_iter()
            .filter(|t| t.name == "Security")
            .collect();
        cfg
    }

    #[test]
    fn inference_setting_end_to_end() {
        let dir = tempfile::tempdir().unwrap();
        let harness = Harness::from_config(tiny_config(dir.path())).unwrap().with_chunk_size(3);
        let grid = harness.plan(FamilyFilter::All, None).unwrap();
        assert_eq!(grid.len(), 3 * 30 + 2);
        let out = dir.path().join("out");
        let r = harness.run_setting(&grid[0], &out, false).unwrap();
        assert_eq!(r.n, 10);
        // assertion patterns share one context across both classes
        assert_eq!(r.backend_calls, 10);
        assert!(r.report.weighted.f1 > 0.5, "{:?}", r.report.weighted);
        assert!(r.predictions_path.exists());
        let qa = grid
            .iter()
            .find(|s| s.pattern.map(|p| p.family) == Some(Family::QA))
            .unwrap();
        assert_eq!(harness.run_setting(qa, &out, false).unwrap().backend_calls, 20);
    }

    #[test]
    fn embedding_setting_counts_label_calls() {
        let dir = tempfile::tempdir().unwrap();
        let harness = Harness::from_config(tiny_config(dir.path())).unwrap();
        let grid = harness.plan(FamilyFilter::All, Some(Pipeline::Embedding)).unwrap();
        let r = harness.run_setting(&grid[0], &dir.path().join("out"), false).unwrap();
        assert_eq!(r.backend_calls, 12);
    }

    struct FailAfter {
        inner: MockBackend,
        left: std::sync::atomic::AtomicI64,
    }

    impl Backend for FailAfter {
        fn score(&self, req: &ScoreRequest) -> Result<crate::backend::ScoreResponse> {
            if self.left.fetch_sub(1, std::sync::atomic::Ordering::SeqCst) <= 0 {
                return Err(Error::BackendUnavailable {
                    attempts: 3,
                    message: "injected".into(),
                });
            }
            self.inner.score(req)
        }

        fn embed(&self, texts: &[String]) -> Result<crate::backend::EmbedResponse> {
            self.inner.embed(texts)
        }
    }

    #[test]
    fn resume_matches_uninterrupted_run() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path());
        let clean = Harness::from_config(cfg.clone()).unwrap().with_chunk_size(4);
        let setting = clean.plan(FamilyFilter::All, None).unwrap()[0].clone();
        let a = clean.run_setting(&setting, &dir.path().join("a"), false).unwrap();

        let mut serial = cfg.clone();
        serial.backend.parallelism = 1;
        let mut flaky = Harness::from_config(serial).unwrap().with_chunk_size(4);
        let inner = mock_backend(&cfg, cfg.model("bloom-mock").unwrap());
        flaky
            .set_backend(
                "bloom-mock",
                Arc::new(FailAfter {
                    inner,
                    left: 6.into(),
                }),
            )
            .unwrap();
        let out_b = dir.path().join("b");
        let err = flaky.run_setting(&setting, &out_b, false).unwrap_err();
        assert!(matches!(err, Error::BackendUnavailable { .. }));
        let ckpt: Checkpoint = read_json(&RunLayout::new(&out_b).checkpoint(&setting.id())).unwrap();
        assert_eq!(ckpt.completed, 6);

        let b = clean.run_setting(&setting, &out_b, true).unwrap();
        assert_eq!(a.report, b.report);
        assert_eq!(a.backend_calls, b.backend_calls);
        assert_eq!(
            std::fs::read(&a.predictions_path).unwrap(),
            std::fs::read(&b.predictions_path).unwrap()
        );
        // a finished setting is loaded, not rerun
        let again = flaky.run_setting(&setting, &out_b, true).unwrap();
        assert_eq!(again.wall_time, Duration::ZERO);
        assert_eq!(again.report, a.report);
    }

    #[test]
    fn parallelism_does_not_change_output() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config(dir.path());
        cfg.backend.parallelism = 1;
        let serial = Harness::from_config(cfg.clone()).unwrap();
        cfg.backend.parallelism = 8;
        let parallel = Harness::from_config(cfg).unwrap().with_chunk_size(5);
        let setting = serial.plan(FamilyFilter::All, None).unwrap()[7].clone();
        let a = serial.run_setting(&setting, &dir.path().join("a"), false).unwrap();
        let b = parallel.run_setting(&setting, &dir.path().join("b"), false).unwrap();
        assert_eq!(
            std::fs::read(a.predictions_path).unwrap(),
            std::fs::read(b.predictions_path).unwrap()
        );
    }
}
