//! Zero-shot classification pipelines.
//!
//! The inference pipeline turns one prompt score per class into a prediction
//! (sigmoid of the score difference for binary tasks, softmax otherwise). The
//! embedding pipeline compares a requirement embedding against one embedding
//! per class lexicon by cosine similarity.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{TaskKind, TaskSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pipeline {
    Inference,
    Embedding,
}

impl Pipeline {
    pub fn as_str(self) -> &'static str {
        match self {
            Pipeline::Inference => "inference",
            Pipeline::Embedding => "embedding",
        }
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Pipeline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inference" => Ok(Pipeline::Inference),
            "embedding" => Ok(Pipeline::Embedding),
            _ => Err(Error::Config(format!("unknown pipeline `{s}`"))),
        }
    }
}

/// Outcome of classifying one requirement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub requirement_id: String,
    /// Per-class raw score in roster order (prompt score or cosine similarity).
    pub raw_scores: Vec<(String, f64)>,
    /// Per-class probability in roster order; cosine similarities for embeddings.
    pub probabilities: Vec<(String, f64)>,
    /// `None` means the embedding pipeline abstained.
    pub predicted: Option<String>,
    pub pipeline: Pipeline,
}

impl Prediction {
    pub fn probability(&self, class: &str) -> Option<f64> {
        self.probabilities.iter().find(|(c, _)| c == class).map(|(_, p)| *p)
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn softmax(zs: &[f64]) -> Result<Vec<f64>> {
    if zs.len() < 2 {
        return Err(Error::Input(format!("softmax needs at least 2 logits, got {}", zs.len())));
    }
    if zs.iter().any(|z| !z.is_finite()) {
        return Err(Error::Input("softmax logits must be finite".into()));
    }
    let max = zs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = zs.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// Index of the first maximum.
fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

fn aligned_scores(spec: &TaskSpec, class_scores: &[(String, f64)]) -> Result<Vec<f64>> {
    spec.classes
        .iter()
        .map(|class| {
            class_scores
                .iter()
                .find(|(c, _)| c == class)
                .map(|(_, s)| *s)
                .ok_or_else(|| Error::Input(format!("missing score for class `{class}`")))
        })
        .collect()
}

/// Prediction from one score per class. Ties go to the earliest roster class.
pub fn predict_inference(
    spec: &TaskSpec,
    requirement_id: &str,
    class_scores: &[(String, f64)],
) -> Result<Prediction> {
    let scores = aligned_scores(spec, class_scores)?;
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::Input(format!("non-finite class score {bad}")));
    }
    let (probabilities, winner) = match spec.kind {
        TaskKind::Binary => {
            let pos = spec
                .classes
                .iter()
                .position(|c| Some(c) == spec.positive_class.as_ref())
                .ok_or_else(|| Error::Config(format!("task `{}` has no positive class", spec.name)))?;
            let neg = spec.negative_index().expect("binary roster has two classes");
            let z = scores[pos] - scores[neg];
            let p_pos = sigmoid(z);
            let mut probs = vec![0.0; 2];
            probs[pos] = p_pos;
            probs[neg] = 1.0 - p_pos;
            let winner = if z > 0.0 {
                pos
            } else if z < 0.0 {
                neg
            } else {
                0
            };
            (probs, winner)
        }
        TaskKind::Multiclass => {
            let probs = softmax(&scores)?;
            let winner = argmax(&scores);
            (probs, winner)
        }
    };
    let name = |i: usize| spec.classes[i].clone();
    Ok(Prediction {
        requirement_id: requirement_id.to_string(),
        raw_scores: (0..scores.len()).map(|i| (name(i), scores[i])).collect(),
        probabilities: (0..scores.len()).map(|i| (name(i), probabilities[i])).collect(),
        predicted: Some(name(winner)),
        pipeline: Pipeline::Inference,
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Input(format!(
            "cosine of vectors with dimensions {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Input("cosine of a zero vector".into()));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum EmbeddingMode {
    Argmax,
    /// Abstain unless the best similarity is strictly above the threshold.
    Threshold { threshold: f64 },
}

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Nearest-label classification by cosine similarity.
pub fn classify_embedding(
    requirement_id: &str,
    req_vec: &[f64],
    label_vecs: &[(String, Vec<f64>)],
    mode: EmbeddingMode,
) -> Result<Prediction> {
    if label_vecs.is_empty() {
        return Err(Error::Input("no label vectors".into()));
    }
    let sims = label_vecs
        .iter()
        .map(|(_, v)| cosine(req_vec, v))
        .collect::<Result<Vec<_>>>()?;
    let best = argmax(&sims);
    let predicted = match mode {
        EmbeddingMode::Threshold { threshold } if sims[best] <= threshold => None,
        _ => Some(label_vecs[best].0.clone()),
    };
    let pairs: Vec<(String, f64)> = label_vecs
        .iter()
        .zip(&sims)
        .map(|((c, _), s)| (c.clone(), *s))
        .collect();
    Ok(Prediction {
        requirement_id: requirement_id.to_string(),
        raw_scores: pairs.clone(),
        probabilities: pairs,
        predicted,
        pipeline: Pipeline::Embedding,
    })
}

/// Mean of the term embeddings, L2-normalized.
pub fn label_vector<F>(terms: &[String], embed: F) -> Result<Vec<f64>>
where
    F: FnOnce(&[String]) -> Result<Vec<Vec<f64>>>,
{
    if terms.is_empty() {
        return Err(Error::Input("label lexicon has no terms".into()));
    }
    let vectors = embed(terms)?;
    let dim = vectors.first().map_or(0, Vec::len);
    if vectors.len() != terms.len() || vectors.iter().any(|v| v.len() != dim) || dim == 0 {
        return Err(Error::Protocol("inconsistent term embeddings".into()));
    }
    let mut mean = vec![0.0; dim];
    for v in &vectors {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x / vectors.len() as f64;
        }
    }
    let n = norm(&mean);
    if n == 0.0 {
        return Err(Error::Input("label terms embed to a zero vector".into()));
    }
    mean.iter_mut().for_each(|x| *x /= n);
    Ok(mean)
}

/// Class name → hand-curated terms describing the class.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelLexicon {
    pub entries: BTreeMap<String, Vec<String>>,
}

impl LabelLexicon {
    pub fn terms(&self, class: &str) -> Option<&[String]> {
        self.entries.get(class).map(Vec::as_slice)
    }

    pub fn check_covers(&self, spec: &TaskSpec) -> Result<()> {
        for class in &spec.classes {
            match self.terms(class) {
                Some(terms) if !terms.is_empty() && terms.iter().all(|t| !t.trim().is_empty()) => {}
                _ => return Err(Error::Lexicon(class.clone())),
            }
        }
        Ok(())
    }

    /// Built-in term lists for every class of the canonical tasks.
    ///
    /// The Functional and Quality lists are the published expert-curated
    /// terms; the remaining lists are authored for this harness.
    pub fn builtin() -> Self {
        let entries: [(&str, &[&str]); 16] = [
            ("Functional", &["functional", "system", "behavior", "shall", "must"]),
            ("NonFunctional", &["non-functional", "quality", "constraint", "performance", "usability", "security", "reliability"]),
            ("Quality", &["quality", "performance", "efficiency", "reliability"]),
            ("NonQuality", &["feature", "function", "display", "record", "allow", "behavior"]),
            ("sec", &["security", "secure", "encrypt", "authentication", "authorized", "access", "password", "protect"]),
            ("nonsec", &["function", "display", "transaction", "interface", "process", "report"]),
            ("Usability", &["usability", "easy", "ease", "learn", "intuitive", "user", "help"]),
            ("Security", &["security", "secure", "encrypt", "authentication", "authorized", "access", "password", "protect"]),
            ("Operational", &["operational", "operate", "environment", "platform", "install", "run"]),
            ("Performance", &["performance", "fast", "seconds", "response", "time", "throughput"]),
            ("Look & Feel", &["look", "feel", "appearance", "color", "style", "interface"]),
            ("Availability", &["availability", "available", "uptime", "hours", "downtime"]),
            ("Scalability", &["scalability", "scale", "concurrent", "users", "growth", "increase"]),
            ("Maintainability", &["maintainability", "maintain", "update", "modify", "modular"]),
            ("Legal", &["legal", "law", "regulation", "comply", "compliance", "license"]),
            ("Fault Tolerance", &["fault", "tolerance", "failure", "recover", "backup", "error"]),
        ];
        LabelLexicon {
            entries: entries
                .into_iter()
                .map(|(k, v)| (k.to_string(), v.iter().map(|t| t.to_string()).collect()))
                .collect(),
        }
    }
}
