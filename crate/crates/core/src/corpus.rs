//! Dataset ingestion and task materialization.
//!
//! Datasets use one canonical CSV layout, `id,project,text,<scheme>...`, with
//! one column per labeling scheme. A [`TaskSpec`] selects a scheme and a class
//! roster; [`materialize_task`] filters the requirements down to that roster.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One natural-language requirement with its gold labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Requirement {
    pub id: String,
    pub project: String,
    pub text: String,
    /// Labeling scheme name → class name.
    pub labels: BTreeMap<String, String>,
}

impl Requirement {
    pub fn label(&self, scheme: &str) -> Option<&str> {
        self.labels.get(scheme).map(String::as_str)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Binary,
    Multiclass,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Binary => "binary",
            TaskKind::Multiclass => "multiclass",
        }
    }
}

/// A classification task over one labeling scheme.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: String,
    pub kind: TaskKind,
    pub labeling_scheme: String,
    /// Class roster, in the order candidates are presented.
    pub classes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positive_class: Option<String>,
    /// Surface label shown to classifiers, when it differs from the class name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub display: BTreeMap<String, String>,
}

impl TaskSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(format!("task `{}`: {msg}", self.name)));
        let unique: BTreeSet<&String> = self.classes.iter().collect();
        if unique.len() != self.classes.len() {
            return fail("class names must be unique".into());
        }
        if self.classes.iter().any(|c| c.trim().is_empty()) {
            return fail("class names must be non-empty".into());
        }
        match self.kind {
            TaskKind::Binary => {
                if self.classes.len() != 2 {
                    return fail(format!(
                        "binary task needs exactly 2 classes, got {}",
                        self.classes.len()
                    ));
                }
                match &self.positive_class {
                    Some(p) if self.classes.contains(p) => {}
                    Some(p) => return fail(format!("positive class `{p}` is not in the roster")),
                    None => return fail("binary task needs a positive class".into()),
                }
            }
            TaskKind::Multiclass => {
                if self.classes.len() < 3 {
                    return fail(format!(
                        "multiclass task needs at least 3 classes, got {}",
                        self.classes.len()
                    ));
                }
                if self.positive_class.is_some() {
                    return fail("positive class is only meaningful for binary tasks".into());
                }
            }
        }
        for key in self.display.keys() {
            if !self.classes.contains(key) {
                return fail(format!("display label for unknown class `{key}`"));
            }
        }
        Ok(())
    }

    /// The label string shown to a classifier for `class`.
    pub fn display_label<'a>(&'a self, class: &'a str) -> &'a str {
        self.display.get(class).map(String::as_str).unwrap_or(class)
    }

    /// Index of the non-positive class of a binary task.
    pub(crate) fn negative_index(&self) -> Option<usize> {
        let pos = self.positive_class.as_ref()?;
        self.classes.iter().position(|c| c != pos)
    }
}

/// A task spec bound to the requirements it classifies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskInstance {
    pub spec: TaskSpec,
    pub requirements: Vec<Requirement>,
    pub class_supports: BTreeMap<String, usize>,
    /// Non-fatal observations, e.g. a binary class with zero support.
    pub warnings: Vec<String>,
}

impl TaskInstance {
    pub fn len(&self) -> usize {
        self.requirements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.requirements.is_empty()
    }

    /// Gold class of the requirement at `index`.
    pub fn gold(&self, index: usize) -> &str {
        self.requirements[index]
            .label(&self.spec.labeling_scheme)
            .expect("materialized requirements carry the task scheme")
    }

    pub fn golds(&self) -> Vec<&str> {
        (0..self.len()).map(|i| self.gold(i)).collect()
    }

    pub fn support(&self, class: &str) -> usize {
        self.class_supports.get(class).copied().unwrap_or(0)
    }
}

const BASE_COLUMNS: [&str; 3] = ["id", "project", "text"];

/// Reads a canonical dataset CSV, keeping file order.
pub fn load_dataset(path: impl AsRef<Path>, expected_schemes: &[&str]) -> Result<Vec<Requirement>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(file, path, expected_schemes)
}

pub(crate) fn read_dataset(
    reader: impl std::io::Read,
    path: &Path,
    expected_schemes: &[&str],
) -> Result<Vec<Requirement>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let column = |name: &str| headers.iter().position(|h| h == name);

    for required in BASE_COLUMNS.iter().chain(expected_schemes) {
        if column(required).is_none() {
            return Err(Error::Schema {
                path: path.to_path_buf(),
                column: required.to_string(),
            });
        }
    }
    let (id_col, project_col, text_col) = (
        column("id").unwrap(),
        column("project").unwrap(),
        column("text").unwrap(),
    );
    let schemes: Vec<(usize, &String)> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| !BASE_COLUMNS.contains(&h.as_str()))
        .collect();

    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 2;
        let record = record?;
        let row_err = |message: String| Error::Row {
            path: path.to_path_buf(),
            row,
            message,
        };
        let field = |col: usize| record.get(col).unwrap_or("");

        let id = field(id_col).trim().to_string();
        if id.is_empty() {
            return Err(row_err("empty id".into()));
        }
        let text = field(text_col).to_string();
        if text.trim().is_empty() {
            return Err(row_err("empty text field".into()));
        }
        let mut labels = BTreeMap::new();
        for &(col, scheme) in &schemes {
            let value = field(col).trim();
            if value.is_empty() {
                if expected_schemes.contains(&scheme.as_str()) {
                    return Err(row_err(format!("empty label for scheme `{scheme}`")));
                }
                continue;
            }
            labels.insert(scheme.clone(), value.to_string());
        }
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }
        out.push(Requirement {
            id,
            project: field(project_col).trim().to_string(),
            text,
            labels,
        });
    }
    Ok(out)
}

/// Writes requirements in the canonical layout with the given scheme columns.
pub fn write_dataset(path: impl AsRef<Path>, reqs: &[Requirement], schemes: &[&str]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_dataset_to(file, reqs, schemes)?;
    Ok(())
}

pub(crate) fn write_dataset_to(
    writer: impl std::io::Write,
    reqs: &[Requirement],
    schemes: &[&str],
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let header: Vec<&str> = BASE_COLUMNS.iter().copied().chain(schemes.iter().copied()).collect();
    wtr.write_record(&header)?;
    for r in reqs {
        let mut row = vec![r.id.as_str(), r.project.as_str(), r.text.as_str()];
        row.extend(schemes.iter().map(|s| r.label(s).unwrap_or("")));
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// Keeps the requirements whose gold label is in the task roster.
pub fn materialize_task(reqs: &[Requirement], spec: &TaskSpec) -> Result<TaskInstance> {
    spec.validate()?;
    let mut class_supports: BTreeMap<String, usize> =
        spec.classes.iter().map(|c| (c.clone(), 0)).collect();
    let mut requirements = Vec::new();
    for r in reqs {
        let Some(label) = r.label(&spec.labeling_scheme) else {
            return Err(Error::Config(format!(
                "task `{}`: requirement `{}` has no `{}` label",
                spec.name, r.id, spec.labeling_scheme
            )));
        };
        if let Some(count) = class_supports.get_mut(label) {
            *count += 1;
            requirements.push(r.clone());
        }
    }
    if requirements.is_empty() {
        return Err(Error::Config(format!(
            "task `{}`: no requirement matches the class roster",
            spec.name
        )));
    }
    let warnings = match spec.kind {
        TaskKind::Binary => spec
            .classes
            .iter()
            .filter(|c| class_supports[*c] == 0)
            .map(|c| format!("task `{}`: class `{c}` has zero support", spec.name))
            .collect(),
        TaskKind::Multiclass => Vec::new(),
    };
    Ok(TaskInstance {
        spec: spec.clone(),
        requirements,
        class_supports,
        warnings,
    })
}

/// The ten PROMISE NFR classes kept for the NFR task (Portability is left out).
pub const NFR_CLASSES: [&str; 10] = [
    "Usability",
    "Security",
    "Operational",
    "Performance",
    "Look & Feel",
    "Availability",
    "Scalability",
    "Maintainability",
    "Legal",
    "Fault Tolerance",
];

pub const NFR_TOP4_CLASSES: [&str; 4] = ["Usability", "Security", "Operational", "Performance"];

fn binary(
    name: &str,
    scheme: &str,
    positive: (&str, &str),
    negative: (&str, &str),
) -> TaskSpec {
    TaskSpec {
        name: name.into(),
        kind: TaskKind::Binary,
        labeling_scheme: scheme.into(),
        classes: vec![positive.0.into(), negative.0.into()],
        positive_class: Some(positive.0.into()),
        display: [positive, negative]
            .into_iter()
            .filter(|(class, shown)| class != shown)
            .map(|(class, shown)| (class.to_string(), shown.to_string()))
            .collect(),
    }
}

fn multiclass(name: &str, classes: &[&str]) -> TaskSpec {
    TaskSpec {
        name: name.into(),
        kind: TaskKind::Multiclass,
        labeling_scheme: "promise".into(),
        classes: classes.iter().map(|c| c.to_string()).collect(),
        positive_class: None,
        display: BTreeMap::new(),
    }
}

/// The five canonical tasks, binary tasks first.
pub fn canonical_tasks() -> Vec<TaskSpec> {
    vec![
        binary(
            "Functional",
            "functional",
            ("Functional", "functional"),
            ("NonFunctional", "non-functional"),
        ),
        binary(
            "Quality",
            "quality",
            ("Quality", "quality"),
            ("NonQuality", "non-quality"),
        ),
        binary("Security", "secreq", ("sec", "security"), ("nonsec", "non-security")),
        multiclass("NFR", &NFR_CLASSES),
        multiclass("NFR-Top4", &NFR_TOP4_CLASSES),
    ]
}
