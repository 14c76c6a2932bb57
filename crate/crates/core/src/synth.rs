//! Deterministic synthetic corpora in the canonical CSV layout.
//!
//! The public requirement datasets cannot be redistributed with this crate, so
//! the bundled `data/` files are generated here. They reproduce the class
//! rosters and supports of the original corpora with template-built texts,
//! which is enough to exercise the whole grid offline. Users with the real
//! files pre-convert them to the same layout and point the config at them.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{write_dataset_to, Requirement};
use crate::error::{Error, Result};

pub const DEFAULT_SEED: u64 = 20_240_917;

/// PROMISE NFR class supports, including the functional class and Portability.
pub const PROMISE_SUPPORTS: [(&str, usize); 12] = [
    ("Functional", 255),
    ("Usability", 67),
    ("Security", 66),
    ("Operational", 62),
    ("Performance", 54),
    ("Look & Feel", 38),
    ("Availability", 21),
    ("Scalability", 21),
    ("Maintainability", 17),
    ("Legal", 13),
    ("Fault Tolerance", 10),
    ("Portability", 1),
];

pub const SECREQ_SUPPORTS: [(&str, usize); 2] = [("sec", 187), ("nonsec", 323)];

/// (functional label, quality label, count) over the 956 Functional-Quality rows.
pub const FUNCTIONAL_QUALITY_CELLS: [(&str, &str, usize); 4] = [
    ("Functional", "Quality", 200),
    ("Functional", "NonQuality", 378),
    ("NonFunctional", "Quality", 322),
    ("NonFunctional", "NonQuality", 56),
];

const SUBJECTS: &[&str] = &["The system", "The product", "The application", "The website", "The software"];
const OBJECTS: &[&str] = &[
    "reports", "invoices", "customer records", "orders", "schedules", "accounts", "messages",
    "appointments", "lecture notes", "meeting minutes", "player statistics", "shipments",
];
const VERBS: &[&str] = &[
    "create", "update", "delete", "view", "search", "print", "export", "import", "submit", "approve",
];

fn fragments(class: &str) -> &'static [&'static str] {
    match class {
        "Functional" | "NonQuality" | "nonsec" => &[
            "allow the user to {verb} {object}",
            "display a list of all {object}",
            "record each change to {object} in the history",
            "notify the manager when new {object} are submitted",
            "let the clerk {verb} {object} from the main menu",
            "generate a monthly summary of {object}",
            "send a confirmation message after the user submits {object}",
            "calculate the total cost of selected {object}",
        ],
        "Usability" => &[
            "be easy to learn for first-time users",
            "provide online help on every screen",
            "be intuitive so that users can {verb} {object} without training",
            "let a new user learn the main functions within 10 minutes",
            "use consistent navigation to ease use",
        ],
        "Security" | "sec" => &[
            "only allow authorized users to access {object}",
            "encrypt all {object} stored in the database",
            "require a password of at least 8 characters",
            "log every failed authentication attempt",
            "protect {object} from unauthorized modification",
            "ensure secure transmission of {object} over the network",
        ],
        "Operational" => &[
            "run on the existing Windows and Linux platform",
            "operate in the hospital network environment",
            "be installed by the administrator without vendor support",
            "operate with the current database server",
        ],
        "Performance" => &[
            "respond to any search within {n} seconds",
            "process {n} transactions per second",
            "load the main screen in less than {n} seconds",
            "support a throughput of {n} requests per minute",
            "refresh the display every {n} seconds",
        ],
        "Look & Feel" => &[
            "use the corporate color scheme",
            "have a professional appearance",
            "follow the university style guide for the interface",
            "display the company logo with a consistent look and feel",
        ],
        "Availability" => &[
            "be available 24 hours a day, 7 days a week",
            "achieve 99.{n} percent uptime",
            "limit scheduled downtime to {n} hours per month",
        ],
        "Scalability" => &[
            "scale to support {n}000 concurrent users",
            "handle growth of {n}0 percent per year",
            "support an increase in stored {object} without redesign",
        ],
        "Maintainability" => &[
            "be easy to maintain by the support team",
            "allow modules to be updated independently",
            "let administrators modify business rules without code changes",
        ],
        "Legal" => &[
            "comply with the state privacy law",
            "meet every regulation that applies to {object}",
            "retain {object} for {n} years as required by law",
            "display the license terms before first use",
        ],
        "Fault Tolerance" => &[
            "recover from a server failure within {n} minutes",
            "continue operating when a network error occurs",
            "create a backup of all {object} every {n} hours",
        ],
        "Portability" => &["be portable to other operating systems"],
        "Quality" | "NonFunctional" => &[
            "respond within {n} seconds under normal load",
            "be easy to use for all staff",
            "only allow authorized users to access {object}",
            "be available 24 hours a day",
            "recover from a failure without losing {object}",
            "ensure the reliability of {object} processing",
        ],
        _ => &["handle {object}"],
    }
}

/// Constraints that are neither functional nor quality-related.
const PLAIN_CONSTRAINTS: &[&str] = &[
    "be written in Java",
    "be delivered before the end of the semester",
    "reuse the existing {object} schema",
    "be developed with the approved toolchain",
];

/// Phrases mixing a function with a quality qualifier.
const QUALIFIED_FUNCTIONS: &[&str] = &[
    "allow the user to {verb} {object} within {n} seconds",
    "let only authorized users {verb} {object}",
    "make it easy to {verb} {object}",
    "{verb} {object} reliably even when the network fails",
];

struct Writer {
    rng: ChaCha8Rng,
}

impl Writer {
    fn fill(&mut self, template: &str) -> String {
        let mut out = template.to_string();
        while let Some(at) = out.find("{object}") {
            let o = OBJECTS.choose(&mut self.rng).unwrap();
            out.replace_range(at..at + 8, o);
        }
        while let Some(at) = out.find("{verb}") {
            let v = VERBS.choose(&mut self.rng).unwrap();
            out.replace_range(at..at + 6, v);
        }
        while let Some(at) = out.find("{n}") {
            let n = self.rng.random_range(2..10).to_string();
            out.replace_range(at..at + 3, &n);
        }
        out
    }

    fn sentence(&mut self, main: &[&str], noise_pool: &[&str]) -> String {
        let subject = *SUBJECTS.choose(&mut self.rng).unwrap();
        let pick = *main.choose(&mut self.rng).unwrap();
        let clause = self.fill(pick);
        let mut text = format!("{subject} shall {clause}");
        if self.rng.random_bool(0.25) && !noise_pool.is_empty() {
            let pick = *noise_pool.choose(&mut self.rng).unwrap();
            let extra = self.fill(pick);
            text.push_str(", and it shall ");
            text.push_str(&extra);
        }
        if self.rng.random_bool(0.15) {
            text = format!("Note: {}", text);
        }
        if self.rng.random_bool(0.7) {
            text.push('.');
        }
        text
    }
}

fn noise_for(class: &str) -> Vec<&'static str> {
    PROMISE_SUPPORTS
        .iter()
        .filter(|(c, _)| *c != class)
        .flat_map(|(c, _)| fragments(c).iter().copied())
        .collect()
}

fn finish(mut rows: Vec<(String, BTreeMap<String, String>)>, prefix: &str, projects: &[&str], rng: &mut ChaCha8Rng) -> Vec<Requirement> {
    rows.shuffle(rng);
    rows.into_iter()
        .enumerate()
        .map(|(i, (text, labels))| Requirement {
            id: format!("{prefix}-{:04}", i + 1),
            project: projects[i % projects.len()].to_string(),
            text,
            labels,
        })
        .collect()
}

fn labels(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

pub fn promise(seed: u64) -> Vec<Requirement> {
    let mut w = Writer {
        rng: ChaCha8Rng::seed_from_u64(seed),
    };
    let mut rows = Vec::new();
    for (class, count) in PROMISE_SUPPORTS {
        let noise = noise_for(class);
        for _ in 0..count {
            rows.push((w.sentence(fragments(class), &noise), labels(&[("promise", class)])));
        }
    }
    let projects: Vec<String> = (1..=15).map(|p| format!("P{p}")).collect();
    let projects: Vec<&str> = projects.iter().map(String::as_str).collect();
    finish(rows, "PROMISE", &projects, &mut w.rng)
}

pub fn secreq(seed: u64) -> Vec<Requirement> {
    let mut w = Writer {
        rng: ChaCha8Rng::seed_from_u64(seed ^ 0x5ec),
    };
    let mut rows = Vec::new();
    for (class, count) in SECREQ_SUPPORTS {
        let other = if class == "sec" { "nonsec" } else { "sec" };
        for _ in 0..count {
            rows.push((w.sentence(fragments(class), fragments(other)), labels(&[("secreq", class)])));
        }
    }
    finish(rows, "SECREQ", &["ePurse", "CPN", "GPS"], &mut w.rng)
}

pub fn functional_quality(seed: u64) -> Vec<Requirement> {
    let mut w = Writer {
        rng: ChaCha8Rng::seed_from_u64(seed ^ 0xf9),
    };
    let mut rows = Vec::new();
    for (functional, quality, count) in FUNCTIONAL_QUALITY_CELLS {
        let pool: &[&str] = match (functional, quality) {
            ("Functional", "Quality") => QUALIFIED_FUNCTIONS,
            ("Functional", _) => fragments("Functional"),
            (_, "Quality") => fragments("Quality"),
            _ => PLAIN_CONSTRAINTS,
        };
        for _ in 0..count {
            rows.push((
                w.sentence(pool, PLAIN_CONSTRAINTS),
                labels(&[("functional", functional), ("quality", quality)]),
            ));
        }
    }
    finish(
        rows,
        "FQ",
        &["PROMISE", "Dronology", "Wasp", "Leeds", "ReqView"],
        &mut w.rng,
    )
}

/// The bundled dataset files: (file name, scheme columns, rows).
pub fn bundled(seed: u64) -> Vec<(&'static str, Vec<&'static str>, Vec<Requirement>)> {
    vec![
        ("promise.csv", vec!["promise"], promise(seed)),
        ("secreq.csv", vec!["secreq"], secreq(seed)),
        (
            "functional_quality.csv",
            vec!["functional", "quality"],
            functional_quality(seed),
        ),
    ]
}

/// Renders one bundled dataset to canonical CSV bytes.
pub fn to_csv_bytes(reqs: &[Requirement], schemes: &[&str]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_dataset_to(&mut buf, reqs, schemes)?;
    Ok(buf)
}

/// Writes all bundled datasets into `dir`.
pub fn write_bundled(dir: impl AsRef<Path>, seed: u64) -> Result<Vec<std::path::PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for (name, schemes, rows) in bundled(seed) {
        let path = dir.join(name);
        std::fs::write(&path, to_csv_bytes(&rows, &schemes)?).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count(reqs: &[Requirement], scheme: &str, class: &str) -> usize {
        reqs.iter().filter(|r| r.label(scheme) == Some(class)).count()
    }

    #[test]
    fn promise_supports() {
        let reqs = promise(DEFAULT_SEED);
        assert_eq!(reqs.len(), 625);
        for (class, n) in PROMISE_SUPPORTS {
            assert_eq!(count(&reqs, "promise", class), n, "{class}");
        }
    }

    #[test]
    fn secreq_and_functional_quality_supports() {
        let sec = secreq(DEFAULT_SEED);
        assert_eq!(sec.len(), 510);
        assert_eq!(count(&sec, "secreq", "sec"), 187);
        let fq = functional_quality(DEFAULT_SEED);
        assert_eq!(fq.len(), 956);
        assert_eq!(count(&fq, "quality", "Quality"), 522);
        assert_eq!(count(&fq, "quality", "NonQuality"), 434);
        assert_eq!(count(&fq, "functional", "Functional"), 578);
        assert_eq!(count(&fq, "functional", "NonFunctional"), 378);
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(promise(7), promise(7));
        assert_ne!(promise(7), promise(8));
        assert!(promise(7).iter().all(|r| !r.text.contains('{')));
    }
}
