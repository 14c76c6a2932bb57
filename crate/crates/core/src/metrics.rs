//! Confusion matrices, per-class precision/recall/F1 and support-weighted averages.
//!
//! Zero denominators yield 0 plus a note in [`MetricReport::flags`] rather than
//! NaN. Abstentions count against recall and never enter a precision
//! denominator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::zsl::Prediction;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    /// `counts[gold][predicted]`.
    pub counts: Vec<Vec<u64>>,
    /// Abstentions per gold class.
    pub abstain: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum::<u64>() + self.abstain.iter().sum::<u64>()
    }

    pub fn support(&self, class: usize) -> u64 {
        self.counts[class].iter().sum::<u64>() + self.abstain[class]
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn has_abstentions(&self) -> bool {
        self.abstain.iter().any(|&a| a > 0)
    }
}

/// Tallies predicted labels (`None` = abstain) against gold labels.
pub fn confusion_from_labels<P, G>(predicted: &[Option<P>], golds: &[G], classes: &[String]) -> Result<ConfusionMatrix>
where
    P: AsRef<str>,
    G: AsRef<str>,
{
    if predicted.len() != golds.len() {
        return Err(Error::Input(format!(
            "{} predictions for {} gold labels",
            predicted.len(),
            golds.len()
        )));
    }
    let index = |name: &str, what: &str| {
        classes
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Input(format!("unknown {what} class `{name}`")))
    };
    let k = classes.len();
    let mut cm = ConfusionMatrix {
        classes: classes.to_vec(),
        counts: vec![vec![0; k]; k],
        abstain: vec![0; k],
    };
    for (p, g) in predicted.iter().zip(golds) {
        let gi = index(g.as_ref(), "gold")?;
        match p {
            Some(p) => cm.counts[gi][index(p.as_ref(), "predicted")?] += 1,
            None => cm.abstain[gi] += 1,
        }
    }
    Ok(cm)
}

pub fn confusion<G: AsRef<str>>(preds: &[Prediction], golds: &[G], classes: &[String]) -> Result<ConfusionMatrix> {
    let labels: Vec<Option<&str>> = preds.iter().map(|p| p.predicted.as_deref()).collect();
    confusion_from_labels(&labels, golds, classes)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    #[serde(flatten)]
    pub prf: Prf,
    pub support: u64,
}

/// Per-class scores in roster order, plus notes on zero denominators.
pub fn per_class_prf(cm: &ConfusionMatrix) -> (Vec<ClassMetrics>, Vec<String>) {
    let k = cm.classes.len();
    let mut flags = Vec::new();
    let per_class = (0..k)
        .map(|c| {
            let tp = cm.counts[c][c] as f64;
            let predicted: u64 = (0..k).map(|g| cm.counts[g][c]).sum();
            let support = cm.support(c);
            let class = &cm.classes[c];
            let precision = if predicted == 0 {
                flags.push(format!("`{class}` was never predicted; precision set to 0"));
                0.0
            } else {
                tp / predicted as f64
            };
            let recall = if support == 0 {
                flags.push(format!("`{class}` has no gold support; recall set to 0"));
                0.0
            } else {
                tp / support as f64
            };
            ClassMetrics {
                class: class.clone(),
                prf: Prf {
                    precision,
                    recall,
                    f1: f1(precision, recall),
                },
                support,
            }
        })
        .collect();
    (per_class, flags)
}

/// Support-weighted mean of per-class scores.
pub fn weighted_prf(per_class: &[Prf], supports: &[u64]) -> Result<Prf> {
    if per_class.len() != supports.len() {
        return Err(Error::Input(format!(
            "{} per-class scores for {} supports",
            per_class.len(),
            supports.len()
        )));
    }
    let total: u64 = supports.iter().sum();
    if total == 0 {
        return Err(Error::Input("weighted average over zero total support".into()));
    }
    let weighted = |get: fn(&Prf) -> f64| {
        per_class
            .iter()
            .zip(supports)
            .map(|(p, &s)| s as f64 * get(p))
            .sum::<f64>()
            / total as f64
    };
    Ok(Prf {
        precision: weighted(|p| p.precision),
        recall: weighted(|p| p.recall),
        f1: weighted(|p| p.f1),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub per_class: Vec<ClassMetrics>,
    pub weighted: Prf,
    pub flags: Vec<String>,
}

impl MetricReport {
    pub fn from_confusion(cm: &ConfusionMatrix) -> Result<Self> {
        let (per_class, flags) = per_class_prf(cm);
        let prfs: Vec<Prf> = per_class.iter().map(|c| c.prf).collect();
        let supports: Vec<u64> = per_class.iter().map(|c| c.support).collect();
        let weighted = weighted_prf(&prfs, &supports)?;
        Ok(MetricReport {
            per_class,
            weighted,
            flags,
        })
    }

    pub fn total_support(&self) -> u64 {
        self.per_class.iter().map(|c| c.support).sum()
    }

    /// `class,P,R,F1,support` rows followed by a `__weighted__` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,P,R,F1,support\n");
        let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        for c in &self.per_class {
            wtr.serialize((&c.class, c.prf.precision, c.prf.recall, c.prf.f1, c.support))
                .expect("in-memory CSV write");
        }
        let w = &self.weighted;
        wtr.serialize(("__weighted__", w.precision, w.recall, w.f1, self.total_support()))
            .expect("in-memory CSV write");
        out.push_str(&String::from_utf8(wtr.into_inner().expect("in-memory CSV flush")).unwrap());
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metric reports serialize")
    }
}

/// Scores a list of predicted labels directly.
pub fn evaluate<P: AsRef<str>, G: AsRef<str>>(
    predicted: &[Option<P>],
    golds: &[G],
    classes: &[String],
) -> Result<MetricReport> {
    MetricReport::from_confusion(&confusion_from_labels(predicted, golds, classes)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn classes(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn small_tally() {
        let cm = confusion_from_labels(
            &[Some("A"), Some("B"), Some("B")],
            &["A", "A", "B"],
            &classes(&["A", "B"]),
        )
        .unwrap();
        assert_eq!(cm.counts, vec![vec![1, 1], vec![0, 1]]);
        assert_eq!(cm.total(), 3);
        let (per, flags) = per_class_prf(&cm);
        assert!(flags.is_empty());
        assert_eq!(per[0].prf.precision, 1.0);
        assert_eq!(per[0].prf.recall, 0.5);
        assert!((per[0].prf.f1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(per[1].prf.precision, 0.5);
        assert_eq!(per[1].prf.recall, 1.0);
        assert!((per[1].prf.f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_predictions_are_diagonal() {
        let golds = ["A", "B", "C", "A"];
        let preds: Vec<Option<&str>> = golds.iter().map(|g| Some(*g)).collect();
        let cm = confusion_from_labels(&preds, &golds, &classes(&["A", "B", "C"])).unwrap();
        assert_eq!(cm.trace(), 4);
        assert_eq!(cm.support(0), 2);
        let report = MetricReport::from_confusion(&cm).unwrap();
        assert_eq!(report.weighted, Prf { precision: 1.0, recall: 1.0, f1: 1.0 });
    }

    #[test]
    fn published_f1_cells() {
        assert!((f1(0.5916, 0.2246) - 0.3256).abs() < 5e-5);
        assert!((f1(0.6697, 0.9102) - 0.7716).abs() < 5e-5);
        assert!((f1(0.6956, 0.6799) - 0.6877).abs() < 5e-5);
    }

    #[test]
    fn weighted_examples() {
        let p = |f1: f64| Prf { precision: 0.0, recall: 0.0, f1 };
        let w = weighted_prf(&[p(0.3256), p(0.7716)], &[187, 323]).unwrap();
        assert!((w.f1 - 0.6081).abs() < 5e-4);
        let w = weighted_prf(&[p(0.9), p(0.6), p(0.3)], &[10, 30, 60]).unwrap();
        assert!((w.f1 - 0.45).abs() < 1e-12);
        let w = weighted_prf(&[p(0.2), p(0.4)], &[5, 5]).unwrap();
        assert!((w.f1 - 0.3).abs() < 1e-15);
        assert!(weighted_prf(&[p(0.2)], &[0]).is_err());
        assert!(weighted_prf(&[p(0.2)], &[1, 2]).is_err());
    }

    #[test]
    fn degenerate_denominators_are_flagged() {
        let cm = confusion_from_labels(&[Some("A"), Some("A")], &["A", "B"], &classes(&["A", "B", "C"])).unwrap();
        let (per, flags) = per_class_prf(&cm);
        assert_eq!(per[1].prf, Prf::default());
        assert_eq!(per[2].prf, Prf::default());
        assert_eq!(flags.len(), 3, "{flags:?}");
    }

    #[test]
    fn abstentions_hurt_recall_only() {
        let cm = confusion_from_labels(&[Some("A"), None], &["A", "A"], &classes(&["A", "B"])).unwrap();
        assert_eq!(cm.total(), 2);
        let (per, _) = per_class_prf(&cm);
        assert_eq!(per[0].prf.precision, 1.0);
        assert_eq!(per[0].prf.recall, 0.5);
    }

    #[test]
    fn unknown_labels_and_length_mismatch() {
        let cls = classes(&["A", "B"]);
        assert!(confusion_from_labels(&[Some("A")], &["Z"], &cls).is_err());
        assert!(confusion_from_labels(&[Some("Z")], &["A"], &cls).is_err());
        assert!(confusion_from_labels(&[Some("A")], &["A", "B"], &cls).is_err());
    }

    #[test]
    fn csv_shape() {
        let report = evaluate(&[Some("A"), Some("B")], &["A", "B"], &classes(&["A", "B"])).unwrap();
        assert_eq!(
            report.to_csv(),
            "class,P,R,F1,support\nA,1.0,1.0,1.0,1\nB,1.0,1.0,1.0,1\n__weighted__,1.0,1.0,1.0,2\n"
        );
        let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(json["weighted"]["f1"], 1.0);
    }
}
