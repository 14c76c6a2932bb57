//! Self-audit: every weighted score in `results.csv` must equal the value
//! recomputed from the persisted predictions file.

use std::path::Path;

use super::exec::RunLayout;
use super::predictions::PredictionTable;
use super::summary::{load_results, Measure};
use crate::error::Result;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AuditReport {
    /// Number of (setting, measure) values checked.
    pub checked: usize,
    pub mismatches: Vec<String>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Recomputes wP/wR/wF1 of every setting in `<dir>/results.csv` and compares
/// them bit for bit.
pub fn audit(dir: &Path) -> Result<AuditReport> {
    let layout = RunLayout::new(dir);
    let records = load_results(layout.results_csv())?;
    let mut report = AuditReport::default();
    for r in &records {
        let id = r.setting.id();
        let table = PredictionTable::load(layout.predictions(&id))?;
        if table.len() != r.n {
            report
                .mismatches
                .push(format!("{id}: {} prediction rows, results say n = {}", table.len(), r.n));
            continue;
        }
        let weighted = table.report()?.weighted;
        for m in Measure::ALL {
            report.checked += 1;
            let (stored, fresh) = (r.value(m), m.of(&weighted));
            if stored.to_bits() != fresh.to_bits() {
                report.mismatches.push(format!("{id}: {m} stored {stored}, recomputed {fresh}"));
            }
        }
    }
    Ok(report)
}
