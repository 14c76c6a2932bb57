//! Per-setting prediction files.
//!
//! Columns: `index,id,gold,predicted,score:<class>...,prob:<class>...`, one
//! row per requirement in task order. An abstention is written as
//! [`ABSTAIN`].

use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::{evaluate, MetricReport};
use crate::zsl::Prediction;

pub const ABSTAIN: &str = "__abstain__";

pub fn header(classes: &[String]) -> Vec<String> {
    let mut h: Vec<String> = ["index", "id", "gold", "predicted"].map(String::from).to_vec();
    h.extend(classes.iter().map(|c| format!("score:{c}")));
    h.extend(classes.iter().map(|c| format!("prob:{c}")));
    h
}

/// Appends prediction rows to an open file.
pub(crate) struct RowWriter {
    inner: csv::Writer<File>,
}

impl RowWriter {
    pub(crate) fn new(file: File, classes: Option<&[String]>) -> Result<Self> {
        let mut inner = csv::WriterBuilder::new().has_headers(false).from_writer(file);
        if let Some(classes) = classes {
            inner.write_record(header(classes))?;
        }
        Ok(RowWriter { inner })
    }

    pub(crate) fn write(&mut self, index: usize, gold: &str, p: &Prediction) -> Result<()> {
        let mut rec = vec![
            index.to_string(),
            p.requirement_id.clone(),
            gold.to_string(),
            p.predicted.clone().unwrap_or_else(|| ABSTAIN.to_string()),
        ];
        rec.extend(p.raw_scores.iter().map(|(_, s)| fmt_f64(*s)));
        rec.extend(p.probabilities.iter().map(|(_, s)| fmt_f64(*s)));
        self.inner.write_record(&rec)?;
        Ok(())
    }

    pub(crate) fn flush(&mut self, path: &Path) -> Result<()> {
        self.inner.flush().map_err(|e| Error::io(path, e))
    }
}

/// Shortest round-tripping decimal form.
pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionRow {
    pub index: usize,
    pub id: String,
    pub gold: String,
    /// `None` for an abstention.
    pub predicted: Option<String>,
}

/// The label columns of a predictions file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionTable {
    pub classes: Vec<String>,
    pub rows: Vec<PredictionRow>,
}

impl PredictionTable {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(file, path)
    }

    pub(crate) fn read<R: std::io::Read>(reader: R, path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let fixed = ["index", "id", "gold", "predicted"];
        for (i, name) in fixed.iter().enumerate() {
            if headers.get(i) != Some(name) {
                return Err(Error::Schema {
                    path: path.to_path_buf(),
                    column: name.to_string(),
                });
            }
        }
        let classes: Vec<String> = headers
            .iter()
            .filter_map(|h| h.strip_prefix("score:"))
            .map(String::from)
            .collect();
        if headers.len() != 4 + 2 * classes.len() {
            return Err(Error::Schema {
                path: path.to_path_buf(),
                column: "prob:<class>".into(),
            });
        }
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row_err = |message: String| Error::Row {
                path: path.to_path_buf(),
                row: i + 2,
                message,
            };
            let index = rec[0]
                .parse::<usize>()
                .map_err(|e| row_err(format!("bad index: {e}")))?;
            if index != i {
                return Err(row_err(format!("expected index {i}, found {index}")));
            }
            let predicted = match &rec[3] {
                ABSTAIN => None,
                p => Some(p.to_string()),
            };
            rows.push(PredictionRow {
                index,
                id: rec[1].to_string(),
                gold: rec[2].to_string(),
                predicted,
            });
        }
        Ok(PredictionTable { classes, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn golds(&self) -> Vec<&str> {
        self.rows.iter().map(|r| r.gold.as_str()).collect()
    }

    pub fn predicted(&self) -> Vec<Option<&str>> {
        self.rows.iter().map(|r| r.predicted.as_deref()).collect()
    }

    pub fn report(&self) -> Result<MetricReport> {
        evaluate(&self.predicted(), &self.golds(), &self.classes)
    }
}

/// Keeps the header and the first `rows` data rows of a partial file.
pub(crate) fn truncate_rows(path: &Path, rows: usize) -> Result<()> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(bytes.as_slice());
    let mut keep = 0u64;
    let mut seen = 0;
    let mut rec = csv::ByteRecord::new();
    while seen < rows + 1 {
        if !rdr.read_byte_record(&mut rec)? {
            return Err(Error::Input(format!(
                "{}: checkpoint expects {rows} rows, file has {}",
                path.display(),
                seen.saturating_sub(1)
            )));
        }
        seen += 1;
        keep = rdr.position().byte();
    }
    let mut file = std::fs::OpenOptions::new()
        .write(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    file.set_len(keep).map_err(|e| Error::io(path, e))?;
    file.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zsl::Pipeline;

    fn pred(id: &str, predicted: Option<&str>) -> Prediction {
        Prediction {
            requirement_id: id.into(),
            raw_scores: vec![("A".into(), 1.5), ("B".into(), 0.1)],
            probabilities: vec![("A".into(), 0.8), ("B".into(), 0.2)],
            predicted: predicted.map(String::from),
            pipeline: Pipeline::Embedding,
        }
    }

    #[test]
    fn round_trip_and_truncate() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let classes = vec!["A".to_string(), "B".to_string()];
        let mut w = RowWriter::new(File::create(&path).unwrap(), Some(&classes)).unwrap();
        w.write(0, "A", &pred("r1", Some("A"))).unwrap();
        w.write(1, "B", &pred("r2", None)).unwrap();
        w.write(2, "B", &pred("r,3", Some("B"))).unwrap();
        w.flush(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("index,id,gold,predicted,score:A,score:B,prob:A,prob:B\n0,r1,A,A,1.5,0.1,0.8,0.2\n"));
        let table = PredictionTable::load(&path).unwrap();
        assert_eq!(table.classes, classes);
        assert_eq!(table.rows[1].predicted, None);
        assert_eq!(table.rows[2].id, "r,3");

        truncate_rows(&path, 1).unwrap();
        let table = PredictionTable::load(&path).unwrap();
        assert_eq!(table.len(), 1);
        assert!(truncate_rows(&path, 5).is_err());
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 0.0, 123456.789] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }
}
