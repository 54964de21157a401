use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Algorithm, Problem, TrialBatch};
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "problem,algorithm,n,c,d,lambda,eta,trials,mean_ratio,stderr,bound,seed";

/// One CSV line; field order is the column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub problem: Problem,
    pub algorithm: Algorithm,
    pub n: usize,
    pub c: f64,
    pub d: f64,
    pub lambda: f64,
    pub eta: f64,
    pub trials: u64,
    pub mean_ratio: f64,
    pub stderr: f64,
    pub bound: f64,
    pub seed: u64,
}

impl From<&TrialBatch> for CsvRow {
    fn from(b: &TrialBatch) -> Self {
        CsvRow {
            problem: b.problem,
            algorithm: b.algorithm,
            n: b.n,
            c: b.cell.c,
            d: b.cell.d,
            lambda: b.cell.lambda,
            eta: b.cell.eta,
            trials: b.trials,
            mean_ratio: b.mean_ratio,
            stderr: b.stderr,
            bound: b.bound,
            seed: b.seed,
        }
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Validation(format!("csv: {e}"))
}

/// Header plus one row per batch, in batch order. Floats use the shortest
/// representation that parses back to the same value.
pub fn emit_csv<W: Write>(batches: &[TrialBatch], out: W) -> Result<()> {
    if batches.is_empty() {
        return Err(Error::InvalidParameter("no batches to write".into()));
    }
    let mut writer = csv::Writer::from_writer(out);
    for batch in batches {
        writer.serialize(CsvRow::from(batch)).map_err(csv_error)?;
    }
    writer.flush().map_err(|e| Error::Validation(format!("csv: {e}")))
}

pub fn write_csv(batches: &[TrialBatch], path: &Path) -> Result<()> {
    let io_error = |e: std::io::Error| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let mut buffer = Vec::new();
    emit_csv(batches, &mut buffer)?;
    std::fs::write(path, buffer).map_err(io_error)
}

pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers().map_err(csv_error)?.iter().collect::<Vec<_>>().join(",");
    if header != CSV_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("unexpected header {header:?}"),
        });
    }
    reader.deserialize().map(|row| row.map_err(csv_error)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub cell_index: usize,
    pub pass: bool,
    /// `mean_ratio - (bound - 3 stderr - slack)`; negative on failure.
    pub margin: f64,
}

/// PASS iff `mean_ratio >= bound - 3 stderr - slack`.
pub fn compare_with_bound(batch: &TrialBatch, slack: f64) -> Verdict {
    let margin = batch.mean_ratio - (batch.bound - 3.0 * batch.stderr - slack);
    Verdict {
        cell_index: batch.cell.index,
        pass: margin >= 0.0,
        margin,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{cell_bound, Cell};

    fn batch(mean_ratio: f64, stderr: f64, bound: f64) -> TrialBatch {
        TrialBatch {
            problem: Problem::Bipartite,
            algorithm: Algorithm::Algorithm3,
            n: 100,
            cell: Cell { index: 2, c: 20.0, d: 10.0, lambda: 0.02, eta: 0.0 },
            trials: 10,
            mean_ratio,
            std_dev: stderr * 10f64.sqrt(),
            stderr,
            bound,
            seed: 7,
            clamped_trials: 0,
        }
    }

    #[test]
    fn one_cell_gives_two_lines() {
        let mut out = Vec::new();
        emit_csv(&[batch(0.4, 0.01, 0.3)], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], CSV_HEADER);
        assert!(lines[1].starts_with("bipartite,algorithm3,100,20.0,10.0,0.02,0.0,10,0.4,0.01,0.3,7"));
        assert!(emit_csv(&[], Vec::new()).is_err());
    }

    #[test]
    fn round_trip_and_bound_recompute() {
        let mut b = batch(1.0 / 3.0, 0.1234567890123, 0.0);
        b.bound = cell_bound(b.algorithm, &b.cell, 0.5).unwrap();
        let other = TrialBatch {
            cell: Cell { index: 3, eta: 0.05, ..b.cell },
            bound: cell_bound(b.algorithm, &Cell { eta: 0.05, ..b.cell }, 0.5).unwrap(),
            ..b.clone()
        };
        let mut out = Vec::new();
        emit_csv(&[b.clone(), other.clone()], &mut out).unwrap();
        let rows = parse_csv(std::str::from_utf8(&out).unwrap()).unwrap();
        assert_eq!(rows, vec![CsvRow::from(&b), CsvRow::from(&other)]);
        for row in rows {
            let cell = Cell { index: 0, c: row.c, d: row.d, lambda: row.lambda, eta: row.eta };
            assert!((row.bound - cell_bound(row.algorithm, &cell, 0.5).unwrap()).abs() <= 1e-12);
        }
        assert!(parse_csv("a,b\n1,2\n").is_err());
    }

    #[test]
    fn verdicts() {
        assert!(compare_with_bound(&batch(0.0, 0.0, 0.0), 0.0).pass);
        let v = compare_with_bound(&batch(0.26, 0.01, 0.3), 0.02);
        assert!((v.margin - 0.01).abs() < 1e-12 && v.pass);
        assert!(!compare_with_bound(&batch(0.24, 0.01, 0.3), 0.02).pass);
        assert_eq!(v.cell_index, 2);
    }

    #[test]
    fn write_errors_name_the_path() {
        let err = write_csv(&[batch(0.4, 0.0, 0.0)], Path::new("/nonexistent/dir/out.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/dir/out.csv"));
    }
}
