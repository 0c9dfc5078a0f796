use std::io::{Read, Write};

use super::Matrix;
use crate::error::{Error, Result};

/// Outcome of every observation under every candidate treatment.
///
/// Entry `(i, t)` is the (estimated or known) outcome of row `i` had it
/// received candidate `t`. Lower is better.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardMatrix {
    values: Matrix,
    labels: Vec<String>,
}

impl RewardMatrix {
    pub fn new(values: Matrix, labels: Vec<String>) -> Result<Self> {
        if values.cols() < 2 {
            return Err(Error::input(format!(
                "reward matrix needs at least two candidates, got {}",
                values.cols()
            )));
        }
        if labels.len() != values.cols() {
            return Err(Error::input(format!(
                "{} candidate labels for {} reward columns",
                labels.len(),
                values.cols()
            )));
        }
        if let Some((i, t)) = values.first_non_finite() {
            return Err(Error::input(format!("non-finite reward at row {i}, candidate {t}")));
        }
        Ok(RewardMatrix { values, labels })
    }

    /// Builds a matrix with labels `t0..t{T-1}`.
    pub fn unlabeled(values: Matrix) -> Result<Self> {
        let labels = (0..values.cols()).map(|t| format!("t{t}")).collect();
        RewardMatrix::new(values, labels)
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.values.rows()
    }

    #[inline]
    pub fn n_candidates(&self) -> usize {
        self.values.cols()
    }

    #[inline]
    pub fn get(&self, i: usize, t: usize) -> f64 {
        self.values.get(i, t)
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        self.values.row(i)
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn select_rows(&self, idx: &[usize]) -> RewardMatrix {
        RewardMatrix {
            values: self.values.select_rows(idx),
            labels: self.labels.clone(),
        }
    }

    /// Per-candidate sums over `rows`.
    pub fn column_sums(&self, rows: &[usize]) -> Vec<f64> {
        let mut sums = vec![0.0; self.n_candidates()];
        for &i in rows {
            for (s, v) in sums.iter_mut().zip(self.row(i)) {
                *s += v;
            }
        }
        sums
    }

    /// Mean reward of the given per-row prescriptions.
    pub fn mean_of(&self, prescriptions: &[usize]) -> Result<f64> {
        if prescriptions.len() != self.n_rows() {
            return Err(Error::input(format!(
                "{} prescriptions for {} reward rows",
                prescriptions.len(),
                self.n_rows()
            )));
        }
        let mut total = 0.0;
        for (i, &t) in prescriptions.iter().enumerate() {
            if t >= self.n_candidates() {
                return Err(Error::input(format!("prescription {t} at row {i} out of range")));
            }
            total += self.get(i, t);
        }
        Ok(total / self.n_rows() as f64)
    }

    pub fn negate(&self) -> RewardMatrix {
        RewardMatrix {
            values: self.values.map(|v| -v),
            labels: self.labels.clone(),
        }
    }

    /// Writes a delimited table: a header of candidate labels, one row per observation.
    pub fn write_table<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(&self.labels)?;
        let mut buf = Vec::with_capacity(self.n_candidates());
        for i in 0..self.n_rows() {
            buf.clear();
            buf.extend(self.row(i).iter().map(|v| v.to_string()));
            wtr.write_record(&buf)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_table<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let labels: Vec<String> = rdr.headers()?.iter().map(|s| s.trim().to_string()).collect();
        let t = labels.len();
        let mut data = Vec::new();
        let mut n = 0;
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != t {
                return Err(Error::parse(format!(
                    "reward table row {} has {} cells, header has {t}",
                    i + 1,
                    rec.len()
                )));
            }
            for (j, cell) in rec.iter().enumerate() {
                let v: f64 = cell.trim().parse().map_err(|_| {
                    Error::parse(format!(
                        "reward table row {}, column '{}': '{}' is not a number",
                        i + 1,
                        labels[j],
                        cell
                    ))
                })?;
                data.push(v);
            }
            n += 1;
        }
        RewardMatrix::new(Matrix::new(n, t, data)?, labels)
    }
}
