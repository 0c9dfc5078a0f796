//! Delimited input tables with a mandatory header; columns are selected by
//! name.

use std::collections::BTreeSet;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::Matrix;

#[derive(Debug, Clone)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| Error::input(format!("cannot open {}: {e}", path.display())))?;
        Table::from_reader(file)
    }

    pub fn from_reader<R: std::io::Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(r);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            rows.push(rec.iter().map(str::to_string).collect());
        }
        if rows.is_empty() {
            return Err(Error::input("table has a header but no rows"));
        }
        Ok(Table { header, rows })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Column positions for `names`, or an input error listing every missing name.
    pub fn positions(&self, names: &[String]) -> Result<Vec<usize>> {
        let missing: Vec<&str> = names
            .iter()
            .filter(|n| !self.header.contains(n))
            .map(String::as_str)
            .collect();
        if !missing.is_empty() {
            return Err(Error::input(format!(
                "missing column(s): {} (table has: {})",
                missing.join(", "),
                self.header.join(", ")
            )));
        }
        Ok(names
            .iter()
            .map(|n| self.header.iter().position(|h| h == n).expect("checked above"))
            .collect())
    }

    /// Numeric columns as an n × k matrix.
    pub fn numeric(&self, names: &[String]) -> Result<Matrix> {
        let pos = self.positions(names)?;
        let mut data = Vec::with_capacity(self.n_rows() * pos.len());
        for (i, row) in self.rows.iter().enumerate() {
            for (&j, name) in pos.iter().zip(names) {
                data.push(parse_cell(&row[j], i, name)?);
            }
        }
        Matrix::new(self.n_rows(), pos.len(), data)
    }

    pub fn numeric_column(&self, name: &str) -> Result<Vec<f64>> {
        Ok(self.numeric(&[name.to_string()])?.column(0))
    }

    pub fn text_column(&self, name: &str) -> Result<Vec<String>> {
        let j = self.positions(&[name.to_string()])?[0];
        Ok(self.rows.iter().map(|r| r[j].clone()).collect())
    }
}

/// Line numbers in messages count the header as line 1.
pub fn parse_cell(cell: &str, row: usize, column: &str) -> Result<f64> {
    let v: f64 = cell.parse().map_err(|_| {
        Error::parse(format!(
            "line {}, column '{column}': cannot parse '{cell}' as a number",
            row + 2
        ))
    })?;
    if !v.is_finite() {
        return Err(Error::input(format!("line {}, column '{column}': non-finite value", row + 2)));
    }
    Ok(v)
}

/// Maps treatment cells to indices into `declared`, or into the sorted
/// distinct values when nothing is declared (numeric order if every value is
/// a number).
pub fn encode_labels(cells: &[String], declared: Option<&[String]>, column: &str) -> Result<(Vec<usize>, Vec<String>)> {
    let labels: Vec<String> = match declared {
        Some(d) => d.to_vec(),
        None => {
            let distinct: BTreeSet<&String> = cells.iter().collect();
            let mut v: Vec<String> = distinct.into_iter().cloned().collect();
            if v.iter().all(|s| s.parse::<f64>().is_ok()) {
                v.sort_by(|a, b| a.parse::<f64>().unwrap().total_cmp(&b.parse::<f64>().unwrap()));
            }
            v
        }
    };
    let idx = cells
        .iter()
        .enumerate()
        .map(|(i, c)| {
            labels.iter().position(|l| l == c).ok_or_else(|| {
                Error::parse(format!(
                    "line {}, column '{column}': treatment '{c}' is not among the declared labels ({})",
                    i + 2,
                    labels.join(", ")
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((idx, labels))
}
