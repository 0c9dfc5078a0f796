//! Outcome building blocks for the synthetic problems. Features are
//! 1-based in the formulas (`x1..x10`), 0-based in the slices.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Matrix;

/// Baseline and effect functions for discrete-treatment problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FnId {
    F1,
    F2,
    F3,
    F4,
    F5,
    F6,
    F7,
    F8,
}

/// Outcome functions of features and a dose for continuous problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GnId {
    G1,
    G2,
    G3,
    G4,
}

#[inline]
fn ind(c: bool) -> f64 {
    if c {
        1.0
    } else {
        0.0
    }
}

/// Eight-way piecewise-constant function of the binary coordinates x2, x4, x6.
fn cell_value(x: &[f64], values: [f64; 8]) -> f64 {
    let (a, b, c) = (x[1], x[3], x[5]);
    values[0] * a * b * c
        + values[1] * a * b * (1.0 - c)
        + values[2] * a * (1.0 - b) * c
        + values[3] * a * (1.0 - b) * (1.0 - c)
        + values[4] * (1.0 - a) * b * c
        + values[5] * (1.0 - a) * b * (1.0 - c)
        + values[6] * (1.0 - a) * (1.0 - b) * c
        + values[7] * (1.0 - a) * (1.0 - b) * (1.0 - c)
}

impl FnId {
    pub const ALL: [FnId; 8] = [
        FnId::F1,
        FnId::F2,
        FnId::F3,
        FnId::F4,
        FnId::F5,
        FnId::F6,
        FnId::F7,
        FnId::F8,
    ];

    /// Raw (unstandardized) value.
    pub fn eval(self, x: &[f64]) -> f64 {
        match self {
            FnId::F1 => 0.0,
            FnId::F2 => 5.0 * ind(x[0] > 1.0) - 5.0,
            FnId::F3 => 2.0 * x[0] - 4.0,
            FnId::F4 => cell_value(x, [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]),
            FnId::F5 => x[0] + x[2] + x[4] + x[6] + x[8] - 2.0,
            FnId::F6 => {
                4.0 * ind(x[0] > 1.0) * ind(x[2] > 0.0) + 4.0 * ind(x[4] > 1.0) * ind(x[6] > 0.0) + 2.0 * x[7] * x[8]
            }
            FnId::F7 => {
                0.5 * (x[0] * x[0] + x[1] + x[2] * x[2] + x[3] + x[4] * x[4] + x[5] + x[6] * x[6] + x[7] + x[8] * x[8]
                    - 11.0)
            }
            FnId::F8 => (FnId::F4.eval(x) + FnId::F5.eval(x)) / std::f64::consts::SQRT_2,
        }
    }
}

impl GnId {
    pub fn eval(self, x: &[f64], t: f64) -> f64 {
        match self {
            GnId::G1 => (x[0] - t).abs(),
            GnId::G2 => x[0] * t,
            GnId::G3 => {
                let v = [4.0, 3.0, 2.0, 1.0, -1.0, -2.0, -3.0, -4.0].map(|c| (t - c).abs());
                cell_value(x, v)
            }
            GnId::G4 => {
                (t - 2.0).abs() * ind(x[0] > 1.0) * ind(x[2] > 0.0)
                    + (t + 2.0).abs() * ind(x[4] > 1.0) * ind(x[6] > 0.0)
                    + 2.0 * (x[8] - t).abs()
            }
        }
    }
}

macro_rules! names {
    ($ty:ident, $($v:ident => $s:literal),+) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($ty::$v => $s),+ })
            }
        }
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($s => Ok($ty::$v),)+
                    other => Err(Error::config(format!("unknown function id '{other}'"))),
                }
            }
        }
    };
}

names!(FnId, F1 => "f1", F2 => "f2", F3 => "f3", F4 => "f4", F5 => "f5", F6 => "f6", F7 => "f7", F8 => "f8");
names!(GnId, G1 => "g1", G2 => "g2", G3 => "g3", G4 => "g4");

/// `x ↦ (f(x) − mean) / sd` with constants estimated on a reference sample.
/// Functions that are constant on the sample map to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Standardized {
    pub id: FnId,
    pub mean: f64,
    pub sd: f64,
}

/// Smallest reference sample accepted for estimating the constants.
pub const MIN_REFERENCE_ROWS: usize = 10_000;

impl Standardized {
    pub fn fit(id: FnId, reference: &Matrix) -> Result<Self> {
        if reference.rows() < MIN_REFERENCE_ROWS {
            return Err(Error::config(format!(
                "standardization needs at least {MIN_REFERENCE_ROWS} reference rows, got {}",
                reference.rows()
            )));
        }
        let (mean, sd) = mean_sd(reference.iter_rows().map(|x| id.eval(x)));
        Ok(Standardized { id, mean, sd })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        if self.sd > 0.0 {
            (self.id.eval(x) - self.mean) / self.sd
        } else {
            0.0
        }
    }
}

/// Mean and population standard deviation; the deviation is zero when the
/// values are constant up to rounding.
pub(crate) fn mean_sd(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    if sd <= 1e-12 * (1.0 + mean.abs()) {
        (mean, 0.0)
    } else {
        (mean, sd)
    }
}
