//! Validation-based choice of `max_depth` and `alpha`.
//!
//! Rows are split once into a training and a validation part. Every grid
//! cell is fit on the training part and scored by the mean validation
//! reward of its prescriptions. Cells whose paired difference to the best
//! cell is within two standard errors count as tied with it, and among tied
//! cells the smallest tree wins: fewest branches, then smallest depth, then
//! largest `alpha`. The chosen setting is refit on all rows.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Method;
use crate::error::{Error, Result};
use crate::model::{Hyperparameters, Matrix, PolicyTree, RewardMatrix};
use crate::rng;

/// Stream index reserved for the train/validation shuffle.
const SPLIT_STREAM: u64 = u64::MAX;

/// Cells within this many standard errors of the best cell count as tied.
/// One standard error is too narrow once the best of 35 cells is taken.
pub const TIE_WIDTH: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TuneGrid {
    pub depths: Vec<usize>,
    pub alphas: Vec<f64>,
    pub validation_fraction: f64,
    pub min_leaf: usize,
}

impl Default for TuneGrid {
    /// Depths 1 to 5; `alpha` in {0} and six log-spaced values from 1e-4 to 1.
    fn default() -> Self {
        let mut alphas = vec![0.0];
        alphas.extend((0..6).map(|k| 10f64.powf(-4.0 + 4.0 * k as f64 / 5.0)));
        TuneGrid {
            depths: (1..=5).collect(),
            alphas,
            validation_fraction: 0.3,
            min_leaf: 1,
        }
    }
}

impl TuneGrid {
    pub fn validate(&self) -> Result<()> {
        if self.depths.is_empty() || self.alphas.is_empty() {
            return Err(Error::config("tuning grid needs at least one depth and one alpha"));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::config(format!(
                "validation_fraction must lie in (0, 1), got {}",
                self.validation_fraction
            )));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
            return Err(Error::config(format!("alpha must be finite and >= 0, got {a}")));
        }
        if self.min_leaf == 0 {
            return Err(Error::config("min_leaf must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CellScore {
    pub max_depth: usize,
    pub alpha: f64,
    pub train_objective: f64,
    pub validation_objective: f64,
    pub n_branches: usize,
    /// Mean and standard error of the per-row validation gap to the best cell.
    pub gap: f64,
    pub gap_se: f64,
    pub tied_with_best: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TuneReport {
    pub cells: Vec<CellScore>,
    pub chosen: usize,
    pub n_train: usize,
    pub n_validation: usize,
    pub seed: u64,
}

/// Returns the chosen hyperparameters and the tree refit on all rows.
/// `base` supplies `restarts` and `seed`; depth, `alpha` and `min_leaf`
/// come from the grid.
pub fn tune(
    rewards: &RewardMatrix,
    features: &Matrix,
    grid: &TuneGrid,
    base: &Hyperparameters,
    method: Method,
) -> Result<(Hyperparameters, PolicyTree)> {
    tune_with_report(rewards, features, grid, base, method).map(|(hp, tree, _)| (hp, tree))
}

pub fn tune_with_report(
    rewards: &RewardMatrix,
    features: &Matrix,
    grid: &TuneGrid,
    base: &Hyperparameters,
    method: Method,
) -> Result<(Hyperparameters, PolicyTree, TuneReport)> {
    grid.validate()?;
    let n = rewards.n_rows();
    if n != features.rows() {
        return Err(Error::input(format!("{n} reward rows for {} feature rows", features.rows())));
    }
    let n_val = ((n as f64) * grid.validation_fraction).round() as usize;
    let n_train = n.saturating_sub(n_val);
    if n_val < grid.min_leaf.max(1) || n_train < grid.min_leaf.max(1) {
        return Err(Error::input(format!(
            "{n} rows cannot be split into train and validation parts of at least {} rows",
            grid.min_leaf.max(1)
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::stream(base.seed, SPLIT_STREAM));
    let (val_idx, train_idx) = idx.split_at(n_val);
    let (train_r, train_x) = (rewards.select_rows(train_idx), features.select_rows(train_idx));
    let (val_r, val_x) = (rewards.select_rows(val_idx), features.select_rows(val_idx));

    let settings: Vec<Hyperparameters> = grid
        .depths
        .iter()
        .flat_map(|&d| {
            grid.alphas.iter().map(move |&a| Hyperparameters {
                max_depth: d,
                alpha: a,
                min_leaf: grid.min_leaf,
                ..*base
            })
        })
        .collect();

    let fits: Vec<Result<(PolicyTree, Vec<f64>)>> = settings
        .par_iter()
        .map(|hp| {
            let tree = method.fit(&train_r, &train_x, hp)?;
            let presc = tree.prescribe_batch(&val_x)?;
            let per_row = presc.iter().enumerate().map(|(i, &t)| val_r.get(i, t)).collect();
            Ok((tree, per_row))
        })
        .collect();
    let fits = fits.into_iter().collect::<Result<Vec<_>>>()?;

    let means: Vec<f64> = fits.iter().map(|(_, r)| mean(r)).collect();
    let best = (0..means.len())
        .min_by(|&a, &b| means[a].total_cmp(&means[b]))
        .expect("non-empty grid");

    let mut cells = Vec::with_capacity(fits.len());
    for (k, (tree, per_row)) in fits.iter().enumerate() {
        let diff: Vec<f64> = per_row.iter().zip(&fits[best].1).map(|(a, b)| a - b).collect();
        let (gap, gap_se) = (mean(&diff), std_error(&diff));
        cells.push(CellScore {
            max_depth: settings[k].max_depth,
            alpha: settings[k].alpha,
            train_objective: tree.objective_train(),
            validation_objective: means[k],
            n_branches: tree.n_branches(),
            gap,
            gap_se,
            tied_with_best: gap <= TIE_WIDTH * gap_se,
        });
    }
    let chosen = (0..cells.len())
        .filter(|&k| cells[k].tied_with_best)
        .min_by(|&a, &b| {
            let (ca, cb) = (&cells[a], &cells[b]);
            ca.n_branches
                .cmp(&cb.n_branches)
                .then(ca.max_depth.cmp(&cb.max_depth))
                .then(cb.alpha.total_cmp(&ca.alpha))
        })
        .expect("the best cell is tied with itself");

    let hp = settings[chosen];
    let tree = method.fit(rewards, features, &hp)?;
    let report = TuneReport {
        cells,
        chosen,
        n_train,
        n_validation: n_val,
        seed: base.seed,
    };
    Ok((hp, tree, report))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn std_error(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
    (var / v.len() as f64).sqrt()
}
