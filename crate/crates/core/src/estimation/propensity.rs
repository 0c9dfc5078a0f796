use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::ClassificationLearner;
use crate::model::{Dataset, Matrix};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PropensityOptions {
    pub k_folds: usize,
    /// Probabilities are clipped into `[lo, hi]` and rows re-normalized
    /// so that no entry ends below `lo`.
    pub clip: (f64, f64),
    /// Seed for the fold assignment.
    pub seed: u64,
}

impl Default for PropensityOptions {
    fn default() -> Self {
        PropensityOptions {
            k_folds: 5,
            clip: (0.01, 1.0),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PropensityEstimate {
    /// Clipped, row-normalized probabilities (n × T).
    pub probs: Matrix,
    /// Cross-fit classifier output before clipping.
    pub raw: Matrix,
    /// Fold of every row; row i was scored by a model trained without fold `folds[i]`.
    pub folds: Vec<usize>,
    pub k_folds: usize,
    pub clip: (f64, f64),
    /// Number of entries moved by clipping.
    pub n_clipped: usize,
}

/// Cross-fit propensity estimates with folds stratified by treatment.
pub fn estimate_propensity(
    ds: &Dataset,
    opts: &PropensityOptions,
    learner: &dyn ClassificationLearner,
) -> Result<PropensityEstimate> {
    let (labels, t) = ds.discrete_labels()?;
    let k = opts.k_folds;
    if k < 2 {
        return Err(Error::config(format!("k_folds must be at least 2, got {k}")));
    }
    let (lo, hi) = opts.clip;
    if !(lo > 0.0 && lo < hi && hi <= 1.0) || lo * t as f64 > 1.0 {
        return Err(Error::config(format!(
            "clip bounds ({lo}, {hi}) must satisfy 0 < lo < hi <= 1 and lo * {t} <= 1"
        )));
    }
    let folds = stratified_folds(labels, t, k, opts.seed)?;

    let x = ds.features();
    let n = ds.n_rows();
    let per_fold: Vec<Result<(Vec<usize>, Matrix)>> = (0..k)
        .into_par_iter()
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| folds[i] == f);
            let train_labels: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
            let model = learner.fit_classification(&x.select_rows(&train), &train_labels, t, f as u64)?;
            let probs = model.predict_proba(&x.select_rows(&test))?;
            if probs.cols() != t || probs.rows() != test.len() {
                return Err(Error::Estimation(format!(
                    "propensity model returned a {}x{} matrix, expected {}x{t}",
                    probs.rows(),
                    probs.cols(),
                    test.len()
                )));
            }
            Ok((test, probs))
        })
        .collect();

    let mut raw = Matrix::zeros(n, t);
    for res in per_fold {
        let (test, probs) = res?;
        for (r, &i) in test.iter().enumerate() {
            raw.row_mut(i).copy_from_slice(probs.row(r));
        }
    }
    let mut probs = raw.clone();
    let mut n_clipped = 0;
    for i in 0..n {
        n_clipped += clip_row(probs.row_mut(i), lo, hi);
    }
    if let Some((i, j)) = probs.first_non_finite() {
        return Err(Error::Estimation(format!("non-finite propensity at row {i}, treatment {j}")));
    }
    Ok(PropensityEstimate {
        probs,
        raw,
        folds,
        k_folds: k,
        clip: (lo, hi),
        n_clipped,
    })
}

/// Assigns folds round-robin within each shuffled treatment arm so every
/// training split contains every arm.
pub fn stratified_folds(labels: &[usize], n_treatments: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    let mut rng = rng::stream(seed, 0x5f01d);
    let mut folds = vec![0; labels.len()];
    for arm in 0..n_treatments {
        let mut rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == arm).collect();
        if rows.len() < k {
            return Err(Error::Estimation(format!(
                "treatment {arm} has {} rows, fewer than k_folds = {k}, so some training fold would \
                 miss it; lower k_folds or collect more rows for that arm",
                rows.len()
            )));
        }
        rows.shuffle(&mut rng);
        for (pos, i) in rows.into_iter().enumerate() {
            folds[i] = pos % k;
        }
    }
    Ok(folds)
}

/// Clips a probability row into `[lo, hi]` and rescales the unclipped
/// entries so the row sums to one, repeating until no rescaled entry falls
/// below `lo`. Returns the number of entries that were out of bounds.
pub fn clip_row(p: &mut [f64], lo: f64, hi: f64) -> usize {
    let moved = p.iter().filter(|&&v| v < lo || v > hi).count();
    let mut fixed: Vec<bool> = p.iter().map(|&v| v < lo).collect();
    for v in p.iter_mut() {
        *v = v.clamp(lo, hi);
    }
    loop {
        let fixed_mass: f64 = p.iter().zip(&fixed).filter(|(_, f)| **f).map(|(v, _)| v).sum();
        let free_mass: f64 = p.iter().zip(&fixed).filter(|(_, f)| !**f).map(|(v, _)| v).sum();
        if free_mass <= 0.0 {
            let share = 1.0 / p.len() as f64;
            p.iter_mut().for_each(|v| *v = share);
            return moved;
        }
        let scale = (1.0 - fixed_mass) / free_mass;
        let mut changed = false;
        for (v, f) in p.iter_mut().zip(fixed.iter_mut()) {
            if !*f {
                *v *= scale;
                if *v < lo {
                    *v = lo;
                    *f = true;
                    changed = true;
                }
            }
        }
        if !changed {
            return moved;
        }
    }
}
