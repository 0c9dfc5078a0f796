//! Bagged CART ensembles used as the nuisance learners behind reward
//! estimation.
//!
//! Estimation code only talks to the [`RegressionLearner`] and
//! [`ClassificationLearner`] traits; [`ForestConfig`] implements both, and
//! any other supervised learner can be plugged in the same way.

mod cart;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Matrix;
use crate::rng;
use cart::{Cart, GrowParams, Target};


#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features examined per split; `None` picks ⌈√p⌉ for classification
    /// and ⌈p/3⌉ for regression.
    pub mtry: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_depth: 12,
            min_leaf: 5,
            mtry: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self, p: usize) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::config("forest needs at least one tree"));
        }
        if self.min_leaf == 0 {
            return Err(Error::config("forest min_leaf must be at least 1"));
        }
        if let Some(m) = self.mtry {
            if m == 0 || m > p {
                return Err(Error::config(format!("mtry must lie in [1, {p}], got {m}")));
            }
        }
        Ok(())
    }

    fn mtry_for(&self, task: &Task, p: usize) -> usize {
        self.mtry.unwrap_or_else(|| {
            let m = match task {
                Task::Regression => (p as f64 / 3.0).ceil() as usize,
                Task::Classification { .. } => (p as f64).sqrt().ceil() as usize,
            };
            m.clamp(1, p)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Task {
    Regression,
    Classification { n_classes: usize },
}

/// A fitted forest. Immutable; prediction is re-entrant.
#[derive(Debug, Clone)]
pub struct ForestModel {
    task: Task,
    trees: Vec<Cart>,
    n_features: usize,
    oob_score: Option<f64>,
}

pub fn fit_regressor(x: &Matrix, y: &[f64], cfg: &ForestConfig) -> Result<ForestModel> {
    if y.len() != x.rows() {
        return Err(Error::input(format!("{} targets for {} rows", y.len(), x.rows())));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::input(format!("non-finite regression target at row {i}")));
    }
    fit(x, Target::Regression(y), Task::Regression, cfg)
}

/// Fits a classifier over labels `0..n_classes`. Classes absent from the
/// data get probability zero everywhere; a single observed class yields a
/// model that predicts it with probability one.
pub fn fit_classifier(
    x: &Matrix,
    labels: &[usize],
    n_classes: usize,
    cfg: &ForestConfig,
) -> Result<ForestModel> {
    if labels.len() != x.rows() {
        return Err(Error::input(format!("{} labels for {} rows", labels.len(), x.rows())));
    }
    if n_classes == 0 {
        return Err(Error::config("classifier needs at least one class"));
    }
    if let Some(i) = labels.iter().position(|&c| c >= n_classes) {
        return Err(Error::input(format!(
            "label {} at row {i} outside 0..{n_classes}",
            labels[i]
        )));
    }
    fit(
        x,
        Target::Classification { labels, n_classes },
        Task::Classification { n_classes },
        cfg,
    )
}

fn fit(x: &Matrix, target: Target<'_>, task: Task, cfg: &ForestConfig) -> Result<ForestModel> {
    let n = x.rows();
    let p = x.cols();
    if n < 2 {
        return Err(Error::Fit(format!("need at least 2 rows to fit a forest, got {n}")));
    }
    if p == 0 {
        return Err(Error::Fit("need at least one feature".into()));
    }
    if let Some((i, j)) = x.first_non_finite() {
        return Err(Error::input(format!("non-finite feature at row {i}, column {j}")));
    }
    cfg.validate(p)?;
    let params = GrowParams {
        max_depth: cfg.max_depth,
        min_leaf: cfg.min_leaf,
        mtry: cfg.mtry_for(&task, p),
    };

    let grown: Vec<(Cart, Vec<bool>)> = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::stream(cfg.seed, t as u64);
            let mut in_bag = vec![!cfg.bootstrap; n];
            let mut rows: Vec<usize> = if cfg.bootstrap {
                (0..n)
                    .map(|_| {
                        let i = rng.random_range(0..n);
                        in_bag[i] = true;
                        i
                    })
                    .collect()
            } else {
                (0..n).collect()
            };
            let cart = cart::grow(x, target, &mut rows, params, &mut rng);
            (cart, in_bag)
        })
        .collect();

    let oob_score = cfg
        .bootstrap
        .then(|| oob_score(x, target, &grown))
        .flatten();
    Ok(ForestModel {
        task,
        trees: grown.into_iter().map(|(c, _)| c).collect(),
        n_features: p,
        oob_score,
    })
}

/// R² for regression, accuracy for classification, over rows that were
/// out of bag for at least one tree.
fn oob_score(x: &Matrix, target: Target<'_>, grown: &[(Cart, Vec<bool>)]) -> Option<f64> {
    let n = x.rows();
    let stride = match target {
        Target::Regression(_) => 1,
        Target::Classification { n_classes, .. } => n_classes,
    };
    let mut acc = vec![0.0; n * stride];
    let mut votes = vec![0usize; n];
    for (cart, in_bag) in grown {
        for i in (0..n).filter(|&i| !in_bag[i]) {
            let v = cart.leaf_value(x.row(i));
            for (a, b) in acc[i * stride..(i + 1) * stride].iter_mut().zip(v) {
                *a += b;
            }
            votes[i] += 1;
        }
    }
    let covered: Vec<usize> = (0..n).filter(|&i| votes[i] > 0).collect();
    if covered.is_empty() {
        return None;
    }
    match target {
        Target::Regression(y) => {
            let mean = covered.iter().map(|&i| y[i]).sum::<f64>() / covered.len() as f64;
            let ss_tot: f64 = covered.iter().map(|&i| (y[i] - mean).powi(2)).sum();
            let ss_res: f64 = covered
                .iter()
                .map(|&i| (y[i] - acc[i] / votes[i] as f64).powi(2))
                .sum();
            Some(if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 0.0 })
        }
        Target::Classification { labels, .. } => {
            let correct = covered
                .iter()
                .filter(|&&i| argmax(&acc[i * stride..(i + 1) * stride]) == labels[i])
                .count();
            Some(correct as f64 / covered.len() as f64)
        }
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (k, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = k;
        }
    }
    best
}

impl ForestModel {
    pub fn task(&self) -> &Task {
        &self.task
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn oob_score(&self) -> Option<f64> {
        self.oob_score
    }

    pub fn max_tree_depth(&self) -> usize {
        self.trees.iter().map(Cart::depth).max().unwrap_or(0)
    }

    fn check(&self, x: &Matrix) -> Result<()> {
        if x.rows() > 0 && x.cols() != self.n_features {
            return Err(Error::input(format!(
                "matrix has {} columns, model was trained on {}",
                x.cols(),
                self.n_features
            )));
        }
        Ok(())
    }

    /// Mean of per-tree leaf means.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        if self.task != Task::Regression {
            return Err(Error::config("predict called on a classification forest"));
        }
        self.check(x)?;
        let k = self.trees.len() as f64;
        Ok(x
            .iter_rows()
            .map(|row| self.trees.iter().map(|t| t.leaf_value(row)[0]).sum::<f64>() / k)
            .collect())
    }

    /// Class-frequency vectors averaged over trees; rows sum to one.
    pub fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        let Task::Classification { n_classes } = self.task else {
            return Err(Error::config("predict_proba called on a regression forest"));
        };
        self.check(x)?;
        let mut out = Matrix::zeros(x.rows(), n_classes);
        let k = self.trees.len() as f64;
        for (i, row) in x.iter_rows().enumerate() {
            let dst = out.row_mut(i);
            for t in &self.trees {
                for (d, v) in dst.iter_mut().zip(t.leaf_value(row)) {
                    *d += v;
                }
            }
            let total: f64 = dst.iter().sum();
            for d in dst.iter_mut() {
                *d /= if total > 0.0 { total } else { k };
            }
        }
        Ok(out)
    }
}

/// A fitted model producing real-valued predictions.
pub trait Regressor: Send + Sync {
    fn predict(&self, x: &Matrix) -> Result<Vec<f64>>;
}

/// A fitted model producing class-probability rows.
pub trait Classifier: Send + Sync {
    fn predict_proba(&self, x: &Matrix) -> Result<Matrix>;
}

/// Supplies regression models to reward estimation.
pub trait RegressionLearner: Sync {
    /// `stream` distinguishes the many models fit during one estimation run.
    fn fit_regression(&self, x: &Matrix, y: &[f64], stream: u64) -> Result<Box<dyn Regressor>>;

    /// Smallest training set the learner accepts.
    fn min_rows(&self) -> usize {
        2
    }
}

/// Supplies classification models to reward estimation.
pub trait ClassificationLearner: Sync {
    fn fit_classification(
        &self,
        x: &Matrix,
        labels: &[usize],
        n_classes: usize,
        stream: u64,
    ) -> Result<Box<dyn Classifier>>;
}

impl Regressor for ForestModel {
    fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        ForestModel::predict(self, x)
    }
}

impl Classifier for ForestModel {
    fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        ForestModel::predict_proba(self, x)
    }
}

impl RegressionLearner for ForestConfig {
    fn fit_regression(&self, x: &Matrix, y: &[f64], stream: u64) -> Result<Box<dyn Regressor>> {
        let cfg = self.with_seed(rng::derive_seed(&[self.seed, stream]));
        Ok(Box::new(fit_regressor(x, y, &cfg)?))
    }

    fn min_rows(&self) -> usize {
        (2 * self.min_leaf).max(2)
    }
}

impl ClassificationLearner for ForestConfig {
    fn fit_classification(
        &self,
        x: &Matrix,
        labels: &[usize],
        n_classes: usize,
        stream: u64,
    ) -> Result<Box<dyn Classifier>> {
        let cfg = self.with_seed(rng::derive_seed(&[self.seed, stream]));
        Ok(Box::new(fit_classifier(x, labels, n_classes, &cfg)?))
    }
}
