use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forest::{RegressionLearner, Regressor};
use crate::model::{Dataset, Matrix};

/// Stream offset separating outcome models from the propensity folds.
pub(crate) const OUTCOME_STREAM: u64 = 1 << 32;

pub struct OutcomeEstimate {
    /// Predicted outcome of every row under every arm (n × T).
    pub preds: Matrix,
    /// Model `t` was trained on exactly `arm_rows[t]`.
    pub models: Vec<Box<dyn Regressor>>,
    pub arm_rows: Vec<Vec<usize>>,
}

impl std::fmt::Debug for OutcomeEstimate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OutcomeEstimate")
            .field("preds", &self.preds)
            .field("arm_rows", &self.arm_rows.iter().map(Vec::len).collect::<Vec<_>>())
            .finish()
    }
}

/// One regressor per arm, fit on all rows that received it and evaluated on
/// every row.
pub fn estimate_outcomes(ds: &Dataset, learner: &dyn RegressionLearner) -> Result<OutcomeEstimate> {
    let (labels, t) = ds.discrete_labels()?;
    let arm_rows: Vec<Vec<usize>> = (0..t)
        .map(|arm| (0..labels.len()).filter(|&i| labels[i] == arm).collect())
        .collect();
    for (arm, rows) in arm_rows.iter().enumerate() {
        if rows.len() < learner.min_rows() {
            return Err(Error::Estimation(format!(
                "treatment {arm} has {} rows, the outcome model needs at least {}",
                rows.len(),
                learner.min_rows()
            )));
        }
    }
    let x = ds.features();
    let y = ds.outcomes();
    let fitted: Vec<Result<(Box<dyn Regressor>, Vec<f64>)>> = arm_rows
        .par_iter()
        .enumerate()
        .map(|(arm, rows)| {
            let ys: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
            let model = learner.fit_regression(&x.select_rows(rows), &ys, OUTCOME_STREAM + arm as u64)?;
            let pred = model.predict(x)?;
            Ok((model, pred))
        })
        .collect();
    let mut preds = Matrix::zeros(ds.n_rows(), t);
    let mut models = Vec::with_capacity(t);
    for (arm, res) in fitted.into_iter().enumerate() {
        let (model, pred) = res?;
        if pred.len() != ds.n_rows() {
            return Err(Error::Estimation(format!(
                "outcome model {arm} returned {} predictions for {} rows",
                pred.len(),
                ds.n_rows()
            )));
        }
        for (i, v) in pred.into_iter().enumerate() {
            preds.set(i, arm, v);
        }
        models.push(model);
    }
    Ok(OutcomeEstimate {
        preds,
        models,
        arm_rows,
    })
}
