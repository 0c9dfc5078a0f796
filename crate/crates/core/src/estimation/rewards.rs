use rayon::prelude::*;

use super::outcome::{OutcomeEstimate, OUTCOME_STREAM};
use super::propensity::PropensityEstimate;
use crate::error::{Error, Result};
use crate::forest::{ClassificationLearner, Classifier, RegressionLearner, Regressor};
use crate::model::{Dataset, Matrix, RewardMatrix, TreatmentSpace, Treatments};

/// One doubly-robust entry: `(y - yhat) / p + yhat` for the observed arm,
/// `yhat` otherwise.
#[inline]
pub fn dr_entry(y: f64, yhat: f64, p: f64, observed: bool) -> f64 {
    if observed {
        (y - yhat) / p + yhat
    } else {
        yhat
    }
}

pub fn doubly_robust_rewards(
    ds: &Dataset,
    space: &TreatmentSpace,
    prop: &PropensityEstimate,
    out: &OutcomeEstimate,
) -> Result<RewardMatrix> {
    let (labels, t) = ds.discrete_labels()?;
    let n = ds.n_rows();
    check_space(space, t)?;
    for (what, m) in [("propensity", &prop.probs), ("outcome", &out.preds)] {
        if m.rows() != n || m.cols() != t {
            return Err(Error::input(format!(
                "{what} matrix is {}x{}, expected {n}x{t}",
                m.rows(),
                m.cols()
            )));
        }
    }
    let y = ds.outcomes();
    let mut values = Matrix::zeros(n, t);
    for i in 0..n {
        for arm in 0..t {
            let observed = labels[i] == arm;
            let p = prop.probs.get(i, arm);
            if observed && !(p > 0.0) {
                return Err(Error::Estimation(format!(
                    "propensity {p} at row {i}, treatment {arm} is not positive"
                )));
            }
            let v = dr_entry(y[i], out.preds.get(i, arm), p, observed);
            if !v.is_finite() {
                return Err(Error::Estimation(format!("non-finite reward at row {i}, treatment {arm}")));
            }
            values.set(i, arm, v);
        }
    }
    RewardMatrix::new(values, space.candidate_labels())
}

fn check_space(space: &TreatmentSpace, t: usize) -> Result<()> {
    match space {
        TreatmentSpace::Discrete { labels } if labels.len() == t => Ok(()),
        TreatmentSpace::Discrete { labels } => Err(Error::input(format!(
            "treatment space has {} labels, data has {t} treatments",
            labels.len()
        ))),
        TreatmentSpace::Continuous { .. } => Err(Error::input("discrete data needs a discrete treatment space")),
    }
}

fn check_doses(ds: &Dataset, space: &TreatmentSpace) -> Result<()> {
    let TreatmentSpace::Continuous { doses } = space else {
        return Err(Error::input("dose data needs a continuous treatment space"));
    };
    let d = ds.doses()?;
    if d.cols() != doses.len() {
        return Err(Error::input(format!(
            "data has {} dose columns, treatment space declares {}",
            d.cols(),
            doses.len()
        )));
    }
    for i in 0..d.rows() {
        for (k, range) in doses.iter().enumerate() {
            if !range.contains(d.get(i, k)) {
                return Err(Error::input(format!(
                    "dose {} of '{}' at row {i} outside [{}, {}]",
                    d.get(i, k),
                    range.name,
                    range.lo,
                    range.hi
                )));
            }
        }
    }
    Ok(())
}

/// `[features ‖ doses of candidate t]` for every row.
fn with_candidate(features: &Matrix, combo: &[f64]) -> Matrix {
    let n = features.rows();
    let mut data = Vec::with_capacity(n * (features.cols() + combo.len()));
    for row in features.iter_rows() {
        data.extend_from_slice(row);
        data.extend_from_slice(combo);
    }
    Matrix::new(n, features.cols() + combo.len(), data).expect("shape is consistent")
}

/// A regressor of the outcome on features and doses, evaluated over the
/// candidate grid.
pub struct DoseResponse {
    model: Box<dyn Regressor>,
    space: TreatmentSpace,
}

impl DoseResponse {
    pub fn fit(ds: &Dataset, space: &TreatmentSpace, learner: &dyn RegressionLearner) -> Result<Self> {
        check_doses(ds, space)?;
        if ds.n_rows() < learner.min_rows() {
            return Err(Error::Estimation(format!(
                "{} rows, the dose-response model needs at least {}",
                ds.n_rows(),
                learner.min_rows()
            )));
        }
        let x = ds.features().hstack(ds.doses()?)?;
        let model = learner.fit_regression(&x, ds.outcomes(), OUTCOME_STREAM)?;
        Ok(DoseResponse {
            model,
            space: space.clone(),
        })
    }

    /// Predicted outcome of each row under each candidate dose combination.
    pub fn rewards(&self, features: &Matrix) -> Result<RewardMatrix> {
        let t = self.space.n_candidates();
        let cols: Vec<Result<Vec<f64>>> = (0..t)
            .into_par_iter()
            .map(|c| {
                let combo = self.space.candidate_doses(c).expect("candidate in range");
                self.model.predict(&with_candidate(features, &combo))
            })
            .collect();
        let cols = cols.into_iter().collect::<Result<Vec<_>>>()?;
        RewardMatrix::new(Matrix::from_columns(&cols)?, self.space.candidate_labels())
    }
}

pub fn continuous_dose_rewards(
    ds: &Dataset,
    space: &TreatmentSpace,
    learner: &dyn RegressionLearner,
) -> Result<RewardMatrix> {
    DoseResponse::fit(ds, space, learner)?.rewards(ds.features())
}

/// Rewards for a 0/1 outcome: the predicted probability of the event under
/// each candidate. Discrete spaces use one classifier per arm; dose spaces
/// one classifier on features and doses.
pub fn binary_outcome_rewards(
    ds: &Dataset,
    space: &TreatmentSpace,
    learner: &dyn ClassificationLearner,
) -> Result<RewardMatrix> {
    let y = ds.outcomes();
    if let Some(i) = y.iter().position(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::input(format!("outcome {} at row {i} is not 0 or 1", y[i])));
    }
    let events: Vec<usize> = y.iter().map(|&v| v as usize).collect();
    let x = ds.features();
    let event_prob = |model: &dyn Classifier, m: &Matrix| -> Result<Vec<f64>> {
        let p = model.predict_proba(m)?;
        Ok((0..p.rows()).map(|i| p.get(i, 1)).collect())
    };
    let cols: Vec<Vec<f64>> = match ds.treatments() {
        Treatments::Discrete { labels, n_treatments } => {
            check_space(space, *n_treatments)?;
            (0..*n_treatments)
                .into_par_iter()
                .map(|arm| {
                    let rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == arm).collect();
                    if rows.is_empty() {
                        return Err(Error::Estimation(format!("treatment {arm} has no rows")));
                    }
                    let ev: Vec<usize> = rows.iter().map(|&i| events[i]).collect();
                    let model = learner.fit_classification(&x.select_rows(&rows), &ev, 2, OUTCOME_STREAM + arm as u64)?;
                    event_prob(model.as_ref(), x)
                })
                .collect::<Result<Vec<_>>>()?
        }
        Treatments::Continuous(doses) => {
            check_doses(ds, space)?;
            let model = learner.fit_classification(&x.hstack(doses)?, &events, 2, OUTCOME_STREAM)?;
            (0..space.n_candidates())
                .into_par_iter()
                .map(|c| {
                    let combo = space.candidate_doses(c).expect("candidate in range");
                    event_prob(model.as_ref(), &with_candidate(x, &combo))
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    RewardMatrix::new(Matrix::from_columns(&cols)?, space.candidate_labels())
}

/// `L[j][k]`: cost of assigning an observation of class `j` to class `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyMatrix {
    values: Matrix,
}

impl PenaltyMatrix {
    pub fn new(values: Matrix) -> Result<Self> {
        if values.rows() != values.cols() || values.rows() < 2 {
            return Err(Error::input(format!(
                "penalty matrix must be square with at least two classes, got {}x{}",
                values.rows(),
                values.cols()
            )));
        }
        if let Some((i, j)) = values.first_non_finite() {
            return Err(Error::input(format!("non-finite penalty at ({i}, {j})")));
        }
        Ok(PenaltyMatrix { values })
    }

    /// Zero on the diagonal, one elsewhere: plain misclassification.
    pub fn zero_one(k: usize) -> Result<Self> {
        let mut m = Matrix::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    m.set(i, j, 1.0);
                }
            }
        }
        PenaltyMatrix::new(m)
    }

    pub fn n_classes(&self) -> usize {
        self.values.rows()
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.values.get(j, k)
    }
}

/// `Γ[i][t] = L[z_i][t]`; features play no part.
pub fn penalty_rewards(labels: &[usize], penalty: &PenaltyMatrix, names: Vec<String>) -> Result<RewardMatrix> {
    let k = penalty.n_classes();
    if let Some(i) = labels.iter().position(|&z| z >= k) {
        return Err(Error::input(format!("class {} at row {i} outside 0..{k}", labels[i])));
    }
    let mut values = Matrix::zeros(labels.len(), k);
    for (i, &z) in labels.iter().enumerate() {
        values.row_mut(i).copy_from_slice(penalty.values.row(z));
    }
    RewardMatrix::new(values, names)
}
