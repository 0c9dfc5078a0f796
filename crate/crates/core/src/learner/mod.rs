//! Training policy trees against a reward matrix.
//!
//! All learners minimize the penalized objective
//! `mean_i Γ[i, τ(x_i)] + alpha · (#branch nodes)`, with leaves always
//! prescribing the column that minimizes their reward sum.
//!
//! * [`fit_optimal`]: local-search coordinate descent with restarts.
//! * [`fit_greedy`]: top-down induction, the usual baseline.
//! * [`fit_exhaustive`]: exact search for small instances, used as an oracle.
//! * [`tune`]: validation-based selection of depth and `alpha`.

mod exhaustive;
mod greedy;
mod optimal;
mod split;
mod state;
mod tune;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Hyperparameters, Matrix, PolicyTree, RewardMatrix};

pub use exhaustive::{fit_exhaustive, MAX_EXHAUSTIVE_CANDIDATES};
pub use greedy::fit_greedy;
pub use optimal::{fit_optimal, fit_optimal_with_report, FitReport, InitKind, RestartTrace};
pub use tune::{tune, tune_with_report, CellScore, TuneGrid, TuneReport, TIE_WIDTH};

/// Training algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Greedy,
    Optimal,
    Exhaustive,
}

impl Method {
    pub fn fit(self, rewards: &RewardMatrix, features: &Matrix, hp: &Hyperparameters) -> Result<PolicyTree> {
        match self {
            Method::Greedy => fit_greedy(rewards, features, hp),
            Method::Optimal => fit_optimal(rewards, features, hp),
            Method::Exhaustive => fit_exhaustive(rewards, features, hp),
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(Method::Greedy),
            "optimal" => Ok(Method::Optimal),
            "exhaustive" => Ok(Method::Exhaustive),
            other => Err(Error::config(format!(
                "unknown method '{other}' (expected greedy, optimal or exhaustive)"
            ))),
        }
    }
}

/// Best treatment for a set of rows and its reward sum. Ties go to the
/// lowest treatment index.
pub fn leaf_best_treatment(rows: &[usize], rewards: &RewardMatrix) -> Result<(usize, f64)> {
    if rows.is_empty() {
        return Err(Error::Internal("leaf with no rows".into()));
    }
    if let Some(&i) = rows.iter().find(|&&i| i >= rewards.n_rows()) {
        return Err(Error::input(format!("row {i} outside the reward matrix")));
    }
    Ok(split::best_column(&rewards.column_sums(rows)))
}

/// `candidate` beats `incumbent` by more than rounding noise.
#[inline]
pub(crate) fn improves(candidate: f64, incumbent: f64) -> bool {
    candidate < incumbent - 1e-10 * (1.0 + incumbent.abs())
}

pub(crate) fn check_problem(rewards: &RewardMatrix, features: &Matrix, hp: &Hyperparameters) -> Result<()> {
    hp.validate()?;
    if rewards.n_rows() != features.rows() {
        return Err(Error::input(format!(
            "{} reward rows for {} feature rows",
            rewards.n_rows(),
            features.rows()
        )));
    }
    if features.cols() == 0 {
        return Err(Error::input("feature matrix has no columns"));
    }
    if let Some((i, j)) = features.first_non_finite() {
        return Err(Error::input(format!("non-finite feature at row {i}, column {j}")));
    }
    if rewards.n_rows() < hp.min_leaf || rewards.n_rows() == 0 {
        return Err(Error::input(format!(
            "{} rows cannot fill a leaf of min_leaf {}",
            rewards.n_rows(),
            hp.min_leaf
        )));
    }
    Ok(())
}
