//! Building reward matrices from observational data.
//!
//! For discrete treatments the rewards are doubly-robust estimates combining
//! cross-fit propensity scores with per-arm outcome regressions. For
//! continuous doses a single regression on features and doses is evaluated
//! at every candidate dose combination. Binary outcomes use predicted event
//! probabilities, and weighted-loss classification builds the matrix
//! directly from a penalty table.

mod outcome;
mod propensity;
mod rewards;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::forest::ForestConfig;
use crate::model::{Dataset, RewardMatrix, TreatmentSpace, Treatments};

pub use outcome::{estimate_outcomes, OutcomeEstimate};
pub use propensity::{clip_row, estimate_propensity, stratified_folds, PropensityEstimate, PropensityOptions};
pub use rewards::{
    binary_outcome_rewards, continuous_dose_rewards, doubly_robust_rewards, dr_entry, penalty_rewards,
    DoseResponse, PenaltyMatrix,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimationOptions {
    /// Outcome and dose-response models.
    pub forest: ForestConfig,
    /// Propensity models. Larger leaves than the outcome forest: propensities
    /// feed a denominator, so smoothness matters more than sharp fits.
    pub propensity_forest: ForestConfig,
    pub propensity: PropensityOptions,
    /// Treat outcomes as 0/1 events and use predicted probabilities.
    pub binary_outcome: bool,
}

impl Default for EstimationOptions {
    fn default() -> Self {
        EstimationOptions {
            forest: ForestConfig::default(),
            propensity_forest: ForestConfig {
                min_leaf: 50,
                ..Default::default()
            },
            propensity: PropensityOptions::default(),
            binary_outcome: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimationReport {
    pub estimator: String,
    pub n_rows: usize,
    pub n_candidates: usize,
    pub arm_sizes: Option<Vec<usize>>,
    pub k_folds: Option<usize>,
    pub fold_sizes: Option<Vec<usize>>,
    pub clip: Option<(f64, f64)>,
    pub n_clipped: Option<usize>,
}

/// Chooses the estimator from the data: doubly-robust for discrete
/// treatments, dose-response regression for doses, event probabilities when
/// `binary_outcome` is set.
pub fn estimate_rewards(
    ds: &Dataset,
    space: &TreatmentSpace,
    opts: &EstimationOptions,
) -> Result<(RewardMatrix, EstimationReport)> {
    space.validate()?;
    let arm_sizes = match ds.treatments() {
        Treatments::Discrete { labels, n_treatments } => {
            let mut sizes = vec![0; *n_treatments];
            labels.iter().for_each(|&z| sizes[z] += 1);
            Some(sizes)
        }
        Treatments::Continuous(_) => None,
    };
    let mut report = EstimationReport {
        estimator: String::new(),
        n_rows: ds.n_rows(),
        n_candidates: space.n_candidates(),
        arm_sizes,
        k_folds: None,
        fold_sizes: None,
        clip: None,
        n_clipped: None,
    };
    let rewards = if opts.binary_outcome {
        report.estimator = "binary_outcome".into();
        binary_outcome_rewards(ds, space, &opts.forest)?
    } else if matches!(ds.treatments(), Treatments::Continuous(_)) {
        report.estimator = "dose_response".into();
        continuous_dose_rewards(ds, space, &opts.forest)?
    } else {
        report.estimator = "doubly_robust".into();
        let prop = estimate_propensity(ds, &opts.propensity, &opts.propensity_forest)?;
        let out = estimate_outcomes(ds, &opts.forest)?;
        let mut fold_sizes = vec![0; prop.k_folds];
        prop.folds.iter().for_each(|&f| fold_sizes[f] += 1);
        report.k_folds = Some(prop.k_folds);
        report.fold_sizes = Some(fold_sizes);
        report.clip = Some(prop.clip);
        report.n_clipped = Some(prop.n_clipped);
        doubly_robust_rewards(ds, space, &prop, &out)?
    };
    Ok((rewards, report))
}
