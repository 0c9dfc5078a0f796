//! Learn interpretable tree-structured prescription policies from
//! observational data.
//!
//! The pipeline has two stages. First, [`estimation`] turns observational
//! data into a complete [`RewardMatrix`]: the outcome of every row under
//! every candidate treatment (doubly-robust estimates for discrete
//! treatments, dose-response regression for continuous doses). Second,
//! [`learner`] searches for the axis-aligned tree whose leaf prescriptions
//! minimize the mean reward, using local-search coordinate descent with
//! random restarts. Lower outcomes are better throughout.
//!
//! [`bench`] generates synthetic problems with known counterfactuals and
//! measures regret; [`cli`] backs the `policy-tree` command.

pub mod bench;
pub mod cli;
pub mod error;
pub mod estimation;
pub mod forest;
pub mod learner;
pub mod model;
pub mod rng;

pub use error::{Error, Result};
pub use model::{
    Dataset, DoseRange, Hyperparameters, Matrix, Node, PolicyTree, RewardMatrix, TreatmentSpace,
    Treatments,
};
