//! Shared domain types: datasets, treatment spaces, reward matrices and
//! policy trees.

mod dataset;
pub mod document;
mod matrix;
mod rewards;
mod treatment;
mod tree;

pub use dataset::{default_feature_names, Dataset, Treatments};
pub use matrix::Matrix;
pub use rewards::RewardMatrix;
pub use treatment::{DoseRange, TreatmentSpace};
pub use tree::{Hyperparameters, Node, PathStep, PolicyTree};
