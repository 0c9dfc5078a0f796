//! Synthetic problems with known counterfactuals, and a harness that
//! compares prescription methods by regret on held-out rows.

mod experiment;
mod functions;
mod generate;

pub use experiment::{
    mean_regret, mean_se, run_experiment, BenchMethod, ExperimentConfig, RegretRow, RegretTable, SummaryRow,
};
pub use functions::{FnId, GnId, Standardized, MIN_REFERENCE_ROWS};
pub use generate::{
    draw, logistic, sample_features, softmax_neg, Design, Generator, GeneratorSpec, OracleSet, DESIGN_IDS,
    DOSE_CANDIDATES, DOSE_RANGE, N_FEATURES, REFERENCE_ROWS,
};
