use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generate::{Design, Generator, OracleSet};
use crate::error::{Error, Result};
use crate::estimation::{
    doubly_robust_rewards, estimate_outcomes, estimate_propensity, DoseResponse, EstimationOptions,
};
use crate::forest::ForestConfig;
use crate::learner::{tune, Method, TuneGrid};
use crate::model::{Hyperparameters, Matrix, RewardMatrix, Treatments};
use crate::rng;

const TEST_STREAM: u64 = 0x7e57;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchMethod {
    GreedyPolicy,
    OptimalPolicy,
    RegressCompare,
}

impl BenchMethod {
    pub const ALL: [BenchMethod; 3] = [
        BenchMethod::GreedyPolicy,
        BenchMethod::OptimalPolicy,
        BenchMethod::RegressCompare,
    ];
}

impl fmt::Display for BenchMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BenchMethod::GreedyPolicy => "greedy-policy",
            BenchMethod::OptimalPolicy => "optimal-policy",
            BenchMethod::RegressCompare => "regress-compare",
        })
    }
}

impl FromStr for BenchMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BenchMethod::ALL
            .into_iter()
            .find(|m| m.to_string() == s)
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown benchmark method '{s}' (expected greedy-policy, optimal-policy or regress-compare)"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub design: String,
    pub methods: Vec<BenchMethod>,
    pub n_grid: Vec<usize>,
    pub repetitions: usize,
    pub n_test: usize,
    pub noise_sd: f64,
    pub seed: u64,
    /// Local-search restarts per fit.
    pub restarts: usize,
    pub grid: TuneGrid,
    pub estimation: EstimationOptions,
    /// Also fit every policy method at the largest grid depth with
    /// `alpha = 0` and record that training objective, so the methods can
    /// be compared under identical hyperparameters.
    pub reference_objective: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            design: "binary-1".into(),
            methods: BenchMethod::ALL.to_vec(),
            n_grid: vec![100, 500, 2000, 5000],
            repetitions: 10,
            n_test: 10_000,
            noise_sd: 0.1,
            seed: 0,
            restarts: 10,
            grid: TuneGrid::default(),
            estimation: EstimationOptions::default(),
            reference_objective: true,
        }
    }
}

/// One (method, n, repetition) result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretRow {
    pub design: String,
    pub method: BenchMethod,
    pub n: usize,
    pub repetition: usize,
    pub regret: f64,
    /// Training objective at the shared reference hyperparameters.
    pub train_objective: Option<f64>,
    pub max_depth: Option<usize>,
    pub alpha: Option<f64>,
    pub n_branches: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub design: String,
    pub method: BenchMethod,
    pub n: usize,
    pub repetitions: usize,
    pub mean_regret: f64,
    pub se_regret: f64,
    pub mean_train_objective: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegretTable {
    pub rows: Vec<RegretRow>,
}

impl RegretTable {
    /// Mean and standard error per (method, n), in order of first appearance.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut keys: Vec<(String, BenchMethod, usize)> = Vec::new();
        for r in &self.rows {
            let k = (r.design.clone(), r.method, r.n);
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
        keys.into_iter()
            .map(|(design, method, n)| {
                let group: Vec<&RegretRow> = self
                    .rows
                    .iter()
                    .filter(|r| r.design == design && r.method == method && r.n == n)
                    .collect();
                let regrets: Vec<f64> = group.iter().map(|r| r.regret).collect();
                let (mean, se) = mean_se(&regrets);
                let objs: Option<Vec<f64>> = group.iter().map(|r| r.train_objective).collect();
                SummaryRow {
                    design,
                    method,
                    n,
                    repetitions: group.len(),
                    mean_regret: mean,
                    se_regret: se,
                    mean_train_objective: objs.map(|o| mean_se(&o).0),
                }
            })
            .collect()
    }

    pub fn write_detail<W: Write>(&self, w: W) -> Result<()> {
        write_rows(w, &self.rows)
    }

    pub fn write_summary<W: Write>(&self, w: W) -> Result<()> {
        write_rows(w, &self.summary())
    }
}

fn write_rows<W: Write, R: Serialize>(w: W, rows: &[R]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

/// Sample mean and its standard error.
pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Mean over rows of the prescribed outcome minus the best outcome.
pub fn mean_regret(prescriptions: &[usize], oracle: &OracleSet) -> Result<f64> {
    if prescriptions.len() != oracle.n_rows() {
        return Err(Error::input(format!(
            "{} prescriptions for {} oracle rows",
            prescriptions.len(),
            oracle.n_rows()
        )));
    }
    let t = oracle.outcomes.cols();
    let mut total = 0.0;
    for (i, &p) in prescriptions.iter().enumerate() {
        if p >= t {
            return Err(Error::input(format!("prescription {p} at row {i} outside 0..{t}")));
        }
        total += oracle.outcomes.get(i, p) - oracle.outcomes.get(i, oracle.optimal[i]);
    }
    Ok(total / prescriptions.len().max(1) as f64)
}

fn argmin_rows(m: &Matrix) -> Vec<usize> {
    m.iter_rows()
        .map(|r| (0..r.len()).fold(0, |b, t| if r[t] < r[b] { t } else { b }))
        .collect()
}

/// Training rewards plus the regress-and-compare reward estimate on the test rows.
fn estimate(
    ds: &crate::model::Dataset,
    design: &Design,
    test: &Matrix,
    opts: &EstimationOptions,
) -> Result<(RewardMatrix, Matrix)> {
    let space = design.treatment_space();
    match ds.treatments() {
        Treatments::Discrete { .. } => {
            let prop = estimate_propensity(ds, &opts.propensity, &opts.propensity_forest)?;
            let out = estimate_outcomes(ds, &opts.forest)?;
            let rewards = doubly_robust_rewards(ds, &space, &prop, &out)?;
            let cols: Vec<Vec<f64>> = out.models.iter().map(|m| m.predict(test)).collect::<Result<_>>()?;
            Ok((rewards, Matrix::from_columns(&cols)?))
        }
        Treatments::Continuous(_) => {
            let model = DoseResponse::fit(ds, &space, &opts.forest)?;
            let rewards = model.rewards(ds.features())?;
            let test_rewards = model.rewards(test)?;
            Ok((rewards, test_rewards.values().clone()))
        }
    }
}

fn with_seed(f: ForestConfig, seed: u64) -> ForestConfig {
    ForestConfig {
        seed: rng::derive_seed(&[f.seed, seed]),
        ..f
    }
}

fn run_job(cfg: &ExperimentConfig, gen: &Generator, n: usize, rep: usize) -> Result<Vec<RegretRow>> {
    let job_seed = rng::derive_seed(&[cfg.seed, n as u64, rep as u64]);
    let (ds, _) = gen.sample(n, cfg.noise_sd, job_seed)?;
    let test = gen.oracle(cfg.n_test, rng::derive_seed(&[cfg.seed, rep as u64, TEST_STREAM]));
    let mut opts = cfg.estimation;
    opts.forest = with_seed(opts.forest, job_seed);
    opts.propensity_forest = with_seed(opts.propensity_forest, job_seed);
    opts.propensity.seed = job_seed;
    let (rewards, test_rewards) = estimate(&ds, gen.design(), &test.features, &opts)?;

    let base = Hyperparameters {
        restarts: cfg.restarts,
        seed: job_seed,
        min_leaf: cfg.grid.min_leaf,
        ..Default::default()
    };
    let reference = Hyperparameters {
        max_depth: cfg.grid.depths.iter().copied().max().unwrap_or(0),
        alpha: 0.0,
        ..base
    };
    let mut rows = Vec::new();
    for &method in &cfg.methods {
        let row = |regret, obj, hp: Option<Hyperparameters>, branches| RegretRow {
            design: cfg.design.clone(),
            method,
            n,
            repetition: rep,
            regret,
            train_objective: obj,
            max_depth: hp.map(|h| h.max_depth),
            alpha: hp.map(|h| h.alpha),
            n_branches: branches,
        };
        match method {
            BenchMethod::RegressCompare => {
                let regret = mean_regret(&argmin_rows(&test_rewards), &test)?;
                rows.push(row(regret, None, None, None));
            }
            BenchMethod::GreedyPolicy | BenchMethod::OptimalPolicy => {
                let learner = if method == BenchMethod::GreedyPolicy {
                    Method::Greedy
                } else {
                    Method::Optimal
                };
                let (hp, tree) = tune(&rewards, ds.features(), &cfg.grid, &base, learner)?;
                let regret = mean_regret(&tree.prescribe_batch(&test.features)?, &test)?;
                let obj = if cfg.reference_objective {
                    Some(learner.fit(&rewards, ds.features(), &reference)?.penalized_objective_train())
                } else {
                    None
                };
                rows.push(row(regret, obj, Some(hp), Some(tree.n_branches())));
            }
        }
    }
    Ok(rows)
}

/// Runs every (n, repetition) job of a design and collects the regrets.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RegretTable> {
    let design = Design::from_id(&cfg.design)?;
    if cfg.methods.is_empty() || cfg.n_grid.is_empty() || cfg.repetitions == 0 || cfg.n_test == 0 {
        return Err(Error::config(
            "benchmark needs at least one method, training size, repetition and test row",
        ));
    }
    cfg.grid.validate()?;
    let gen = Generator::new(design, cfg.seed)?;
    let jobs: Vec<(usize, usize)> = cfg
        .n_grid
        .iter()
        .flat_map(|&n| (0..cfg.repetitions).map(move |r| (n, r)))
        .collect();
    let results: Vec<Result<Vec<RegretRow>>> = jobs.par_iter().map(|&(n, r)| run_job(cfg, &gen, n, r)).collect();
    let mut rows = Vec::new();
    for res in results {
        rows.extend(res?);
    }
    // method-major order reads better than job order
    rows.sort_by_key(|r| (cfg.methods.iter().position(|m| *m == r.method), r.n, r.repetition));
    Ok(RegretTable { rows })
}
