use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Bernoulli, Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::functions::{FnId, GnId, Standardized};
use crate::error::{Error, Result};
use crate::model::{default_feature_names, Dataset, DoseRange, Matrix, TreatmentSpace, Treatments};
use crate::rng;

/// Feature dimension of every synthetic problem.
pub const N_FEATURES: usize = 10;
/// Rows in the sample that fixes the standardization constants.
pub const REFERENCE_ROWS: usize = 100_000;
/// Candidate doses drawn per row when assigning treatments.
pub const DOSE_CANDIDATES: usize = 5;
pub const DOSE_RANGE: (f64, f64) = (-4.0, 4.0);

const REFERENCE_STREAM: u64 = 0x5eed_0001;

/// Odd coordinates (1-based) standard normal, even coordinates Bernoulli(½).
pub fn sample_features(n: usize, seed: u64) -> Matrix {
    let mut r = rng::stream(seed, 0);
    let coin = Bernoulli::new(0.5).expect("valid probability");
    let mut data = Vec::with_capacity(n * N_FEATURES);
    for _ in 0..n {
        for j in 0..N_FEATURES {
            data.push(if j % 2 == 0 {
                StandardNormal.sample(&mut r)
            } else {
                f64::from(u8::from(coin.sample(&mut r)))
            });
        }
    }
    Matrix::new(n, N_FEATURES, data).expect("shape is consistent")
}

/// A synthetic problem family and its functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Design {
    Binary { baseline: FnId, effect: FnId },
    MultiDiscrete { baseline: FnId, effect1: FnId, effect2: FnId },
    SingleContinuous { outcome: GnId },
    MultiContinuous { outcome1: GnId, outcome2: GnId },
}

pub const DESIGN_IDS: [&str; 15] = [
    "binary-1",
    "binary-2",
    "binary-3",
    "binary-4",
    "binary-5",
    "binary-6",
    "binary-7",
    "multi-1",
    "multi-2",
    "continuous-1",
    "continuous-2",
    "continuous-3",
    "continuous-4",
    "multicont-1",
    "multicont-2",
];

impl Design {
    pub fn from_id(id: &str) -> Result<Self> {
        use FnId::*;
        use GnId::*;
        let bin = |baseline, effect| Design::Binary { baseline, effect };
        let single = |outcome| Design::SingleContinuous { outcome };
        Ok(match id {
            "binary-1" => bin(F5, F2),
            "binary-2" => bin(F4, F3),
            "binary-3" => bin(F7, F4),
            "binary-4" => bin(F3, F5),
            "binary-5" => bin(F1, F6),
            "binary-6" => bin(F2, F7),
            "binary-7" => bin(F6, F8),
            "multi-1" => Design::MultiDiscrete {
                baseline: F7,
                effect1: F4,
                effect2: F2,
            },
            "multi-2" => Design::MultiDiscrete {
                baseline: F6,
                effect1: F2,
                effect2: F7,
            },
            "continuous-1" => single(G1),
            "continuous-2" => single(G2),
            "continuous-3" => single(G3),
            "continuous-4" => single(G4),
            "multicont-1" => Design::MultiContinuous {
                outcome1: G1,
                outcome2: G2,
            },
            "multicont-2" => Design::MultiContinuous {
                outcome1: G3,
                outcome2: G4,
            },
            other => {
                return Err(Error::config(format!(
                    "unknown design '{other}'; valid designs: {}",
                    DESIGN_IDS.join(", ")
                )))
            }
        })
    }

    fn discrete_fns(&self) -> Vec<FnId> {
        match *self {
            Design::Binary { baseline, effect } => vec![baseline, effect],
            Design::MultiDiscrete {
                baseline,
                effect1,
                effect2,
            } => vec![baseline, effect1, effect2],
            _ => Vec::new(),
        }
    }

    /// Options a policy chooses among.
    pub fn treatment_space(&self) -> TreatmentSpace {
        let grid = |name: &str, size| DoseRange::evenly_spaced(name, DOSE_RANGE.0, DOSE_RANGE.1, size).expect("valid grid");
        let space = match self {
            Design::Binary { .. } => TreatmentSpace::discrete(["control", "treated"]),
            Design::MultiDiscrete { .. } => TreatmentSpace::discrete(["control", "treatment1", "treatment2"]),
            Design::SingleContinuous { .. } => TreatmentSpace::continuous(vec![grid("t", 10)]),
            Design::MultiContinuous { .. } => TreatmentSpace::continuous(vec![grid("t1", 6), grid("t2", 6)]),
        };
        space.expect("built-in spaces are valid")
    }
}

/// True outcomes of a set of rows under every candidate.
#[derive(Debug, Clone)]
pub struct OracleSet {
    pub features: Matrix,
    /// Noise-free outcome of every row under every candidate (n × T).
    pub outcomes: Matrix,
    /// Row-wise argmin of `outcomes`, lowest index on ties.
    pub optimal: Vec<usize>,
    /// Assignment probabilities for discrete designs (n × T).
    pub propensities: Option<Matrix>,
}

impl OracleSet {
    fn new(features: Matrix, outcomes: Matrix, propensities: Option<Matrix>) -> Self {
        let optimal = outcomes
            .iter_rows()
            .map(|r| (0..r.len()).fold(0, |b, t| if r[t] < r[b] { t } else { b }))
            .collect();
        OracleSet {
            features,
            outcomes,
            optimal,
            propensities,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.outcomes.rows()
    }
}

/// Training-set specification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub design: Design,
    pub n_train: usize,
    pub noise_sd: f64,
    pub seed: u64,
}

/// A design with its standardization constants fixed.
#[derive(Debug, Clone)]
pub struct Generator {
    design: Design,
    standardized: HashMap<FnId, Standardized>,
}

impl Generator {
    /// Estimates standardization constants on a reference sample drawn from
    /// `seed`; every data set produced by this generator shares them.
    pub fn new(design: Design, seed: u64) -> Result<Self> {
        let fns = design.discrete_fns();
        let mut standardized = HashMap::new();
        if !fns.is_empty() {
            let reference = sample_features(REFERENCE_ROWS, rng::derive_seed(&[seed, REFERENCE_STREAM]));
            for id in fns {
                standardized.insert(id, Standardized::fit(id, &reference)?);
            }
        }
        Ok(Generator { design, standardized })
    }

    pub fn design(&self) -> &Design {
        &self.design
    }

    fn f(&self, id: FnId, x: &[f64]) -> f64 {
        self.standardized[&id].eval(x)
    }

    /// True outcomes of `x` under every candidate of the design's space.
    pub fn outcomes(&self, x: &[f64]) -> Vec<f64> {
        match self.design {
            Design::Binary { baseline, effect } => {
                let (b, e) = (self.f(baseline, x), self.f(effect, x));
                vec![b - 0.5 * e, b + 0.5 * e]
            }
            Design::MultiDiscrete {
                baseline,
                effect1,
                effect2,
            } => {
                let b = self.f(baseline, x);
                vec![b, b + self.f(effect1, x), b + self.f(effect2, x)]
            }
            Design::SingleContinuous { .. } | Design::MultiContinuous { .. } => {
                let space = self.design.treatment_space();
                (0..space.n_candidates())
                    .map(|t| self.dose_outcome(x, &space.candidate_doses(t).expect("candidate in range")))
                    .collect()
            }
        }
    }

    /// Outcome at an arbitrary dose vector (continuous designs).
    pub fn dose_outcome(&self, x: &[f64], doses: &[f64]) -> f64 {
        match self.design {
            Design::SingleContinuous { outcome } => outcome.eval(x, doses[0]),
            Design::MultiContinuous { outcome1, outcome2 } => outcome1.eval(x, doses[0]) + outcome2.eval(x, doses[1]),
            _ => panic!("dose outcome requested for a discrete design"),
        }
    }

    /// Assignment probabilities for a discrete design.
    pub fn propensities(&self, y: &[f64]) -> Vec<f64> {
        let y0 = y[0];
        match self.design {
            Design::Binary { .. } => {
                let p1 = logistic(y0);
                vec![1.0 - p1, p1]
            }
            Design::MultiDiscrete { .. } => {
                let p0 = 1.0 / (1.0 + y0.exp());
                vec![p0, 0.5 * (1.0 - p0), 0.5 * (1.0 - p0)]
            }
            _ => panic!("propensities requested for a continuous design"),
        }
    }

    /// Oracle for `n` fresh rows, without a training data set.
    pub fn oracle(&self, n: usize, seed: u64) -> OracleSet {
        let x = sample_features(n, seed);
        let outcomes = self.outcome_matrix(&x);
        OracleSet::new(x, outcomes, None)
    }

    fn outcome_matrix(&self, x: &Matrix) -> Matrix {
        let rows: Vec<Vec<f64>> = x.iter_rows().map(|r| self.outcomes(r)).collect();
        Matrix::from_rows(&rows).expect("rows share a length")
    }

    /// Observational training data with biased assignment and noisy
    /// outcomes, plus the oracle for the same rows.
    pub fn sample(&self, n: usize, noise_sd: f64, seed: u64) -> Result<(Dataset, OracleSet)> {
        if n == 0 {
            return Err(Error::config("training set size must be positive"));
        }
        let noise = Normal::new(0.0, noise_sd).map_err(|e| Error::config(format!("noise sd: {e}")))?;
        let x = sample_features(n, seed);
        let mut r = rng::stream(seed, 1);
        let outcomes = self.outcome_matrix(&x);
        let names = default_feature_names(N_FEATURES);
        match self.design {
            Design::Binary { .. } | Design::MultiDiscrete { .. } => {
                let mut probs = Matrix::zeros(n, outcomes.cols());
                let mut labels = Vec::with_capacity(n);
                let mut y = Vec::with_capacity(n);
                for i in 0..n {
                    let p = self.propensities(outcomes.row(i));
                    let z = draw(&p, r.random());
                    probs.row_mut(i).copy_from_slice(&p);
                    labels.push(z);
                    y.push(outcomes.get(i, z) + noise.sample(&mut r));
                }
                let t = outcomes.cols();
                let ds = Dataset::new(
                    x.clone(),
                    y,
                    Treatments::Discrete {
                        labels,
                        n_treatments: t,
                    },
                    names,
                )?;
                Ok((ds, OracleSet::new(x, outcomes, Some(probs))))
            }
            Design::SingleContinuous { .. } | Design::MultiContinuous { .. } => {
                let m = if matches!(self.design, Design::SingleContinuous { .. }) { 1 } else { 2 };
                let mut doses = Matrix::zeros(n, m);
                let mut y = Vec::with_capacity(n);
                for i in 0..n {
                    let xi = x.row(i);
                    let cands: Vec<Vec<f64>> = (0..DOSE_CANDIDATES)
                        .map(|_| (0..m).map(|_| r.random_range(DOSE_RANGE.0..DOSE_RANGE.1)).collect())
                        .collect();
                    let ys: Vec<f64> = cands.iter().map(|d| self.dose_outcome(xi, d)).collect();
                    let k = draw(&softmax_neg(&ys), r.random());
                    doses.row_mut(i).copy_from_slice(&cands[k]);
                    y.push(ys[k] + noise.sample(&mut r));
                }
                let ds = Dataset::new(x.clone(), y, Treatments::Continuous(doses), names)?;
                Ok((ds, OracleSet::new(x, outcomes, None)))
            }
        }
    }
}

impl GeneratorSpec {
    pub fn generate(&self) -> Result<(Dataset, OracleSet)> {
        Generator::new(self.design, self.seed)?.sample(self.n_train, self.noise_sd, self.seed)
    }
}

impl FromStr for Design {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Design::from_id(s)
    }
}

impl fmt::Display for Design {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Design::Binary { baseline, effect } => write!(f, "binary({baseline}, {effect})"),
            Design::MultiDiscrete {
                baseline,
                effect1,
                effect2,
            } => write!(f, "multi({baseline}, {effect1}, {effect2})"),
            Design::SingleContinuous { outcome } => write!(f, "continuous({outcome})"),
            Design::MultiContinuous { outcome1, outcome2 } => write!(f, "multicont({outcome1}, {outcome2})"),
        }
    }
}

pub fn logistic(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Softmax of the negated outcomes: lower outcomes get more weight.
pub fn softmax_neg(ys: &[f64]) -> Vec<f64> {
    let lo = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = ys.iter().map(|y| (lo - y).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// Index drawn from `probs` with a uniform `u` in [0, 1).
pub fn draw(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs.len() - 1
}
