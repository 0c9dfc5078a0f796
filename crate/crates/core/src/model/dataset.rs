use super::Matrix;
use crate::error::{Error, Result};

/// Observed treatment column.
#[derive(Debug, Clone, PartialEq)]
pub enum Treatments {
    /// Zero-based treatment index per row, out of `n_treatments` options.
    Discrete {
        labels: Vec<usize>,
        n_treatments: usize,
    },
    /// One dose per row per treatment (n × m).
    Continuous(Matrix),
}

/// Observational data: features, observed outcomes and observed treatments.
#[derive(Debug, Clone)]
pub struct Dataset {
    features: Matrix,
    outcomes: Vec<f64>,
    treatments: Treatments,
    feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        features: Matrix,
        outcomes: Vec<f64>,
        treatments: Treatments,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let n = features.rows();
        if n == 0 || features.cols() == 0 {
            return Err(Error::input("dataset needs at least one row and one feature"));
        }
        if outcomes.len() != n {
            return Err(Error::input(format!(
                "{} outcomes for {n} feature rows",
                outcomes.len()
            )));
        }
        if feature_names.len() != features.cols() {
            return Err(Error::input(format!(
                "{} feature names for {} feature columns",
                feature_names.len(),
                features.cols()
            )));
        }
        if let Some((i, j)) = features.first_non_finite() {
            return Err(Error::input(format!("non-finite feature at row {i}, column {j}")));
        }
        if let Some(i) = outcomes.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!("non-finite outcome at row {i}")));
        }
        match &treatments {
            Treatments::Discrete {
                labels,
                n_treatments,
            } => {
                if labels.len() != n {
                    return Err(Error::input(format!(
                        "{} treatment labels for {n} rows",
                        labels.len()
                    )));
                }
                if let Some(i) = labels.iter().position(|&z| z >= *n_treatments) {
                    return Err(Error::input(format!(
                        "treatment label {} at row {i} outside 0..{n_treatments}",
                        labels[i]
                    )));
                }
            }
            Treatments::Continuous(doses) => {
                if doses.rows() != n || doses.cols() == 0 {
                    return Err(Error::input(format!(
                        "dose matrix is {}x{}, expected {n} rows and at least one column",
                        doses.rows(),
                        doses.cols()
                    )));
                }
                if let Some((i, j)) = doses.first_non_finite() {
                    return Err(Error::input(format!("non-finite dose at row {i}, column {j}")));
                }
            }
        }
        Ok(Dataset {
            features,
            outcomes,
            treatments,
            feature_names,
        })
    }

    /// Convenience constructor with generated feature names `x1..xp`.
    pub fn unnamed(features: Matrix, outcomes: Vec<f64>, treatments: Treatments) -> Result<Self> {
        let names = default_feature_names(features.cols());
        Dataset::new(features, outcomes, treatments, names)
    }

    pub fn n_rows(&self) -> usize {
        self.features.rows()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn treatments(&self) -> &Treatments {
        &self.treatments
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Discrete labels and treatment count, or an input error for dose data.
    pub fn discrete_labels(&self) -> Result<(&[usize], usize)> {
        match &self.treatments {
            Treatments::Discrete {
                labels,
                n_treatments,
            } => Ok((labels, *n_treatments)),
            Treatments::Continuous(_) => {
                Err(Error::input("expected discrete treatments, found dose columns"))
            }
        }
    }

    pub fn doses(&self) -> Result<&Matrix> {
        match &self.treatments {
            Treatments::Continuous(d) => Ok(d),
            Treatments::Discrete { .. } => {
                Err(Error::input("expected dose columns, found discrete treatments"))
            }
        }
    }

    /// Flips the sign of every outcome so that larger-is-better data can be
    /// fed to the lower-is-better internals.
    pub fn negate_outcomes(mut self) -> Self {
        for y in &mut self.outcomes {
            *y = -*y;
        }
        self
    }
}

pub fn default_feature_names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("x{j}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feats() -> Matrix {
        Matrix::from_rows(&[[0.0, 1.0], [2.0, 3.0]]).unwrap()
    }

    #[test]
    fn rejects_bad_shapes() {
        let t = Treatments::Discrete {
            labels: vec![0, 1],
            n_treatments: 2,
        };
        assert!(Dataset::unnamed(feats(), vec![1.0], t.clone()).is_err());
        assert!(Dataset::unnamed(feats(), vec![1.0, f64::INFINITY], t.clone()).is_err());
        let bad = Treatments::Discrete {
            labels: vec![0, 2],
            n_treatments: 2,
        };
        assert!(Dataset::unnamed(feats(), vec![1.0, 2.0], bad).is_err());
        assert!(Dataset::unnamed(feats(), vec![1.0, 2.0], t).is_ok());
    }

    #[test]
    fn negation() {
        let t = Treatments::Discrete {
            labels: vec![0, 1],
            n_treatments: 2,
        };
        let ds = Dataset::unnamed(feats(), vec![1.0, -2.0], t).unwrap();
        assert_eq!(ds.negate_outcomes().outcomes(), &[-1.0, 2.0]);
    }
}
