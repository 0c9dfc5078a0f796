use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Declared dose range for one continuous treatment, with its candidate grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoseRange {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub grid: Vec<f64>,
}

impl DoseRange {
    /// `size` evenly spaced candidates covering `[lo, hi]` including both ends.
    pub fn evenly_spaced(name: impl Into<String>, lo: f64, hi: f64, size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::config("dose grid must contain at least one value"));
        }
        let grid = if size == 1 {
            vec![0.5 * (lo + hi)]
        } else {
            let step = (hi - lo) / (size - 1) as f64;
            (0..size)
                .map(|k| if k + 1 == size { hi } else { lo + step * k as f64 })
                .collect()
        };
        let range = DoseRange {
            name: name.into(),
            lo,
            hi,
            grid,
        };
        range.validate()?;
        Ok(range)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi) {
            return Err(Error::config(format!(
                "dose range for '{}' must satisfy lo <= hi, got [{}, {}]",
                self.name, self.lo, self.hi
            )));
        }
        if self.grid.is_empty() {
            return Err(Error::config(format!("empty dose grid for '{}'", self.name)));
        }
        if self.grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::config(format!(
                "dose grid for '{}' must be strictly increasing",
                self.name
            )));
        }
        if self
            .grid
            .iter()
            .any(|&g| !g.is_finite() || g < self.lo || g > self.hi)
        {
            return Err(Error::config(format!(
                "dose grid for '{}' leaves [{}, {}]",
                self.name, self.lo, self.hi
            )));
        }
        Ok(())
    }

    pub fn contains(&self, dose: f64) -> bool {
        dose >= self.lo && dose <= self.hi
    }
}

/// The set of prescription options a policy chooses among.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreatmentSpace {
    Discrete { labels: Vec<String> },
    /// Candidates are the cross product of the per-treatment grids, with the
    /// last treatment varying fastest.
    Continuous { doses: Vec<DoseRange> },
}

impl TreatmentSpace {
    pub fn discrete<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let space = TreatmentSpace::Discrete {
            labels: labels.into_iter().map(Into::into).collect(),
        };
        space.validate()?;
        Ok(space)
    }

    pub fn continuous(doses: Vec<DoseRange>) -> Result<Self> {
        let space = TreatmentSpace::Continuous { doses };
        space.validate()?;
        Ok(space)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TreatmentSpace::Discrete { labels } => {
                if labels.len() < 2 {
                    return Err(Error::config("a discrete treatment space needs at least two labels"));
                }
                let mut seen = std::collections::HashSet::new();
                for l in labels {
                    if !seen.insert(l) {
                        return Err(Error::config(format!("duplicate treatment label '{l}'")));
                    }
                }
                Ok(())
            }
            TreatmentSpace::Continuous { doses } => {
                if doses.is_empty() {
                    return Err(Error::config("a continuous treatment space needs at least one dose range"));
                }
                doses.iter().try_for_each(DoseRange::validate)
            }
        }
    }

    pub fn n_candidates(&self) -> usize {
        match self {
            TreatmentSpace::Discrete { labels } => labels.len(),
            TreatmentSpace::Continuous { doses } => doses.iter().map(|d| d.grid.len()).product(),
        }
    }

    /// Dose combination for candidate `t` (continuous spaces only).
    pub fn candidate_doses(&self, t: usize) -> Option<Vec<f64>> {
        let TreatmentSpace::Continuous { doses } = self else {
            return None;
        };
        if t >= self.n_candidates() {
            return None;
        }
        let mut rem = t;
        let mut out = vec![0.0; doses.len()];
        for (k, d) in doses.iter().enumerate().rev() {
            out[k] = d.grid[rem % d.grid.len()];
            rem /= d.grid.len();
        }
        Some(out)
    }

    pub fn candidate_labels(&self) -> Vec<String> {
        match self {
            TreatmentSpace::Discrete { labels } => labels.clone(),
            TreatmentSpace::Continuous { doses } => (0..self.n_candidates())
                .map(|t| {
                    let combo = self.candidate_doses(t).unwrap_or_default();
                    doses
                        .iter()
                        .zip(combo)
                        .map(|(d, v)| format!("{}={}", d.name, v))
                        .collect::<Vec<_>>()
                        .join("&")
                })
                .collect(),
        }
    }
}
