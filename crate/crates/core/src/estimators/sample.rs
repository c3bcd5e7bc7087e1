use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Randomized-experiment data with a known treatment probability.
#[derive(Debug, Clone, PartialEq)]
pub struct RctSample {
    y: DVector<f64>,
    t: Vec<bool>,
    x: DMatrix<f64>,
    pi: f64,
}

impl RctSample {
    pub fn new(y: DVector<f64>, t: Vec<bool>, x: DMatrix<f64>, pi: f64) -> Result<Self> {
        let n = y.len();
        if t.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: t.len() });
        }
        if x.nrows() != n {
            return Err(Error::DimensionMismatch { expected: n, got: x.nrows() });
        }
        if !(pi > 0.0 && pi < 1.0) {
            return Err(Error::InvalidConfig(format!("treatment probability must lie in (0, 1), got {pi}")));
        }
        if y.iter().chain(x.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("RCT data has non-finite entries".into()));
        }
        if !t.iter().any(|&ti| ti) {
            return Err(Error::EmptyArm("treated"));
        }
        if t.iter().all(|&ti| ti) {
            return Err(Error::EmptyArm("control"));
        }
        Ok(Self { y, t, x, pi })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn t(&self) -> &[bool] {
        &self.t
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn pi(&self) -> f64 {
        self.pi
    }

    pub fn n_treated(&self) -> usize {
        self.t.iter().filter(|&&t| t).count()
    }

    pub fn n_control(&self) -> usize {
        self.n() - self.n_treated()
    }

    /// The same units with a different covariate matrix.
    pub fn with_covariates(&self, x: DMatrix<f64>) -> Result<Self> {
        Self::new(self.y.clone(), self.t.clone(), x, self.pi)
    }

    /// Rows `idx` (with repetition) as a new sample.
    pub fn resample(&self, idx: &[usize]) -> Result<Self> {
        let y = DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.y[i]));
        let t = idx.iter().map(|&i| self.t[i]).collect();
        let x = self.x.select_rows(idx);
        Self::new(y, t, x, self.pi)
    }

    /// Unit-level inverse-probability terms `T Y / pi - (1 - T) Y / (1 - pi)`
    /// for outcomes `y`.
    pub(crate) fn ipw_terms(&self, y: impl Iterator<Item = f64>) -> Vec<f64> {
        self.t
            .iter()
            .zip(y)
            .map(|(&t, yi)| if t { yi / self.pi } else { -yi / (1.0 - self.pi) })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorId {
    DiffInMeans,
    RegressionAdjusted,
    Ipw,
    Cw,
    Acw,
    Fipw,
    Loop,
}

impl EstimatorId {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorId::DiffInMeans => "dm",
            EstimatorId::RegressionAdjusted => "ols",
            EstimatorId::Ipw => "ipw",
            EstimatorId::Cw => "cw",
            EstimatorId::Acw => "acw",
            EstimatorId::Fipw => "fipw",
            EstimatorId::Loop => "loop",
        }
    }
}

impl fmt::Display for EstimatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "dm" => EstimatorId::DiffInMeans,
            "ols" => EstimatorId::RegressionAdjusted,
            "ipw" => EstimatorId::Ipw,
            "cw" => EstimatorId::Cw,
            "acw" => EstimatorId::Acw,
            "fipw" => EstimatorId::Fipw,
            "loop" => EstimatorId::Loop,
            other => return Err(Error::InvalidConfig(format!("unknown estimator `{other}`"))),
        })
    }
}

/// A treatment-effect estimate with optional uncertainty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub tau_hat: f64,
    pub variance_hat: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub estimator_id: EstimatorId,
    pub diagnostics: BTreeMap<String, f64>,
}

impl EstimateResult {
    pub(crate) fn new(estimator_id: EstimatorId, tau_hat: f64, variance_hat: Option<f64>) -> Self {
        let mut r = Self {
            tau_hat,
            variance_hat,
            ci_low: None,
            ci_high: None,
            estimator_id,
            diagnostics: BTreeMap::new(),
        };
        if let Some(v) = variance_hat {
            let half = z_two_sided(DEFAULT_LEVEL) * v.sqrt();
            r.ci_low = Some(tau_hat - half);
            r.ci_high = Some(tau_hat + half);
        }
        r
    }

    pub(crate) fn with(mut self, key: &str, value: f64) -> Self {
        self.diagnostics.insert(key.to_string(), value);
        self
    }

    pub fn covers(&self, truth: f64) -> Option<bool> {
        Some(self.ci_low? <= truth && truth <= self.ci_high?)
    }
}

pub const DEFAULT_LEVEL: f64 = 0.95;

/// Two-sided standard-normal quantile for confidence `level`.
pub fn z_two_sided(level: f64) -> f64 {
    let n = Normal::standard();
    n.inverse_cdf(0.5 + level / 2.0)
}

/// Sample mean and sample variance (n - 1 denominator, 0 for a single value).
pub(crate) fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = v.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, ss / (n - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn z_quantile() {
        assert!((z_two_sided(0.95) - 1.959_963_985).abs() < 1e-8);
    }

    #[test]
    fn sample_invariants() {
        let y = DVector::from_vec(vec![1.0, 2.0]);
        let x = DMatrix::zeros(2, 1);
        assert!(matches!(
            RctSample::new(y.clone(), vec![true, true], x.clone(), 0.5),
            Err(Error::EmptyArm("control"))
        ));
        assert!(matches!(
            RctSample::new(y.clone(), vec![false, false], x.clone(), 0.5),
            Err(Error::EmptyArm("treated"))
        ));
        assert!(RctSample::new(y.clone(), vec![true, false], x.clone(), 1.0).is_err());
        assert!(RctSample::new(y, vec![true], x, 0.5).is_err());
    }

    #[test]
    fn estimator_ids_round_trip() {
        for id in ["dm", "ols", "ipw", "cw", "acw", "fipw", "loop"] {
            assert_eq!(id.parse::<EstimatorId>().unwrap().as_str(), id);
        }
        assert!("nope".parse::<EstimatorId>().is_err());
    }
}
