use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::EstimatorId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    Generalization,
    Precision,
}

impl fmt::Display for Study {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Study::Generalization => "generalization",
            Study::Precision => "precision",
        })
    }
}

impl std::str::FromStr for Study {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "generalization" => Ok(Study::Generalization),
            "precision" => Ok(Study::Precision),
            other => Err(Error::InvalidConfig(format!("unknown study `{other}`"))),
        }
    }
}

/// Transform label for estimators that use no auxiliary data.
pub const NO_TRANSFORM: &str = "none";

/// One estimator under one auxiliary release. Generalization rows fill the
/// MSE and coverage columns, precision rows the variance columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub study: Study,
    pub p: usize,
    pub estimator: EstimatorId,
    pub transform: String,
    pub mse: Option<f64>,
    pub bias2: Option<f64>,
    pub variance: Option<f64>,
    pub coverage: Option<f64>,
    pub var_tau: Option<f64>,
    pub re_dm: Option<f64>,
    pub re_reg: Option<f64>,
    pub failures: usize,
}

impl ResultRow {
    pub(crate) fn empty(study: Study, p: usize, estimator: EstimatorId, transform: String) -> Self {
        Self {
            study,
            p,
            estimator,
            transform,
            mse: None,
            bias2: None,
            variance: None,
            coverage: None,
            var_tau: None,
            re_dm: None,
            re_reg: None,
            failures: 0,
        }
    }

    /// Stable row label such as `acw[dp:1]`.
    pub fn label(&self) -> String {
        format!("{}[{}]", self.estimator, self.transform)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResults {
    pub study: Study,
    pub p: usize,
    /// Replicates (generalization) or generations (precision).
    pub units: usize,
    pub rows: Vec<ResultRow>,
    pub diagnostics: BTreeMap<String, f64>,
}

impl StudyResults {
    pub fn row(&self, estimator: EstimatorId, transform: &str) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.estimator == estimator && r.transform == transform)
    }
}
