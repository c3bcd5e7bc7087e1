use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One way of releasing the auxiliary data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum TransformSpec {
    Gram,
    EntryNoise { lambda: f64 },
    Dp { epsilon: f64 },
    Synthetic,
}

impl TransformSpec {
    /// Parses a comma-separated list such as `gram,en:1,dp:1,dp:3,synth`.
    pub fn parse_list(s: &str) -> Result<Vec<TransformSpec>> {
        let v: Vec<TransformSpec> = s
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(str::parse)
            .collect::<Result<_>>()?;
        if v.is_empty() {
            return Err(Error::InvalidConfig("no transforms given".into()));
        }
        Ok(v)
    }
}

impl fmt::Display for TransformSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransformSpec::Gram => f.write_str("gram"),
            TransformSpec::EntryNoise { lambda } => write!(f, "en:{lambda}"),
            TransformSpec::Dp { epsilon } => write!(f, "dp:{epsilon}"),
            TransformSpec::Synthetic => f.write_str("synth"),
        }
    }
}

impl FromStr for TransformSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let number = |a: Option<&str>, what: &str| -> Result<f64> {
            let a = a.ok_or_else(|| Error::InvalidConfig(format!("`{s}` needs {what}")))?;
            a.parse::<f64>()
                .map_err(|_| Error::InvalidConfig(format!("`{a}` is not a number in `{s}`")))
        };
        match name {
            "gram" if arg.is_none() => Ok(TransformSpec::Gram),
            "synth" if arg.is_none() => Ok(TransformSpec::Synthetic),
            "en" => {
                let lambda = if arg.is_none() { 1.0 } else { number(arg, "a noise variance")? };
                if !(lambda.is_finite() && lambda >= 0.0) {
                    return Err(Error::InvalidConfig(format!("noise variance must be >= 0 in `{s}`")));
                }
                Ok(TransformSpec::EntryNoise { lambda })
            }
            "dp" => {
                let epsilon = number(arg, "an epsilon")?;
                if !(epsilon.is_finite() && epsilon > 0.0) {
                    return Err(Error::InvalidConfig(format!("epsilon must be > 0 in `{s}`")));
                }
                Ok(TransformSpec::Dp { epsilon })
            }
            _ => Err(Error::InvalidConfig(format!("unknown transform `{s}`"))),
        }
    }
}

pub const DEFAULT_DELTA: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizationConfig {
    pub p: usize,
    pub candidate_pool: usize,
    pub m_aux: usize,
    pub reps: usize,
    pub bootstrap_b: usize,
    pub transforms: Vec<TransformSpec>,
    pub delta: f64,
    pub level: f64,
    /// Coefficient of the effect modifier in the selection model.
    pub selection_xs_coef: f64,
    /// Calibrate second moments as well as means.
    pub second_moments: bool,
    pub base_seed: u64,
}

impl GeneralizationConfig {
    pub fn new(p: usize, reps: usize, base_seed: u64) -> Self {
        Self {
            p,
            candidate_pool: 1300,
            m_aux: 1000,
            reps,
            bootstrap_b: 100,
            transforms: vec![TransformSpec::Gram],
            delta: DEFAULT_DELTA,
            level: 0.95,
            selection_xs_coef: 0.5,
            second_moments: false,
            base_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("p", self.p)?;
        positive("candidate_pool", self.candidate_pool)?;
        positive("reps", self.reps)?;
        if self.m_aux < self.p + 4 {
            return Err(Error::InvalidConfig(format!("m_aux must be at least p + 4 = {}", self.p + 4)));
        }
        if self.bootstrap_b < 2 {
            return Err(Error::InvalidConfig("bootstrap_b must be at least 2".into()));
        }
        check_common(&self.transforms, self.delta)?;
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidConfig("level must lie in (0, 1)".into()));
        }
        if !self.selection_xs_coef.is_finite() {
            return Err(Error::InvalidConfig("selection_xs_coef must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionConfig {
    pub p: usize,
    pub n: usize,
    pub m_aux: usize,
    pub generations: usize,
    pub assignments: usize,
    pub max_rct_covariates: usize,
    pub transforms: Vec<TransformSpec>,
    pub delta: f64,
    /// Share of outcome variance explained by the covariates.
    pub explained_share: f64,
    pub base_seed: u64,
}

impl PrecisionConfig {
    pub fn new(p: usize, generations: usize, assignments: usize, base_seed: u64) -> Self {
        Self {
            p,
            n: 100,
            m_aux: 1000,
            generations,
            assignments,
            max_rct_covariates: 20,
            transforms: vec![TransformSpec::Gram],
            delta: DEFAULT_DELTA,
            explained_share: 0.7,
            base_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("p", self.p)?;
        positive("generations", self.generations)?;
        if self.assignments < 2 {
            return Err(Error::InvalidConfig("assignments must be at least 2".into()));
        }
        if self.n < 6 {
            return Err(Error::InvalidConfig("n must be at least 6".into()));
        }
        if self.max_rct_covariates + 3 > self.n {
            return Err(Error::InvalidConfig(format!(
                "max_rct_covariates must be at most n - 3 = {}",
                self.n - 3
            )));
        }
        if self.m_aux < self.p + 4 {
            return Err(Error::InvalidConfig(format!("m_aux must be at least p + 4 = {}", self.p + 4)));
        }
        if !(0.0..1.0).contains(&self.explained_share) {
            return Err(Error::InvalidConfig("explained_share must lie in [0, 1)".into()));
        }
        check_common(&self.transforms, self.delta)
    }
}

fn positive(name: &str, v: usize) -> Result<()> {
    if v == 0 {
        return Err(Error::InvalidConfig(format!("{name} must be positive")));
    }
    Ok(())
}

fn check_common(transforms: &[TransformSpec], delta: f64) -> Result<()> {
    if transforms.is_empty() {
        return Err(Error::InvalidConfig("no transforms given".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidConfig("delta must lie in (0, 1)".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transform_list_round_trips() {
        let v = TransformSpec::parse_list("gram, en:1,dp:1,dp:0.5,synth,en").unwrap();
        let ids: Vec<String> = v.iter().map(|t| t.to_string()).collect();
        assert_eq!(ids, ["gram", "en:1", "dp:1", "dp:0.5", "synth", "en:1"]);
        for bad in ["", "dp", "dp:0", "dp:x", "en:-1", "gram:2", "foo"] {
            assert!(TransformSpec::parse_list(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn configs_reject_zero_counts() {
        assert!(GeneralizationConfig::new(10, 0, 1).validate().is_err());
        assert!(GeneralizationConfig::new(10, 5, 1).validate().is_ok());
        assert!(PrecisionConfig::new(10, 0, 10, 1).validate().is_err());
        let mut c = PrecisionConfig::new(10, 2, 10, 1);
        c.max_rct_covariates = 98;
        assert!(c.validate().is_err());
    }
}
