use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng;
use rand_distr::{Bernoulli, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::config::{GeneralizationConfig, PrecisionConfig};
use crate::error::{Error, Result};
use crate::estimators::RctSample;
use crate::model::DataMatrix;

/// Residual variance of the outcome model in the generalization study.
pub const RESIDUAL_VARIANCE: f64 = 0.3;
/// Share of outcome variance explained by covariates in the generalization study.
pub const EXPLAINED_SHARE: f64 = 0.7;
pub const SELECTION_INTERCEPT: f64 = -2.0;
pub const TREATMENT_PROBABILITY: f64 = 0.5;
/// Average effect in the target population.
pub const PATE: f64 = 0.5;
const MAX_REDRAWS: usize = 1000;

/// Sparse coefficient vectors, drawn once per study and dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    /// Selection-model coefficients on X (zero in the precision study).
    pub beta_s: Vec<f64>,
    /// Outcome-model coefficients on X.
    pub beta: Vec<f64>,
}

fn sparse<R: Rng + ?Sized>(p: usize, share: f64, value: impl Fn(usize) -> f64, rng: &mut R) -> Vec<f64> {
    let k = ((share * p as f64).round() as usize).clamp(1, p);
    let mut v = vec![0.0; p];
    let val = value(k);
    for i in index::sample(rng, p, k) {
        v[i] = val;
    }
    v
}

/// Half of `beta_s` is `-1/k`, 60% of `beta` is `sqrt(explained / k)`, where
/// `k` is the number of nonzero entries of each.
pub fn draw_coefficients<R: Rng + ?Sized>(p: usize, explained: f64, with_selection: bool, rng: &mut R) -> Coefficients {
    let beta_s = if with_selection {
        sparse(p, 0.5, |k| -1.0 / k as f64, rng)
    } else {
        vec![0.0; p]
    };
    let beta = sparse(p, 0.6, |k| (explained / k as f64).sqrt(), rng);
    Coefficients { beta_s, beta }
}

fn expit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn normal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, mean: f64, rng: &mut R) -> DMatrix<f64> {
    // Row-major fill so that a unit's covariates are drawn together.
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = mean + rng.sample::<f64, _>(StandardNormal);
        }
    }
    m
}

fn control_outcomes<R: Rng + ?Sized>(x: &DMatrix<f64>, beta: &[f64], residual_variance: f64, rng: &mut R) -> DVector<f64> {
    let b = DVector::from_column_slice(beta);
    let sd = residual_variance.sqrt();
    let mut y = x * b;
    for v in y.iter_mut() {
        *v += 0.5 + sd * rng.sample::<f64, _>(StandardNormal);
    }
    y
}

fn covariate_names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("x{j}")).collect()
}

/// One replicate of the generalization study.
#[derive(Debug, Clone)]
pub struct GeneralizationRep {
    /// RCT covariates are `[X, X^S]`.
    pub rct: RctSample,
    /// Columns `y, x1..xp, xs` drawn from the population, with `y` the control outcome.
    pub aux: DataMatrix,
    pub sate: f64,
    pub redraws: usize,
}

pub fn gen_generalization_rep<R: Rng + ?Sized>(
    cfg: &GeneralizationConfig,
    coefs: &Coefficients,
    rng: &mut R,
) -> Result<GeneralizationRep> {
    let p = cfg.p;
    let coin = Bernoulli::new(TREATMENT_PROBABILITY).expect("valid probability");
    let beta_s = DVector::from_column_slice(&coefs.beta_s);
    for redraws in 0..MAX_REDRAWS {
        let x = normal_matrix(cfg.candidate_pool, p, 1.0, rng);
        let xs = normal_matrix(cfg.candidate_pool, 1, 1.0, rng);
        let sel_logit = &x * &beta_s;
        let selected: Vec<usize> = (0..cfg.candidate_pool)
            .filter(|&i| {
                let pr = expit(SELECTION_INTERCEPT + sel_logit[i] + cfg.selection_xs_coef * xs[(i, 0)]);
                rng.random::<f64>() < pr
            })
            .collect();
        let n = selected.len();
        let mut x_rct = DMatrix::zeros(n, p + 1);
        for (r, &i) in selected.iter().enumerate() {
            for j in 0..p {
                x_rct[(r, j)] = x[(i, j)];
            }
            x_rct[(r, p)] = xs[(i, 0)];
        }
        let y_c = control_outcomes(&x_rct.columns(0, p).into_owned(), &coefs.beta, RESIDUAL_VARIANCE, rng);
        let effect = DVector::from_fn(n, |r, _| 0.5 * x_rct[(r, p)]);
        let t: Vec<bool> = (0..n).map(|_| coin.sample(rng)).collect();
        let y = DVector::from_fn(n, |r, _| if t[r] { y_c[r] + effect[r] } else { y_c[r] });
        let rct = match RctSample::new(y, t, x_rct, TREATMENT_PROBABILITY) {
            Ok(s) => s,
            Err(Error::EmptyArm(_)) => continue,
            Err(e) => return Err(e),
        };
        let sate = effect.mean();

        let x_aux = normal_matrix(cfg.m_aux, p, 1.0, rng);
        let xs_aux = normal_matrix(cfg.m_aux, 1, 1.0, rng);
        let y_aux = control_outcomes(&x_aux, &coefs.beta, RESIDUAL_VARIANCE, rng);
        let mut names = covariate_names(p);
        names.push("xs".into());
        let covs = DMatrix::from_fn(cfg.m_aux, p + 1, |i, j| if j < p { x_aux[(i, j)] } else { xs_aux[(i, 0)] });
        let aux = DataMatrix::from_parts(&y_aux, &covs, "y", &names)?;
        return Ok(GeneralizationRep { rct, aux, sate, redraws });
    }
    Err(Error::DegenerateSample(format!("no RCT with both arms after {MAX_REDRAWS} draws")))
}

/// Fixed RCT units for one generation of the precision study.
#[derive(Debug, Clone)]
pub struct PrecisionGeneration {
    pub x: DMatrix<f64>,
    pub y_c: DVector<f64>,
    pub y_t: DVector<f64>,
    /// Columns `y, x1..xp` with `y` the control outcome.
    pub aux: DataMatrix,
}

impl PrecisionGeneration {
    pub fn sate(&self) -> f64 {
        (&self.y_t - &self.y_c).mean()
    }
}

pub fn gen_precision_generation<R: Rng + ?Sized>(
    cfg: &PrecisionConfig,
    coefs: &Coefficients,
    rng: &mut R,
) -> Result<PrecisionGeneration> {
    let residual = 1.0 - cfg.explained_share;
    let x = normal_matrix(cfg.n, cfg.p, 0.0, rng);
    let y_c = control_outcomes(&x, &coefs.beta, residual, rng);
    let y_t = y_c.add_scalar(PATE);
    let x_aux = normal_matrix(cfg.m_aux, cfg.p, 0.0, rng);
    let y_aux = control_outcomes(&x_aux, &coefs.beta, residual, rng);
    let aux = DataMatrix::from_parts(&y_aux, &x_aux, "y", &covariate_names(cfg.p))?;
    Ok(PrecisionGeneration { x, y_c, y_t, aux })
}

/// RCT covariates used by the covariate-adjusted estimators: all of them when
/// there are at most `max`, otherwise the first `max` with a nonzero outcome
/// coefficient (topped up in index order if there are fewer).
pub fn rct_covariate_columns(beta: &[f64], max: usize) -> Vec<usize> {
    let p = beta.len();
    if p <= max {
        return (0..p).collect();
    }
    let mut cols: Vec<usize> = (0..p).filter(|&j| beta[j] != 0.0).take(max).collect();
    let mut j = 0;
    while cols.len() < max {
        if beta[j] == 0.0 {
            cols.push(j);
        }
        j += 1;
    }
    cols.sort_unstable();
    cols
}
