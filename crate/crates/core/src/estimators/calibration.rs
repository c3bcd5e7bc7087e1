use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ols::{ols, with_intercept};
use super::sample::{EstimateResult, EstimatorId, RctSample};
use crate::error::{Error, Result};
use crate::model::GramMatrix;

pub const NEWTON_TOLERANCE: f64 = 1e-10;
pub const NEWTON_MAX_ITERATIONS: usize = 100;
pub const MAX_STEP_HALVINGS: usize = 30;
pub const CONSTRAINT_TOLERANCE: f64 = 1e-8;
const HESSIAN_RIDGE: f64 = 1e-12;

/// Entropy-balancing weights matching RCT covariate moments to a target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationWeights {
    pub w: DVector<f64>,
    pub eta: DVector<f64>,
    pub constraint_residual: f64,
    pub iterations: usize,
}

impl CalibrationWeights {
    /// Equal weights, for callers that skip calibration.
    pub fn uniform(n: usize) -> Self {
        Self {
            w: DVector::from_element(n, 1.0 / n as f64),
            eta: DVector::zeros(0),
            constraint_residual: 0.0,
            iterations: 0,
        }
    }

    /// Kish effective sample size.
    pub fn ess(&self) -> f64 {
        1.0 / self.w.norm_squared()
    }

    pub fn entropy(&self) -> f64 {
        self.w.iter().filter(|&&w| w > 0.0).map(|w| w * w.ln()).sum()
    }
}

/// Log-sum-exp of `h eta` and the normalized weights.
fn dual(h: &DMatrix<f64>, eta: &DVector<f64>) -> (f64, DVector<f64>) {
    let a = h * eta;
    let max = a.max();
    let mut w = a.map(|v| (v - max).exp());
    let total = w.sum();
    w /= total;
    (max + total.ln(), w)
}

/// Solves `min sum w log w` subject to `sum w = 1` and `sum w_i g_i = target`.
///
/// Works on the dual `log sum exp(eta' (g_i - target))`, which is convex; the
/// weights are its softmax.
pub fn calibration_weights(g_rct: &DMatrix<f64>, target: &DVector<f64>) -> Result<CalibrationWeights> {
    let (n, r) = g_rct.shape();
    if r == 0 || n == 0 {
        return Err(Error::InvalidConfig("calibration needs at least one unit and one moment".into()));
    }
    if target.len() != r {
        return Err(Error::DimensionMismatch { expected: r, got: target.len() });
    }
    if target.iter().chain(g_rct.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("calibration inputs must be finite".into()));
    }
    let mut h = g_rct.clone();
    for mut row in h.row_iter_mut() {
        row -= target.transpose();
    }
    // Outside the per-coordinate range the target cannot be in the hull.
    for j in 0..r {
        let col = h.column(j);
        if col.min() > 0.0 || col.max() < 0.0 {
            let gap = col.min().max(-col.max());
            return Err(Error::Infeasible { iterations: 0, residual: gap });
        }
    }

    let mut eta = DVector::zeros(r);
    let (mut obj, mut w) = dual(&h, &eta);
    let mut grad = h.tr_mul(&w);
    let mut iterations = 0;
    while grad.norm() > NEWTON_TOLERANCE {
        if iterations == NEWTON_MAX_ITERATIONS {
            return Err(Error::Infeasible { iterations, residual: grad.amax() });
        }
        iterations += 1;
        let mut hw = h.clone();
        for (mut row, &wi) in hw.row_iter_mut().zip(w.iter()) {
            row *= wi;
        }
        let mut hess = h.tr_mul(&hw) - &grad * grad.transpose();
        for j in 0..r {
            hess[(j, j)] += HESSIAN_RIDGE;
        }
        let step = match hess.clone().cholesky() {
            Some(c) => c.solve(&(-&grad)),
            None => match hess.lu().solve(&(-&grad)) {
                Some(s) => s,
                None => return Err(Error::Infeasible { iterations, residual: grad.amax() }),
            },
        };
        let mut t = 1.0;
        let mut accepted = false;
        let slack = 4.0 * f64::EPSILON * (1.0 + obj.abs());
        for _ in 0..=MAX_STEP_HALVINGS {
            let cand = &eta + &step * t;
            let (cobj, cw) = dual(&h, &cand);
            let cgrad = h.tr_mul(&cw);
            // Near the optimum the objective stops resolving; a step that
            // does not raise it and shrinks the gradient is still progress.
            if cobj.is_finite() && (cobj < obj || (cobj <= obj + slack && cgrad.norm() < grad.norm())) {
                eta = cand;
                obj = cobj;
                w = cw;
                grad = cgrad;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // No descent is possible; accept only if already at the floor.
            if grad.amax() <= CONSTRAINT_TOLERANCE {
                break;
            }
            return Err(Error::Infeasible { iterations, residual: grad.amax() });
        }
    }
    let constraint_residual = grad.amax();
    if constraint_residual > CONSTRAINT_TOLERANCE {
        return Err(Error::Infeasible { iterations, residual: constraint_residual });
    }
    Ok(CalibrationWeights { w, eta, constraint_residual, iterations })
}

/// Calibration features: the covariates, optionally followed by their squares.
pub fn moment_features(x: &DMatrix<f64>, second_moments: bool) -> DMatrix<f64> {
    if !second_moments {
        return x.clone();
    }
    let (n, p) = x.shape();
    DMatrix::from_fn(n, 2 * p, |i, j| if j < p { x[(i, j)] } else { x[(i, j - p)].powi(2) })
}

/// Target moments for `moment_features` read off an auxiliary gram.
///
/// `columns` are gram indices of the covariates in RCT column order.
pub fn gram_target(g: &GramMatrix, columns: &[usize], second_moments: bool) -> Result<DVector<f64>> {
    let k = g.entries().nrows();
    if let Some(&bad) = columns.iter().find(|&&c| c == 0 || c >= k) {
        return Err(Error::InvalidConfig(format!("gram column {bad} is not a data column")));
    }
    let first = columns.iter().map(|&c| g.entries()[(0, c)]);
    let v: Vec<f64> = if second_moments {
        first.chain(columns.iter().map(|&c| g.entries()[(c, c)])).collect()
    } else {
        first.collect()
    };
    Ok(DVector::from_vec(v))
}

/// Calibration-weighted IPW sum.
pub fn cw_estimate(s: &RctSample, weights: &CalibrationWeights) -> Result<EstimateResult> {
    check_weights(s, weights)?;
    let terms = s.ipw_terms(s.y().iter().copied());
    let tau = weights.w.iter().zip(&terms).map(|(w, t)| w * t).sum();
    Ok(EstimateResult::new(EstimatorId::Cw, tau, None).with("ess", weights.ess()))
}

fn check_weights(s: &RctSample, weights: &CalibrationWeights) -> Result<()> {
    if weights.w.len() != s.n() {
        return Err(Error::DimensionMismatch { expected: s.n(), got: weights.w.len() });
    }
    if weights.w.iter().any(|&w| w.is_nan() || w < 0.0) || (weights.w.sum() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidData("weights must be nonnegative and sum to 1".into()));
    }
    Ok(())
}

/// Arm-wise linear outcome models evaluated at the auxiliary means, plus the
/// calibration-weighted IPW of the residuals.
pub fn acw_estimate(
    s: &RctSample,
    weights: &CalibrationWeights,
    aux_mu: &DVector<f64>,
) -> Result<EstimateResult> {
    check_weights(s, weights)?;
    let p = s.x().ncols();
    if aux_mu.len() != p {
        return Err(Error::DimensionMismatch { expected: p, got: aux_mu.len() });
    }
    if aux_mu.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("auxiliary means must be finite".into()));
    }
    let treated: Vec<usize> = (0..s.n()).filter(|&i| s.t()[i]).collect();
    let control: Vec<usize> = (0..s.n()).filter(|&i| !s.t()[i]).collect();
    let arm_fit = |rows: &[usize]| {
        let y = DVector::from_iterator(rows.len(), rows.iter().map(|&i| s.y()[i]));
        ols(&with_intercept(s.x(), rows), &y)
    };
    let ft = arm_fit(&treated)?;
    let fc = arm_fit(&control)?;

    let at_mu = |coef: &DVector<f64>| coef[0] + coef.rows(1, p).dot(aux_mu);
    let augmentation = at_mu(&ft.coef) - at_mu(&fc.coef);

    let mut residuals = DVector::zeros(s.n());
    for (r, &i) in treated.iter().enumerate() {
        residuals[i] = ft.residuals[r];
    }
    for (r, &i) in control.iter().enumerate() {
        residuals[i] = fc.residuals[r];
    }
    let terms = s.ipw_terms(residuals.iter().copied());
    let residual_term: f64 = weights.w.iter().zip(&terms).map(|(w, t)| w * t).sum();

    Ok(EstimateResult::new(EstimatorId::Acw, augmentation + residual_term, None)
        .with("augmentation", augmentation)
        .with("residual_term", residual_term)
        .with("ess", weights.ess()))
}
