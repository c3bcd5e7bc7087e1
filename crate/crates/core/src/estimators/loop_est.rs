use nalgebra::{DMatrix, DVector};

use super::basic::fipw_terms;
use super::ols::{ols, with_intercept};
use super::sample::{mean_var, EstimateResult, EstimatorId, RctSample};
use crate::error::{Error, Result};

/// Grid resolution for the ensemble weight.
pub const ALPHA_STEPS: usize = 20;
const LEVERAGE_FLOOR: f64 = 1e-10;

/// Predictions of a linear model fit on `rows`; units in `rows` get their
/// leave-one-out prediction, all other units the full-arm prediction.
fn loo_predictions(x: &DMatrix<f64>, y: &DVector<f64>, rows: &[usize]) -> Result<DVector<f64>> {
    let n = x.nrows();
    let k = x.ncols() + 1;
    if rows.len() < k + 1 {
        return Err(Error::SingularSystem);
    }
    let all: Vec<usize> = (0..n).collect();
    let design = with_intercept(x, &all);
    let arm_design = design.select_rows(rows);
    let arm_y = DVector::from_iterator(rows.len(), rows.iter().map(|&i| y[i]));
    let fit = ols(&arm_design, &arm_y)?;
    let mut pred = &design * &fit.coef;
    for (r, &i) in rows.iter().enumerate() {
        let xi = arm_design.row(r).transpose();
        let h = (xi.transpose() * &fit.xtx_inv * &xi)[(0, 0)];
        if 1.0 - h > LEVERAGE_FLOOR {
            pred[i] = y[i] - fit.residuals[r] / (1.0 - h);
        } else {
            let rest: Vec<usize> = rows.iter().copied().filter(|&j| j != i).collect();
            let rest_y = DVector::from_iterator(rest.len(), rest.iter().map(|&j| y[j]));
            let refit = ols(&design.select_rows(&rest), &rest_y)?;
            pred[i] = design.row(i).dot(&refit.coef.transpose());
        }
    }
    Ok(pred)
}

/// Leave-one-out imputation ensemble plugged into the residualized IPW.
///
/// Model A regresses Y on `aux_pred`; model B on the first
/// `max_rct_covariates` RCT covariates. Both are fit separately within each
/// arm and combined with a single weight alpha chosen by leave-one-out error.
pub fn loop_estimate(
    s: &RctSample,
    aux_pred: &DVector<f64>,
    max_rct_covariates: usize,
) -> Result<EstimateResult> {
    let n = s.n();
    if n < 6 {
        return Err(Error::TooFewRows { needed: 6, got: n });
    }
    if aux_pred.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: aux_pred.len() });
    }
    if aux_pred.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("auxiliary predictions must be finite".into()));
    }
    let treated: Vec<usize> = (0..n).filter(|&i| s.t()[i]).collect();
    let control: Vec<usize> = (0..n).filter(|&i| !s.t()[i]).collect();
    let xa = DMatrix::from_column_slice(n, 1, aux_pred.as_slice());
    let kb = max_rct_covariates.min(s.x().ncols());
    let xb = s.x().columns(0, kb).into_owned();

    let ta = loo_predictions(&xa, s.y(), &treated)?;
    let tb = loo_predictions(&xb, s.y(), &treated)?;
    let ca = loo_predictions(&xa, s.y(), &control)?;
    let cb = loo_predictions(&xb, s.y(), &control)?;

    let loo_error = |alpha: f64| -> f64 {
        let arm = |rows: &[usize], a: &DVector<f64>, b: &DVector<f64>| -> f64 {
            rows.iter()
                .map(|&i| {
                    let e = s.y()[i] - (alpha * a[i] + (1.0 - alpha) * b[i]);
                    e * e
                })
                .sum()
        };
        arm(&treated, &ta, &tb) + arm(&control, &ca, &cb)
    };
    // Scan from 1 down so that ties keep the larger weight.
    let mut alpha = 1.0;
    let mut best = loo_error(alpha);
    for step in (0..ALPHA_STEPS).rev() {
        let a = step as f64 / ALPHA_STEPS as f64;
        let e = loo_error(a);
        if e < best {
            best = e;
            alpha = a;
        }
    }

    let pi = s.pi();
    let f_hat = DVector::from_fn(n, |i, _| {
        let t_hat = alpha * ta[i] + (1.0 - alpha) * tb[i];
        let c_hat = alpha * ca[i] + (1.0 - alpha) * cb[i];
        pi * t_hat + (1.0 - pi) * c_hat
    });
    let terms = fipw_terms(s, &f_hat)?;
    let (tau, var) = mean_var(&terms);
    Ok(EstimateResult::new(EstimatorId::Loop, tau, Some(var / n as f64))
        .with("alpha", alpha)
        .with("loo_mse", best / n as f64)
        .with("rct_covariates", kb as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn brute_loo(x: &DMatrix<f64>, y: &DVector<f64>, rows: &[usize], i: usize) -> f64 {
        let rest: Vec<usize> = rows.iter().copied().filter(|&j| j != i).collect();
        let ry = DVector::from_iterator(rest.len(), rest.iter().map(|&j| y[j]));
        let all: Vec<usize> = (0..x.nrows()).collect();
        let d = with_intercept(x, &all);
        let fit = ols(&d.select_rows(&rest), &ry).unwrap();
        d.row(i).dot(&fit.coef.transpose())
    }

    #[test]
    fn hat_matrix_shortcut_matches_refits() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 15;
        let x = DMatrix::from_fn(n, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let rows: Vec<usize> = (0..n).step_by(2).collect();
        let pred = loo_predictions(&x, &y, &rows).unwrap();
        for &i in &rows {
            assert!((pred[i] - brute_loo(&x, &y, &rows, i)).abs() < 1e-10);
        }
    }

    fn noisy_sample(n: usize, seed: u64) -> (RctSample, DVector<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let t: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();
        let m = DVector::from_fn(n, |i, _| 1.0 + x[(i, 0)] - 0.5 * x[(i, 1)]);
        let y = DVector::from_fn(n, |i, _| {
            m[i] + if t[i] { 0.5 } else { 0.0 } + 0.3 * rng.sample::<f64, _>(StandardNormal)
        });
        (RctSample::new(y, t, x, 0.5).unwrap(), m)
    }

    #[test]
    fn shift_invariance() {
        let (s, m) = noisy_sample(40, 5);
        let a = loop_estimate(&s, &m, 3).unwrap();
        let b = loop_estimate(&s, &m.add_scalar(7.25), 3).unwrap();
        assert!((a.tau_hat - b.tau_hat).abs() < 1e-10);
        assert_eq!(a.diagnostics["alpha"], b.diagnostics["alpha"]);
    }

    #[test]
    fn noise_prediction_favours_rct_model() {
        let (s, _) = noisy_sample(80, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(60);
        let noise = DVector::from_fn(80, |_, _| rng.sample::<f64, _>(StandardNormal));
        let r = loop_estimate(&s, &noise, 3).unwrap();
        assert!(r.diagnostics["alpha"] <= 0.2, "alpha {}", r.diagnostics["alpha"]);
    }

    #[test]
    fn oracle_prediction_favours_aux_model() {
        let (s, m) = noisy_sample(80, 7);
        let r = loop_estimate(&s, &m, 0).unwrap();
        assert!(r.diagnostics["alpha"] >= 0.8);
        let v = r.variance_hat.unwrap();
        let dm = super::super::diff_in_means(&s).unwrap().variance_hat.unwrap();
        assert!(v < dm / 4.0);
    }

    #[test]
    fn rejects_tiny_samples() {
        let (s, m) = noisy_sample(5, 1);
        assert!(matches!(loop_estimate(&s, &m, 1), Err(Error::TooFewRows { .. })));
    }
}
