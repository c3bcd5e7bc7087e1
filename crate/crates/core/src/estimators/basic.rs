use nalgebra::{DMatrix, DVector};

use super::ols::ols;
use super::sample::{mean_var, EstimateResult, EstimatorId, RctSample};
use crate::error::{Error, Result};

/// Difference in arm means with the two-sample variance.
pub fn diff_in_means(s: &RctSample) -> Result<EstimateResult> {
    let (yt, yc): (Vec<f64>, Vec<f64>) = split_arms(s, s.y().iter().copied());
    if yt.is_empty() {
        return Err(Error::EmptyArm("treated"));
    }
    if yc.is_empty() {
        return Err(Error::EmptyArm("control"));
    }
    let (mt, vt) = mean_var(&yt);
    let (mc, vc) = mean_var(&yc);
    let variance = (yt.len() > 1 && yc.len() > 1)
        .then(|| vt / yt.len() as f64 + vc / yc.len() as f64);
    Ok(EstimateResult::new(EstimatorId::DiffInMeans, mt - mc, variance)
        .with("n_treated", yt.len() as f64)
        .with("n_control", yc.len() as f64))
}

fn split_arms(s: &RctSample, v: impl Iterator<Item = f64>) -> (Vec<f64>, Vec<f64>) {
    let mut t = Vec::new();
    let mut c = Vec::new();
    for (&ti, vi) in s.t().iter().zip(v) {
        if ti {
            t.push(vi);
        } else {
            c.push(vi);
        }
    }
    (t, c)
}

/// OLS of Y on `[1, T, covariates]`; the estimate is the coefficient on T.
pub fn regression_adjusted(s: &RctSample, covariates: &DMatrix<f64>) -> Result<EstimateResult> {
    let n = s.n();
    let q = covariates.ncols();
    if covariates.nrows() != n {
        return Err(Error::DimensionMismatch { expected: n, got: covariates.nrows() });
    }
    if q + 3 > n {
        return Err(Error::InvalidConfig(format!(
            "{q} covariates leave no residual degrees of freedom with n = {n}"
        )));
    }
    let k = q + 2;
    let mut design = DMatrix::from_element(n, k, 1.0);
    for i in 0..n {
        design[(i, 1)] = if s.t()[i] { 1.0 } else { 0.0 };
        for j in 0..q {
            design[(i, j + 2)] = covariates[(i, j)];
        }
    }
    let fit = ols(&design, s.y())?;
    let sigma2 = fit.rss / (n - k) as f64;
    let variance = (sigma2 * fit.xtx_inv[(1, 1)]).max(0.0);
    Ok(EstimateResult::new(EstimatorId::RegressionAdjusted, fit.coef[1], Some(variance))
        .with("residual_variance", sigma2)
        .with("covariates", q as f64))
}

/// `(1/n) sum [T Y / pi - (1 - T) Y / (1 - pi)]` with a plug-in variance.
pub fn ipw_estimate(s: &RctSample) -> Result<EstimateResult> {
    let terms = s.ipw_terms(s.y().iter().copied());
    let (tau, var) = mean_var(&terms);
    Ok(EstimateResult::new(EstimatorId::Ipw, tau, Some(var / s.n() as f64)))
}

/// IPW applied to the residuals `Y - f_hat`.
pub fn fipw_estimate(s: &RctSample, f_hat: &DVector<f64>) -> Result<EstimateResult> {
    let terms = fipw_terms(s, f_hat)?;
    let (tau, var) = mean_var(&terms);
    Ok(EstimateResult::new(EstimatorId::Fipw, tau, Some(var / s.n() as f64)))
}

pub(crate) fn fipw_terms(s: &RctSample, f_hat: &DVector<f64>) -> Result<Vec<f64>> {
    if f_hat.len() != s.n() {
        return Err(Error::DimensionMismatch { expected: s.n(), got: f_hat.len() });
    }
    if f_hat.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("imputations must be finite".into()));
    }
    Ok(s.ipw_terms(s.y().iter().zip(f_hat.iter()).map(|(y, f)| y - f)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(y: &[f64], t: &[bool]) -> RctSample {
        let n = y.len();
        let x = DMatrix::from_fn(n, 1, |i, _| i as f64);
        RctSample::new(DVector::from_column_slice(y), t.to_vec(), x, 0.5).unwrap()
    }

    #[test]
    fn dm_hand_example() {
        let s = sample(&[2.0, 4.0, 1.0, 3.0], &[true, true, false, false]);
        let r = diff_in_means(&s).unwrap();
        assert_eq!(r.tau_hat, 1.0);
        assert_eq!(r.variance_hat, Some(2.0 / 2.0 + 2.0 / 2.0));
        assert!(r.ci_low.unwrap() <= 1.0 && 1.0 <= r.ci_high.unwrap());
    }

    #[test]
    fn dm_constant_outcome() {
        let s = sample(&[5.0; 6], &[true, false, true, false, true, false]);
        let r = diff_in_means(&s).unwrap();
        assert_eq!(r.tau_hat, 0.0);
        assert_eq!(r.variance_hat, Some(0.0));
    }

    #[test]
    fn dm_single_unit_arm_has_no_variance() {
        let s = sample(&[2.0, 1.0], &[true, false]);
        let r = diff_in_means(&s).unwrap();
        assert_eq!(r.tau_hat, 1.0);
        assert_eq!(r.variance_hat, None);
        assert_eq!(r.ci_low, None);
    }

    #[test]
    fn ipw_hand_example() {
        let s = sample(&[3.0, 1.0], &[true, false]);
        assert_eq!(ipw_estimate(&s).unwrap().tau_hat, 2.0);
        let z = sample(&[0.0; 4], &[true, false, true, false]);
        assert_eq!(ipw_estimate(&z).unwrap().tau_hat, 0.0);
    }

    #[test]
    fn ipw_equals_dm_when_balanced() {
        let s = sample(&[1.3, -0.2, 4.0, 2.2, 0.7, 1.1], &[true, false, false, true, true, false]);
        let a = ipw_estimate(&s).unwrap().tau_hat;
        let b = diff_in_means(&s).unwrap().tau_hat;
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn regression_without_covariates_is_dm() {
        let s = sample(&[1.3, -0.2, 4.0, 2.2, 0.7, 1.1], &[true, false, false, true, true, false]);
        let r = regression_adjusted(&s, &DMatrix::zeros(6, 0)).unwrap();
        let d = diff_in_means(&s).unwrap();
        assert!((r.tau_hat - d.tau_hat).abs() < 1e-10);
    }

    #[test]
    fn orthogonal_covariate_leaves_estimate_unchanged() {
        // Centred within each arm and orthogonal to Y within each arm.
        let y = [1.0, 3.0, 2.0, 5.0, 1.0, 5.0, 0.0, 2.0];
        let t = [true, true, true, true, false, false, false, false];
        let z = [1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0];
        let s = sample(&y, &t);
        let base = regression_adjusted(&s, &DMatrix::zeros(8, 0)).unwrap().tau_hat;
        let with = regression_adjusted(&s, &DMatrix::from_column_slice(8, 1, &z)).unwrap().tau_hat;
        assert!((base - with).abs() < 1e-10);
    }

    #[test]
    fn regression_rejects_too_many_covariates() {
        let s = sample(&[1.0, 2.0, 3.0, 4.0], &[true, false, true, false]);
        assert!(regression_adjusted(&s, &DMatrix::zeros(4, 2)).is_err());
    }

    #[test]
    fn fipw_with_zero_imputation_is_ipw() {
        let s = sample(&[1.3, -0.2, 4.0, 2.2], &[true, false, false, true]);
        let a = fipw_estimate(&s, &DVector::zeros(4)).unwrap().tau_hat;
        assert_eq!(a, ipw_estimate(&s).unwrap().tau_hat);
        assert!(fipw_estimate(&s, &DVector::zeros(3)).is_err());
    }
}
