//! Small dense solvers shared by the gram-matrix and raw-data regressions.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative ridge added to the covariate block when the first factorization
/// fails.
pub(crate) const RIDGE_JITTER: f64 = 1e-8;

/// How a symmetric system was finally solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum SolvePath {
    Cholesky,
    JitteredCholesky,
    Lu,
}

/// Solves `a x = b` for symmetric `a`.
///
/// Tries a Cholesky factorization, then retries with `RIDGE_JITTER * trace / k`
/// added to the diagonal entries `jitter_from..`, then falls back to a pivoted
/// LU solve of the unjittered system (noisy grams can be indefinite but still
/// nonsingular).
pub(crate) fn solve_symmetric(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    jitter_from: usize,
) -> Result<(DVector<f64>, SolvePath)> {
    if let Some(chol) = a.clone().cholesky() {
        let x = chol.solve(b);
        if x.iter().all(|v| v.is_finite()) {
            return Ok((x, SolvePath::Cholesky));
        }
    }

    let k = a.nrows();
    let block = k.saturating_sub(jitter_from).max(1);
    let trace: f64 = (jitter_from..k).map(|i| a[(i, i)]).sum();
    if trace.is_finite() && trace > 0.0 {
        let mut jittered = a.clone();
        for i in jitter_from..k {
            jittered[(i, i)] += RIDGE_JITTER * trace / block as f64;
        }
        if let Some(chol) = jittered.cholesky() {
            let x = chol.solve(b);
            if x.iter().all(|v| v.is_finite()) {
                return Ok((x, SolvePath::JitteredCholesky));
            }
        }
    }

    if let Some(x) = a.clone().lu().solve(b) {
        let residual = (a * &x - b).amax();
        if x.iter().all(|v| v.is_finite()) && residual <= 1e-6 * (1.0 + b.amax()) {
            return Ok((x, SolvePath::Lu));
        }
    }
    Err(Error::SingularSystem)
}

/// Inverse of a symmetric positive-definite matrix, with the same jitter retry
/// as [`solve_symmetric`] but no indefinite fallback.
pub(crate) fn spd_inverse(a: &DMatrix<f64>, jitter_from: usize) -> Result<DMatrix<f64>> {
    if let Some(chol) = a.clone().cholesky() {
        return Ok(chol.inverse());
    }
    let k = a.nrows();
    let block = k.saturating_sub(jitter_from).max(1);
    let trace: f64 = (jitter_from..k).map(|i| a[(i, i)]).sum();
    if !(trace.is_finite() && trace > 0.0) {
        return Err(Error::SingularSystem);
    }
    let mut jittered = a.clone();
    for i in jitter_from..k {
        jittered[(i, i)] += RIDGE_JITTER * trace / block as f64;
    }
    jittered
        .cholesky()
        .map(|c| c.inverse())
        .ok_or(Error::SingularSystem)
}
