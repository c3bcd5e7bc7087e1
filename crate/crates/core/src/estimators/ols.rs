use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::spd_inverse;

/// Least-squares fit on raw rows; the first design column is the intercept.
pub(crate) struct OlsFit {
    pub coef: DVector<f64>,
    pub xtx_inv: DMatrix<f64>,
    pub rss: f64,
    pub residuals: DVector<f64>,
}

pub(crate) fn ols(design: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit> {
    let k = design.ncols();
    if design.nrows() < k {
        return Err(Error::SingularSystem);
    }
    let xtx = design.tr_mul(design);
    let xtx_inv = spd_inverse(&xtx, 1.min(k - 1))?;
    let coef = &xtx_inv * design.tr_mul(y);
    let residuals = y - design * &coef;
    let rss = residuals.norm_squared();
    Ok(OlsFit { coef, xtx_inv, rss, residuals })
}

/// `[1, x]` for the given rows.
pub(crate) fn with_intercept(x: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    let mut d = DMatrix::from_element(rows.len(), x.ncols() + 1, 1.0);
    for (r, &i) in rows.iter().enumerate() {
        for j in 0..x.ncols() {
            d[(r, j + 1)] = x[(i, j)];
        }
    }
    d
}
