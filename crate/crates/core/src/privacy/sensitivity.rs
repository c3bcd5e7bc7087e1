//! Exact leave-one-out sensitivities of the released moments.
//!
//! Neighbouring datasets differ by the removal of one row. For every row `k`
//! the moments of the remaining `m - 1` rows are obtained by a rank-one
//! downdate of the centered cross-product matrix: with `d = z_k - mu`,
//! `M' = M - m/(m-1) d d'` and `mu' = mu - d/(m-1)`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{DataMatrix, DEGENERATE_VARIANCE};

/// Which released statistic to measure. Column indices count data columns,
/// so 0 is the outcome and `1..=p` the covariates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatBlock {
    MeanElement(usize),
    VarianceElement(usize),
    /// All off-diagonal upper-triangle correlations, as one vector.
    CorrelationVector,
}

/// Sensitivities of every block of the moment summary.
#[derive(Debug, Clone, PartialEq)]
pub struct LooSensitivities {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub correlation: f64,
}

fn check_rows(d: &DataMatrix) -> Result<()> {
    if d.m() < 3 {
        return Err(Error::TooFewRows { needed: 3, got: d.m() });
    }
    Ok(())
}

struct Centered {
    z: DMatrix<f64>,
    mu: Vec<f64>,
    /// Centered sums of squares and cross products.
    sscp: DMatrix<f64>,
}

fn centered(d: &DataMatrix) -> Centered {
    let z = d.data_columns();
    let m = z.nrows() as f64;
    let mu: Vec<f64> = z.column_iter().map(|c| c.sum() / m).collect();
    let mut zc = z.clone();
    for (j, mut col) in zc.column_iter_mut().enumerate() {
        col.add_scalar_mut(-mu[j]);
    }
    let sscp = zc.tr_mul(&zc);
    Centered { z, mu, sscp }
}

fn mean_and_variance(c: &Centered, j: usize) -> (f64, f64) {
    let m = c.z.nrows();
    let mf = m as f64;
    let shrink = mf / (mf - 1.0);
    let v = c.sscp[(j, j)] / mf;
    let (mut dmean, mut dvar) = (0.0_f64, 0.0_f64);
    for k in 0..m {
        let dk = c.z[(k, j)] - c.mu[j];
        dmean = dmean.max(dk.abs() / (mf - 1.0));
        let v_loo = (c.sscp[(j, j)] - shrink * dk * dk).max(0.0) / (mf - 1.0);
        dvar = dvar.max((v_loo - v).abs());
    }
    (dmean, dvar)
}

fn correlation(c: &Centered) -> Result<f64> {
    let m = c.z.nrows();
    let q = c.z.ncols();
    let mf = m as f64;
    let shrink = mf / (mf - 1.0);
    for j in 0..q {
        let v = c.sscp[(j, j)] / mf;
        if v <= DEGENERATE_VARIANCE {
            return Err(Error::DegenerateColumn { column: j + 1, variance: v });
        }
    }
    let inv_sd: Vec<f64> = (0..q).map(|j| 1.0 / c.sscp[(j, j)].sqrt()).collect();

    let mut d = vec![0.0; q];
    let mut inv_sd_loo = vec![0.0; q];
    let mut worst = 0.0_f64;
    for k in 0..m {
        for j in 0..q {
            d[j] = c.z[(k, j)] - c.mu[j];
            let ss = c.sscp[(j, j)] - shrink * d[j] * d[j];
            // A column that becomes constant has undefined correlations; they
            // are released as 0.
            inv_sd_loo[j] = if ss > DEGENERATE_VARIANCE * mf { 1.0 / ss.sqrt() } else { 0.0 };
        }
        let mut sq = 0.0;
        for l in 0..q {
            for j in (l + 1)..q {
                let r = c.sscp[(l, j)] * inv_sd[l] * inv_sd[j];
                let r_loo = (c.sscp[(l, j)] - shrink * d[l] * d[j]) * inv_sd_loo[l] * inv_sd_loo[j];
                let diff = r_loo - r;
                sq += diff * diff;
            }
        }
        worst = worst.max(sq);
    }
    Ok(worst.sqrt())
}

/// Largest change of `block` over all single-row removals: absolute change
/// for the scalar blocks, L2 change for the correlation vector.
pub fn loo_sensitivity(d: &DataMatrix, block: StatBlock) -> Result<f64> {
    check_rows(d)?;
    let c = centered(d);
    let q = d.p() + 1;
    match block {
        StatBlock::MeanElement(j) | StatBlock::VarianceElement(j) if j >= q => {
            Err(Error::InvalidConfig(format!("data column {j} out of range 0..{q}")))
        }
        StatBlock::MeanElement(j) => Ok(mean_and_variance(&c, j).0),
        StatBlock::VarianceElement(j) => Ok(mean_and_variance(&c, j).1),
        StatBlock::CorrelationVector => correlation(&c),
    }
}

/// All block sensitivities in one pass over the data.
pub fn loo_sensitivities(d: &DataMatrix) -> Result<LooSensitivities> {
    check_rows(d)?;
    let c = centered(d);
    let q = d.p() + 1;
    let (mean, variance) = (0..q).map(|j| mean_and_variance(&c, j)).unzip();
    Ok(LooSensitivities {
        mean,
        variance,
        correlation: correlation(&c)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn data(y: &[f64], x: &[f64]) -> DataMatrix {
        DataMatrix::from_unnamed(
            &DVector::from_column_slice(y),
            &DMatrix::from_column_slice(x.len(), 1, x),
        )
        .unwrap()
    }

    #[test]
    fn constant_column_has_zero_mean_sensitivity() {
        let d = data(&[0.0, 0.0, 0.0], &[1.0, 2.0, 4.0]);
        assert_eq!(loo_sensitivity(&d, StatBlock::MeanElement(0)).unwrap(), 0.0);
        assert_eq!(loo_sensitivity(&d, StatBlock::VarianceElement(0)).unwrap(), 0.0);
        assert!(matches!(
            loo_sensitivity(&d, StatBlock::CorrelationVector),
            Err(Error::DegenerateColumn { column: 1, .. })
        ));
    }

    #[test]
    fn removing_the_outlier_moves_the_mean_by_one() {
        let d = data(&[0.0, 0.0, 3.0], &[1.0, 2.0, 4.0]);
        let s = loo_sensitivity(&d, StatBlock::MeanElement(0)).unwrap();
        assert!((s - 1.0).abs() < 1e-15, "{s}");
    }

    #[test]
    fn two_rows_are_too_few() {
        let d = data(&[0.0, 1.0], &[1.0, 2.0]);
        assert!(matches!(
            loo_sensitivity(&d, StatBlock::MeanElement(0)),
            Err(Error::TooFewRows { needed: 3, got: 2 })
        ));
    }

    #[test]
    fn out_of_range_column() {
        let d = data(&[0.0, 1.0, 2.0], &[1.0, 2.0, 0.0]);
        assert!(loo_sensitivity(&d, StatBlock::MeanElement(2)).is_err());
    }
}
