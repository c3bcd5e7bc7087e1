//! Data matrices, gram matrices and the linear algebra that moves between
//! them.
//!
//! A [`DataMatrix`] holds `m` observations laid out as `(1, Y, X_1, .., X_p)`.
//! Its scaled cross-product `D'D / m` is the [`GramMatrix`], which is a
//! sufficient statistic for ordinary least squares and for the first two
//! empirical moments of every column. The gram matrix can be split into
//! means, variances and correlations ([`MomentSummary`]) and rebuilt from
//! them, which is what the differentially private release perturbs.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::solve_symmetric;

/// Variances at or below this are treated as constant columns.
pub const DEGENERATE_VARIANCE: f64 = 1e-12;

/// Name given to the implicit constant column.
pub const INTERCEPT_NAME: &str = "(intercept)";

/// Confidential tabular data: column 0 is the constant 1, column 1 the
/// outcome and columns `2..p+2` the covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
    column_names: Vec<String>,
}

impl DataMatrix {
    /// Wraps a full `(1, Y, X)` matrix, checking the layout invariants.
    pub fn new(values: DMatrix<f64>, column_names: Vec<String>) -> Result<Self> {
        let (m, cols) = values.shape();
        if m < 2 {
            return Err(Error::TooFewRows { needed: 2, got: m });
        }
        if cols < 3 {
            return Err(Error::InvalidData(format!(
                "need an intercept, an outcome and at least one covariate, got {cols} columns"
            )));
        }
        if column_names.len() != cols {
            return Err(Error::DimensionMismatch {
                expected: cols,
                got: column_names.len(),
            });
        }
        if let Some((idx, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite entry {v} at row {}, column {}",
                idx % m,
                idx / m
            )));
        }
        if let Some(row) = (0..m).find(|&i| values[(i, 0)] != 1.0) {
            return Err(Error::InvalidData(format!(
                "intercept column must be 1, row {row} holds {}",
                values[(row, 0)]
            )));
        }
        Ok(Self {
            values,
            column_names,
        })
    }

    /// Assembles the matrix from an outcome vector and an `m x p` covariate
    /// matrix, prepending the intercept column.
    pub fn from_parts(
        outcome: &DVector<f64>,
        covariates: &DMatrix<f64>,
        outcome_name: &str,
        covariate_names: &[String],
    ) -> Result<Self> {
        let m = outcome.len();
        if covariates.nrows() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: covariates.nrows(),
            });
        }
        let p = covariates.ncols();
        if covariate_names.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: covariate_names.len(),
            });
        }
        let mut values = DMatrix::from_element(m, p + 2, 1.0);
        values.set_column(1, outcome);
        values.columns_mut(2, p).copy_from(covariates);
        let mut names = Vec::with_capacity(p + 2);
        names.push(INTERCEPT_NAME.to_string());
        names.push(outcome_name.to_string());
        names.extend(covariate_names.iter().cloned());
        Self::new(values, names)
    }

    /// Same as [`DataMatrix::from_parts`] with generated names `y, x1, .., xp`.
    pub fn from_unnamed(outcome: &DVector<f64>, covariates: &DMatrix<f64>) -> Result<Self> {
        let names: Vec<String> = (1..=covariates.ncols()).map(|j| format!("x{j}")).collect();
        Self::from_parts(outcome, covariates, "y", &names)
    }

    /// Number of rows.
    pub fn m(&self) -> usize {
        self.values.nrows()
    }

    /// Number of covariates.
    pub fn p(&self) -> usize {
        self.values.ncols() - 2
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn outcome(&self) -> DVector<f64> {
        self.values.column(1).into_owned()
    }

    /// The `m x p` covariate block.
    pub fn covariates(&self) -> DMatrix<f64> {
        self.values.columns(2, self.p()).into_owned()
    }

    /// The `m x (p+1)` block of confidential columns (outcome and covariates).
    pub fn data_columns(&self) -> DMatrix<f64> {
        self.values.columns(1, self.p() + 1).into_owned()
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }
}

/// Where a gram matrix came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Exact,
    EntryNoise,
    Dp,
    SyntheticDerived,
}

/// Scaled cross-product `D'D / m`, stored exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    entries: DMatrix<f64>,
    m: usize,
    provenance: Provenance,
    column_names: Vec<String>,
}

impl GramMatrix {
    /// Validates shape and exact symmetry.
    pub fn new(
        entries: DMatrix<f64>,
        m: usize,
        provenance: Provenance,
        column_names: Vec<String>,
    ) -> Result<Self> {
        let k = entries.nrows();
        if entries.ncols() != k {
            return Err(Error::InvalidData(format!(
                "gram matrix must be square, got {}x{}",
                k,
                entries.ncols()
            )));
        }
        if k < 3 {
            return Err(Error::InvalidData(format!(
                "gram matrix needs at least 3 columns, got {k}"
            )));
        }
        if column_names.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: column_names.len(),
            });
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("gram matrix has non-finite entries".into()));
        }
        for i in 0..k {
            for j in (i + 1)..k {
                if entries[(i, j)].to_bits() != entries[(j, i)].to_bits() {
                    return Err(Error::InvalidData(format!(
                        "gram matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self {
            entries,
            m,
            provenance,
            column_names,
        })
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Row count of the data the matrix summarizes.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of covariates (matrix dimension minus intercept and outcome).
    pub fn p(&self) -> usize {
        self.entries.nrows() - 2
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|n| n == name)
    }

    /// Column means of the confidential columns (the first row without its
    /// leading 1).
    pub fn means(&self) -> DVector<f64> {
        self.entries.row(0).columns(1, self.p() + 1).transpose()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.entries
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Copies the upper triangle onto the lower one.
pub(crate) fn symmetrize_upper(a: &mut DMatrix<f64>) {
    let k = a.nrows();
    for i in 0..k {
        for j in (i + 1)..k {
            a[(j, i)] = a[(i, j)];
        }
    }
}

/// `D'D / m`, with provenance [`Provenance::Exact`].
pub fn compute_gram(d: &DataMatrix) -> GramMatrix {
    gram_of(d.values(), Provenance::Exact, d.column_names().to_vec())
}

/// Gram matrix of an arbitrary `(1, Y, X)` matrix.
pub(crate) fn gram_of(values: &DMatrix<f64>, provenance: Provenance, names: Vec<String>) -> GramMatrix {
    let m = values.nrows();
    let mut entries = values.tr_mul(values) / m as f64;
    symmetrize_upper(&mut entries);
    GramMatrix {
        entries,
        m,
        provenance,
        column_names: names,
    }
}

/// Column means, variances and correlations of the confidential columns.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSummary {
    /// Means of `Y` then `X`.
    pub mu: DVector<f64>,
    /// Variances (1/m convention) of `Y` then `X`.
    pub sigma2: DVector<f64>,
    /// Correlation matrix with unit diagonal.
    pub corr: DMatrix<f64>,
    /// Names of the `p + 1` confidential columns.
    pub column_names: Vec<String>,
    /// Provenance of the gram matrix this was read from.
    pub source: Provenance,
    /// How many entries were clamped to keep the summary valid. Always 0
    /// for an exact gram; noisy grams may need it.
    pub clamped: usize,
}

impl MomentSummary {
    /// Checks the summary invariants.
    pub fn validate(&self) -> Result<()> {
        let q = self.mu.len();
        if self.sigma2.len() != q {
            return Err(Error::DimensionMismatch {
                expected: q,
                got: self.sigma2.len(),
            });
        }
        if self.corr.shape() != (q, q) {
            return Err(Error::DimensionMismatch {
                expected: q,
                got: self.corr.nrows(),
            });
        }
        if self.column_names.len() != q {
            return Err(Error::DimensionMismatch {
                expected: q,
                got: self.column_names.len(),
            });
        }
        if self.sigma2.iter().any(|&v| v.is_nan() || v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidData("variances must be finite and nonnegative".into()));
        }
        if self.mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("means must be finite".into()));
        }
        for i in 0..q {
            if self.corr[(i, i)] != 1.0 {
                return Err(Error::InvalidData(format!("corr[{i},{i}] must be 1")));
            }
            for j in 0..q {
                let r = self.corr[(i, j)];
                if !(-1.0..=1.0).contains(&r) || r != self.corr[(j, i)] {
                    return Err(Error::InvalidData(format!(
                        "corr[{i},{j}] = {r} is outside [-1, 1] or asymmetric"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn sd(&self) -> DVector<f64> {
        self.sigma2.map(f64::sqrt)
    }
}

/// Splits a gram matrix into means, variances and correlations.
///
/// For an exact gram a constant column is an error. Noisy grams are
/// accepted: negative variances are clamped to 0, undefined or out-of-range
/// correlations are clamped, and the number of clamped entries is recorded
/// in [`MomentSummary::clamped`].
pub fn partition_gram(g: &GramMatrix) -> Result<MomentSummary> {
    let q = g.p() + 1;
    let e = g.entries();
    let exact = g.provenance() == Provenance::Exact;
    let mut clamped = 0;

    let mu = DVector::from_fn(q, |j, _| e[(0, j + 1)]);
    let mut sigma2 = DVector::zeros(q);
    for j in 0..q {
        let v = e[(j + 1, j + 1)] - mu[j] * mu[j];
        if v <= DEGENERATE_VARIANCE {
            if exact {
                return Err(Error::DegenerateColumn {
                    column: j + 1,
                    variance: v,
                });
            }
            if v < 0.0 {
                clamped += 1;
            }
        }
        sigma2[j] = v.max(0.0);
    }

    let sd = sigma2.map(f64::sqrt);
    let mut corr = DMatrix::identity(q, q);
    for l in 0..q {
        for j in (l + 1)..q {
            let denom = sd[l] * sd[j];
            let raw = if denom > 0.0 {
                (e[(l + 1, j + 1)] - mu[l] * mu[j]) / denom
            } else {
                f64::NAN
            };
            let r = if raw.is_nan() {
                clamped += 1;
                0.0
            } else if raw.abs() > 1.0 {
                // Exact grams only overshoot by rounding.
                if !exact || raw.abs() > 1.0 + 1e-9 {
                    clamped += 1;
                }
                raw.signum()
            } else {
                raw
            };
            corr[(l, j)] = r;
            corr[(j, l)] = r;
        }
    }

    Ok(MomentSummary {
        mu,
        sigma2,
        corr,
        column_names: g.column_names()[1..].to_vec(),
        source: g.provenance(),
        clamped,
    })
}

/// Rebuilds a gram matrix from moments: row 0 is `(1, mu)`, the diagonal is
/// `sigma2 + mu^2` and off-diagonals are `corr * sd * sd + mu * mu`.
pub fn reconstruct_gram(s: &MomentSummary, m: usize, provenance: Provenance) -> GramMatrix {
    let q = s.mu.len();
    let sd = s.sd();
    let mut entries = DMatrix::zeros(q + 1, q + 1);
    entries[(0, 0)] = 1.0;
    for j in 0..q {
        entries[(0, j + 1)] = s.mu[j];
        entries[(j + 1, j + 1)] = s.sigma2[j] + s.mu[j] * s.mu[j];
        for l in (j + 1)..q {
            entries[(j + 1, l + 1)] = s.corr[(j, l)] * sd[j] * sd[l] + s.mu[j] * s.mu[l];
        }
    }
    symmetrize_upper(&mut entries);
    let mut names = Vec::with_capacity(q + 1);
    names.push(INTERCEPT_NAME.to_string());
    names.extend(s.column_names.iter().cloned());
    GramMatrix {
        entries,
        m,
        provenance,
        column_names: names,
    }
}

/// Linear model `y = intercept + coefficients' x` over selected gram columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    /// Gram-column indices of the covariates, in coefficient order.
    pub covariate_indices: Vec<usize>,
    /// Mean squared residual implied by the gram, clamped at 0.
    pub residual_variance: f64,
}

impl LinearModel {
    /// `intercept + coefficients . covariates`.
    ///
    /// # Panics
    ///
    /// If `covariates` has the wrong length.
    pub fn predict(&self, covariates: &[f64]) -> f64 {
        assert_eq!(
            covariates.len(),
            self.coefficients.len(),
            "covariate vector length does not match the model"
        );
        self.intercept
            + self
                .coefficients
                .iter()
                .zip(covariates)
                .map(|(b, x)| b * x)
                .sum::<f64>()
    }

    /// Predicts every row of `x`, whose columns follow the model's covariate
    /// order.
    pub fn predict_rows(&self, x: &DMatrix<f64>) -> DVector<f64> {
        assert_eq!(x.ncols(), self.coefficients.len());
        let beta = DVector::from_column_slice(&self.coefficients);
        (x * beta).add_scalar(self.intercept)
    }
}

/// Free-function form of [`LinearModel::predict`].
pub fn predict(model: &LinearModel, covariates: &[f64]) -> f64 {
    model.predict(covariates)
}

/// Ordinary least squares of gram column `outcome_index` on
/// `covariate_indices`, with the intercept taken from column 0.
pub fn ols_from_gram(
    g: &GramMatrix,
    outcome_index: usize,
    covariate_indices: &[usize],
) -> Result<LinearModel> {
    let k = g.entries().nrows();
    if covariate_indices.is_empty() {
        return Err(Error::InvalidConfig("need at least one covariate".into()));
    }
    if outcome_index == 0 || outcome_index >= k {
        return Err(Error::InvalidConfig(format!(
            "outcome index {outcome_index} out of range 1..{k}"
        )));
    }
    for &c in covariate_indices {
        if c == 0 || c >= k || c == outcome_index {
            return Err(Error::InvalidConfig(format!(
                "covariate index {c} must lie in 1..{k} and differ from the outcome"
            )));
        }
    }

    // Solve the centred, unit-scaled normal equations; the intercept follows
    // from the means. This keeps large column offsets and scales out of the
    // condition number.
    let e = g.entries();
    let q = covariate_indices.len();
    let mu = DVector::from_fn(q, |r, _| e[(0, covariate_indices[r])]);
    let mu_y = e[(0, outcome_index)];
    let mut s_xx = DMatrix::from_fn(q, q, |r, c| {
        e[(covariate_indices[r], covariate_indices[c])] - mu[r] * mu[c]
    });
    let s_xy = DVector::from_fn(q, |r, _| e[(covariate_indices[r], outcome_index)] - mu[r] * mu_y);
    let scale = DVector::from_fn(q, |r, _| {
        let v = s_xx[(r, r)];
        if v > 0.0 && v.is_finite() { v.sqrt() } else { 1.0 }
    });
    for r in 0..q {
        for c in 0..q {
            s_xx[(r, c)] /= scale[r] * scale[c];
        }
    }
    symmetrize_upper(&mut s_xx);
    let mut rhs = s_xy.component_div(&scale);
    // A constant covariate is collinear with the intercept: pin its slope to 0.
    for r in 0..q {
        let v = e[(covariate_indices[r], covariate_indices[r])] - mu[r] * mu[r];
        if v.abs() <= DEGENERATE_VARIANCE {
            for c in 0..q {
                s_xx[(r, c)] = 0.0;
                s_xx[(c, r)] = 0.0;
            }
            s_xx[(r, r)] = 1.0;
            rhs[r] = 0.0;
        }
    }
    let (z, _) = solve_symmetric(&s_xx, &rhs, 0)?;
    let slopes = z.component_div(&scale);
    let intercept = mu_y - slopes.dot(&mu);
    let s_yy = e[(outcome_index, outcome_index)] - mu_y * mu_y;
    let residual_variance = (s_yy - slopes.dot(&s_xy)).max(0.0);
    Ok(LinearModel {
        intercept,
        coefficients: slopes.iter().copied().collect(),
        covariate_indices: covariate_indices.to_vec(),
        residual_variance,
    })
}
