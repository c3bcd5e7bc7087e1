//! Disclosure-limiting transformations of a confidential data matrix into a
//! releasable gram matrix.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::budget::{allocate_budget, mean_label, variance_label, BudgetLedger, PrivacyBudget, CORRELATION_LABEL};
use super::sensitivity::{loo_sensitivities, LooSensitivities};
use crate::error::{Error, Result};
use crate::model::{
    compute_gram, gram_of, partition_gram, reconstruct_gram, symmetrize_upper, DataMatrix, GramMatrix,
    MomentSummary, Provenance,
};

/// Relative floor applied to noisy variances.
pub const VARIANCE_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DpGramOptions {
    /// Clip negative eigenvalues of the released matrix to zero. Off by
    /// default: the raw reconstruction is what is released.
    pub psd_repair: bool,
}

/// Everything produced by one private release.
#[derive(Debug, Clone)]
pub struct DpRelease {
    pub gram: GramMatrix,
    pub ledger: BudgetLedger,
    pub sensitivities: LooSensitivities,
    /// The noisy moments the gram was rebuilt from.
    pub summary: MomentSummary,
}

/// `(epsilon, delta)`-private gram matrix built from noisy moments.
///
/// Each mean and each variance is released separately with its own
/// leave-one-out sensitivity and an equal `2/(p^2+5p+4)` share of the
/// budget; the off-diagonal correlations are released together as one
/// vector with the remaining share. Noisy variances are floored at
/// `1e-8` times their pre-noise value and correlations clamped to `[-1, 1]`
/// before the gram is rebuilt. The result is symmetric but may be
/// indefinite.
pub fn dp_gram_transform<R: Rng + ?Sized>(
    d: &DataMatrix,
    budget: PrivacyBudget,
    rng: &mut R,
) -> Result<(GramMatrix, BudgetLedger)> {
    let release = dp_gram_transform_with(d, budget, DpGramOptions::default(), rng)?;
    Ok((release.gram, release.ledger))
}

pub fn dp_gram_transform_with<R: Rng + ?Sized>(
    d: &DataMatrix,
    budget: PrivacyBudget,
    options: DpGramOptions,
    rng: &mut R,
) -> Result<DpRelease> {
    let exact = partition_gram(&compute_gram(d))?;
    let sensitivities = loo_sensitivities(d)?;
    let q = d.p() + 1;
    let mut ledger = allocate_budget(budget, d.p())?;

    let mut mu = DVector::zeros(q);
    for j in 0..q {
        mu[j] = ledger.release(&mean_label(j), &[exact.mu[j]], sensitivities.mean[j], rng)?[0];
    }
    let mut sigma2 = DVector::zeros(q);
    for j in 0..q {
        let noisy = ledger.release(&variance_label(j), &[exact.sigma2[j]], sensitivities.variance[j], rng)?[0];
        let floor = if exact.sigma2[j] > 0.0 {
            VARIANCE_FLOOR * exact.sigma2[j]
        } else {
            VARIANCE_FLOOR
        };
        sigma2[j] = noisy.max(floor);
    }

    let upper: Vec<f64> = (0..q)
        .flat_map(|l| ((l + 1)..q).map(move |j| (l, j)))
        .map(|(l, j)| exact.corr[(l, j)])
        .collect();
    let noisy = ledger.release(CORRELATION_LABEL, &upper, sensitivities.correlation, rng)?;
    let mut corr = DMatrix::identity(q, q);
    let mut it = noisy.into_iter();
    for l in 0..q {
        for j in (l + 1)..q {
            let r = it.next().expect("one value per pair").clamp(-1.0, 1.0);
            corr[(l, j)] = r;
            corr[(j, l)] = r;
        }
    }

    let summary = MomentSummary {
        mu,
        sigma2,
        corr,
        column_names: exact.column_names.clone(),
        source: Provenance::Dp,
        clamped: 0,
    };
    let mut gram = reconstruct_gram(&summary, d.m(), Provenance::Dp);
    if options.psd_repair {
        gram = clip_eigenvalues(&gram)?;
    }
    Ok(DpRelease {
        gram,
        ledger,
        sensitivities,
        summary,
    })
}

fn clip_eigenvalues(g: &GramMatrix) -> Result<GramMatrix> {
    let eig = g.entries().clone().symmetric_eigen();
    let clipped = eig.eigenvalues.map(|v| v.max(0.0));
    let mut entries = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    symmetrize_upper(&mut entries);
    GramMatrix::new(entries, g.m(), g.provenance(), g.column_names().to_vec())
}

/// Variance of the noise added to each confidential column.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum NoiseSpec {
    /// The same variance for every column.
    Uniform(f64),
    /// One variance per confidential column (outcome first).
    PerColumn(Vec<f64>),
    /// Each column's own empirical variance.
    #[default]
    ColumnVariance,
}

impl NoiseSpec {
    /// Per-column variances for `d`.
    pub fn resolve(&self, d: &DataMatrix) -> Result<Vec<f64>> {
        let q = d.p() + 1;
        let v = match self {
            NoiseSpec::Uniform(l) => vec![*l; q],
            NoiseSpec::PerColumn(v) => {
                if v.len() != q {
                    return Err(Error::DimensionMismatch { expected: q, got: v.len() });
                }
                v.clone()
            }
            NoiseSpec::ColumnVariance => {
                let z = d.data_columns();
                let m = z.nrows() as f64;
                z.column_iter()
                    .map(|c| {
                        let mean = c.sum() / m;
                        c.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / m
                    })
                    .collect()
            }
        };
        if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidConfig("noise variances must be finite and nonnegative".into()));
        }
        Ok(v)
    }
}

/// Gram matrix of `D + E`, where `E` holds independent normal noise with the
/// given per-column variance. The intercept column is left untouched, so the
/// output is a genuine (positive semi-definite) gram matrix.
pub fn en_transform<R: Rng + ?Sized>(d: &DataMatrix, noise: &NoiseSpec, rng: &mut R) -> Result<GramMatrix> {
    let variances = noise.resolve(d)?;
    let mut noisy = d.values().clone();
    for (j, var) in variances.iter().enumerate() {
        if *var == 0.0 {
            continue;
        }
        let sd = var.sqrt();
        for v in noisy.column_mut(j + 1).iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v += sd * z;
        }
    }
    Ok(gram_of(&noisy, Provenance::EntryNoise, d.column_names().to_vec()))
}
