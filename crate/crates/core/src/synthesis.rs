//! Sequential parametric synthesis.
//!
//! The first column (in synthesis order) is drawn from a normal with the
//! sample mean and variance; every later column is drawn from a linear
//! Gaussian model fit on the columns before it. Residual variances use the
//! 1/m convention, matching the gram scaling.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{compute_gram, gram_of, ols_from_gram, DataMatrix, GramMatrix, LinearModel, Provenance, DEGENERATE_VARIANCE};

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnModel {
    Marginal { mean: f64, variance: f64 },
    /// Covariate indices are gram indices, i.e. data column + 1.
    Conditional(LinearModel),
}

/// A fitted generator for synthetic copies of a data matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SequentialSynthesizer {
    column_models: Vec<ColumnModel>,
    column_order: Vec<usize>,
    column_names: Vec<String>,
}

impl SequentialSynthesizer {
    pub fn column_models(&self) -> &[ColumnModel] {
        &self.column_models
    }

    /// Data-column indices (0 is the outcome) in synthesis order.
    pub fn column_order(&self) -> &[usize] {
        &self.column_order
    }
}

/// Fits the sequence of conditional models. `order` defaults to the natural
/// column order (outcome first, then covariates by index).
pub fn fit_sequential(d: &DataMatrix, order: Option<&[usize]>) -> Result<SequentialSynthesizer> {
    let q = d.p() + 1;
    if d.m() <= d.p() + 2 {
        return Err(Error::TooFewRows {
            needed: d.p() + 3,
            got: d.m(),
        });
    }
    let order: Vec<usize> = match order {
        Some(o) => {
            let mut seen = vec![false; q];
            if o.len() != q || o.iter().any(|&c| c >= q || std::mem::replace(&mut seen[c], true)) {
                return Err(Error::InvalidConfig(format!(
                    "column order must be a permutation of 0..{q}"
                )));
            }
            o.to_vec()
        }
        None => (0..q).collect(),
    };

    let g = compute_gram(d);
    let e = g.entries();
    let variance_of = |c: usize| e[(c + 1, c + 1)] - e[(0, c + 1)] * e[(0, c + 1)];

    let mut models = Vec::with_capacity(q);
    let first = order[0];
    models.push(ColumnModel::Marginal {
        mean: e[(0, first + 1)],
        variance: variance_of(first).max(0.0),
    });
    for j in 1..q {
        let target = order[j] + 1;
        let predictors: Vec<usize> = order[..j].iter().map(|c| c + 1).collect();
        let model = ols_from_gram(&g, target, &predictors).map_err(|err| match err {
            Error::SingularSystem => {
                let (column, variance) = order[..j]
                    .iter()
                    .map(|&c| (c + 1, variance_of(c)))
                    .find(|(_, v)| *v <= DEGENERATE_VARIANCE)
                    .unwrap_or((target, variance_of(order[j])));
                Error::DegenerateColumn { column, variance }
            }
            other => other,
        })?;
        models.push(ColumnModel::Conditional(model));
    }

    Ok(SequentialSynthesizer {
        column_models: models,
        column_order: order,
        column_names: d.column_names().to_vec(),
    })
}

/// Draws `m_out` synthetic rows, one column at a time in synthesis order.
pub fn synthesize<R: Rng + ?Sized>(s: &SequentialSynthesizer, m_out: usize, rng: &mut R) -> Result<DataMatrix> {
    if m_out < 2 {
        return Err(Error::TooFewRows { needed: 2, got: m_out });
    }
    let q = s.column_order.len();
    let mut values = DMatrix::from_element(m_out, q + 1, 1.0);
    for (model, &c) in s.column_models.iter().zip(&s.column_order) {
        let col = match model {
            ColumnModel::Marginal { mean, variance } => {
                let mut col = DVector::from_element(m_out, *mean);
                add_noise(&mut col, *variance, rng);
                col
            }
            ColumnModel::Conditional(lm) => {
                let x = DMatrix::from_fn(m_out, lm.covariate_indices.len(), |i, k| {
                    values[(i, lm.covariate_indices[k])]
                });
                let mut col = lm.predict_rows(&x);
                add_noise(&mut col, lm.residual_variance, rng);
                col
            }
        };
        values.set_column(c + 1, &col);
    }
    DataMatrix::new(values, s.column_names.clone())
}

/// Gram matrix of `m_out` synthetic rows drawn from a synthesizer fit on `d`.
pub fn synthetic_gram<R: Rng + ?Sized>(d: &DataMatrix, m_out: usize, rng: &mut R) -> Result<GramMatrix> {
    let s = fit_sequential(d, None)?;
    let syn = synthesize(&s, m_out, rng)?;
    Ok(gram_of(syn.values(), Provenance::SyntheticDerived, syn.column_names().to_vec()))
}

fn add_noise<R: Rng + ?Sized>(col: &mut DVector<f64>, variance: f64, rng: &mut R) {
    if variance > 0.0 {
        let sd = variance.sqrt();
        for v in col.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v += sd * z;
        }
    }
}
