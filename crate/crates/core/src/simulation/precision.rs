use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use super::config::PrecisionConfig;
use super::dgp::{draw_coefficients, gen_precision_generation, rct_covariate_columns, Coefficients, TREATMENT_PROBABILITY};
use super::results::{ResultRow, Study, StudyResults, NO_TRANSFORM};
use super::transforms::release_gram;
use super::{purpose, STUDY_PRECISION};
use crate::error::Result;
use crate::estimators::{diff_in_means, loop_estimate, regression_adjusted, EstimatorId, RctSample};
use crate::model::ols_from_gram;
use crate::rng::stream;

/// Coefficients for the precision study at dimension `p`.
pub fn precision_coefficients(cfg: &PrecisionConfig) -> Coefficients {
    let mut rng = stream(&[cfg.base_seed, STUDY_PRECISION, cfg.p as u64, purpose::COEFFICIENTS]);
    draw_coefficients(cfg.p, cfg.explained_share, false, &mut rng)
}

#[derive(Debug, Clone, Default)]
struct GenerationOutcome {
    /// Empirical variance of each row's estimates across assignments.
    variances: Vec<Option<f64>>,
    redraws: usize,
}

fn sample_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
}

fn run_generation(cfg: &PrecisionConfig, coefs: &Coefficients, generation: u64) -> GenerationOutcome {
    let key = |purpose: u64, k: u64| [cfg.base_seed, STUDY_PRECISION, cfg.p as u64, generation, purpose, k];
    let t_count = cfg.transforms.len();
    let rows = 2 + 2 * t_count;
    let mut out = GenerationOutcome { variances: vec![None; rows], redraws: 0 };
    let Ok(data) = gen_precision_generation(cfg, coefs, &mut stream(&key(purpose::DATA, 0))) else {
        return out;
    };
    let x_sel = data.x.select_columns(&rct_covariate_columns(&coefs.beta, cfg.max_rct_covariates));
    let covariate_cols: Vec<usize> = (2..cfg.p + 2).collect();
    let predictions: Vec<Option<DVector<f64>>> = cfg
        .transforms
        .iter()
        .enumerate()
        .map(|(k, spec)| {
            let gram = release_gram(spec, &data.aux, cfg.delta, &mut stream(&key(purpose::TRANSFORM, k as u64))).ok()?;
            let model = ols_from_gram(&gram, 1, &covariate_cols).ok()?;
            let pred = model.predict_rows(&data.x);
            pred.iter().all(|v| v.is_finite()).then_some(pred)
        })
        .collect();
    let pred_cols: Vec<Option<DMatrix<f64>>> = predictions
        .iter()
        .map(|p| p.as_ref().map(|p| DMatrix::from_column_slice(p.len(), 1, p.as_slice())))
        .collect();

    let mut rng = stream(&key(purpose::ASSIGNMENT, 0));
    let mut estimates: Vec<Option<Vec<f64>>> = vec![Some(Vec::with_capacity(cfg.assignments)); rows];
    for k in 0..t_count {
        if predictions[k].is_none() {
            estimates[2 + 2 * k] = None;
            estimates[3 + 2 * k] = None;
        }
    }
    let record = |slot: &mut Option<Vec<f64>>, value: Result<f64>| match (slot.as_mut(), value) {
        (Some(v), Ok(x)) => v.push(x),
        (Some(_), Err(_)) => *slot = None,
        (None, _) => {}
    };
    for _ in 0..cfg.assignments {
        let s = loop {
            let t: Vec<bool> = (0..cfg.n).map(|_| rng.random::<f64>() < TREATMENT_PROBABILITY).collect();
            let y = DVector::from_fn(cfg.n, |i, _| if t[i] { data.y_t[i] } else { data.y_c[i] });
            match RctSample::new(y, t, x_sel.clone(), TREATMENT_PROBABILITY) {
                Ok(s) => break s,
                Err(_) => out.redraws += 1,
            }
        };
        record(&mut estimates[0], diff_in_means(&s).map(|r| r.tau_hat));
        record(&mut estimates[1], regression_adjusted(&s, s.x()).map(|r| r.tau_hat));
        for k in 0..t_count {
            let (Some(pred), Some(col)) = (&predictions[k], &pred_cols[k]) else {
                continue;
            };
            record(&mut estimates[2 + 2 * k], regression_adjusted(&s, col).map(|r| r.tau_hat));
            record(&mut estimates[3 + 2 * k], loop_estimate(&s, pred, cfg.max_rct_covariates).map(|r| r.tau_hat));
        }
    }
    out.variances = estimates.iter().map(|e| e.as_deref().map(sample_variance)).collect();
    out
}

/// Replicates the precision study: for fixed RCT units, the variance of each
/// estimator over repeated treatment assignments, relative to RCT-only
/// baselines.
pub fn run_precision_study(cfg: &PrecisionConfig) -> Result<StudyResults> {
    cfg.validate()?;
    let coefs = precision_coefficients(cfg);
    let outcomes: Vec<GenerationOutcome> = (0..cfg.generations as u64)
        .into_par_iter()
        .map(|g| run_generation(cfg, &coefs, g))
        .collect();

    let mut labels = vec![
        (EstimatorId::DiffInMeans, NO_TRANSFORM.to_string()),
        (EstimatorId::RegressionAdjusted, NO_TRANSFORM.to_string()),
    ];
    for t in &cfg.transforms {
        labels.push((EstimatorId::RegressionAdjusted, t.to_string()));
        labels.push((EstimatorId::Loop, t.to_string()));
    }
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);

    let rows = labels
        .into_iter()
        .enumerate()
        .map(|(k, (est, transform))| {
            let mut row = ResultRow::empty(Study::Precision, cfg.p, est, transform);
            let vars: Vec<f64> = outcomes.iter().filter_map(|o| o.variances[k]).collect();
            row.failures = cfg.generations - vars.len();
            row.var_tau = mean(&vars);
            let ratios = |base: usize| -> Vec<f64> {
                outcomes
                    .iter()
                    .filter_map(|o| Some(o.variances[base]? / o.variances[k]?))
                    .filter(|r| r.is_finite())
                    .collect()
            };
            row.re_dm = mean(&ratios(0));
            row.re_reg = mean(&ratios(1));
            row
        })
        .collect();

    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("redraws".into(), outcomes.iter().map(|o| o.redraws as f64).sum());
    diagnostics.insert(
        "rct_covariates".into(),
        rct_covariate_columns(&coefs.beta, cfg.max_rct_covariates).len() as f64,
    );
    Ok(StudyResults { study: Study::Precision, p: cfg.p, units: cfg.generations, rows, diagnostics })
}
