use std::collections::BTreeMap;

use nalgebra::DVector;
use rayon::prelude::*;

use super::config::{GeneralizationConfig, TransformSpec};
use super::dgp::{draw_coefficients, gen_generalization_rep, Coefficients, EXPLAINED_SHARE, PATE};
use super::metrics::mse_decompose;
use super::results::{ResultRow, Study, StudyResults, NO_TRANSFORM};
use super::transforms::release_gram;
use super::{purpose, STUDY_GENERALIZATION};
use crate::error::Result;
use crate::estimators::{
    acw_estimate, bootstrap_ci, calibration_weights, diff_in_means, gram_target, moment_features,
    regression_adjusted, EstimateResult, EstimatorId, RctSample,
};
use crate::rng::stream;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Estimate {
    tau: f64,
    ci: Option<(f64, f64)>,
}

impl From<&EstimateResult> for Estimate {
    fn from(r: &EstimateResult) -> Self {
        Self { tau: r.tau_hat, ci: r.ci_low.zip(r.ci_high) }
    }
}

#[derive(Debug, Clone, Default)]
struct RepOutcome {
    sate: Option<f64>,
    n: usize,
    redraws: usize,
    estimates: Vec<Option<Estimate>>,
    bootstrap_failed: usize,
}

/// Coefficients for the generalization study at dimension `p`.
pub fn generalization_coefficients(cfg: &GeneralizationConfig) -> Coefficients {
    let mut rng = stream(&[cfg.base_seed, STUDY_GENERALIZATION, cfg.p as u64, purpose::COEFFICIENTS]);
    draw_coefficients(cfg.p, EXPLAINED_SHARE, true, &mut rng)
}

/// ACW against one auxiliary release, with its bootstrap interval.
fn acw_with_ci(
    cfg: &GeneralizationConfig,
    rct: &RctSample,
    target: &DVector<f64>,
    seed_parts: &[u64],
) -> Result<(Estimate, usize)> {
    let p1 = rct.x().ncols();
    let aux_mu = target.rows(0, p1).into_owned();
    let estimate = |s: &RctSample| -> Result<EstimateResult> {
        let w = calibration_weights(&moment_features(s.x(), cfg.second_moments), target)?;
        acw_estimate(s, &w, &aux_mu)
    };
    let point = estimate(rct)?;
    let mut rng = stream(seed_parts);
    match bootstrap_ci(|s| estimate(s).map(|r| r.tau_hat), rct, cfg.bootstrap_b, cfg.level, &mut rng) {
        Ok(ci) => Ok((Estimate { tau: point.tau_hat, ci: Some((ci.ci_low, ci.ci_high)) }, ci.failed)),
        Err(_) => Ok((Estimate { tau: point.tau_hat, ci: None }, cfg.bootstrap_b)),
    }
}

fn run_rep(cfg: &GeneralizationConfig, coefs: &Coefficients, rep: u64) -> RepOutcome {
    let key = |purpose: u64, k: u64| [cfg.base_seed, STUDY_GENERALIZATION, cfg.p as u64, rep, purpose, k];
    let rows = 2 + cfg.transforms.len();
    let mut out = RepOutcome { estimates: vec![None; rows], ..Default::default() };
    let data = match gen_generalization_rep(cfg, coefs, &mut stream(&key(purpose::DATA, 0))) {
        Ok(d) => d,
        Err(_) => return out,
    };
    out.sate = Some(data.sate);
    out.n = data.rct.n();
    out.redraws = data.redraws;
    let rct = &data.rct;
    out.estimates[0] = diff_in_means(rct).ok().as_ref().map(Estimate::from);
    out.estimates[1] = regression_adjusted(rct, rct.x()).ok().as_ref().map(Estimate::from);

    let p1 = rct.x().ncols();
    let columns: Vec<usize> = (2..2 + p1).collect();
    for (k, spec) in cfg.transforms.iter().enumerate() {
        let k = k as u64;
        let gram = match release_gram(spec, &data.aux, cfg.delta, &mut stream(&key(purpose::TRANSFORM, k))) {
            Ok(g) => g,
            Err(_) => continue,
        };
        let Ok(target) = gram_target(&gram, &columns, cfg.second_moments) else {
            continue;
        };
        if let Ok((est, failed)) = acw_with_ci(cfg, rct, &target, &key(purpose::BOOTSTRAP, k)) {
            out.estimates[2 + k as usize] = Some(est);
            out.bootstrap_failed += failed;
        }
    }
    out
}

/// Replicates the generalization study: selection into the RCT shifts the
/// covariate distribution away from the population, and ACW against each
/// auxiliary release is compared with RCT-only estimators.
pub fn run_generalization_study(cfg: &GeneralizationConfig) -> Result<StudyResults> {
    cfg.validate()?;
    let coefs = generalization_coefficients(cfg);
    let outcomes: Vec<RepOutcome> = (0..cfg.reps as u64)
        .into_par_iter()
        .map(|rep| run_rep(cfg, &coefs, rep))
        .collect();

    let mut labels = vec![
        (EstimatorId::DiffInMeans, NO_TRANSFORM.to_string()),
        (EstimatorId::RegressionAdjusted, NO_TRANSFORM.to_string()),
    ];
    labels.extend(cfg.transforms.iter().map(|t: &TransformSpec| (EstimatorId::Acw, t.to_string())));

    let rows = labels
        .into_iter()
        .enumerate()
        .map(|(k, (est, transform))| {
            let mut row = ResultRow::empty(Study::Generalization, cfg.p, est, transform);
            let ok: Vec<Estimate> = outcomes.iter().filter_map(|o| o.estimates[k]).collect();
            row.failures = cfg.reps - ok.len();
            let taus: Vec<f64> = ok.iter().map(|e| e.tau).collect();
            if let Ok(d) = mse_decompose(&taus, PATE) {
                row.mse = Some(d.mse);
                row.bias2 = Some(d.bias2);
                row.variance = Some(d.variance);
            }
            let cis: Vec<(f64, f64)> = ok.iter().filter_map(|e| e.ci).collect();
            if !cis.is_empty() {
                let hits = cis.iter().filter(|(lo, hi)| *lo <= PATE && PATE <= *hi).count();
                row.coverage = Some(hits as f64 / cis.len() as f64);
            }
            row
        })
        .collect();

    let sates: Vec<f64> = outcomes.iter().filter_map(|o| o.sate).collect();
    let generated = sates.len().max(1) as f64;
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("mean_sate".into(), sates.iter().sum::<f64>() / generated);
    diagnostics.insert(
        "mean_n".into(),
        outcomes.iter().filter(|o| o.sate.is_some()).map(|o| o.n as f64).sum::<f64>() / generated,
    );
    diagnostics.insert("redraws".into(), outcomes.iter().map(|o| o.redraws as f64).sum());
    diagnostics.insert("failed_reps".into(), (cfg.reps - sates.len()) as f64);
    diagnostics.insert(
        "bootstrap_failed_replicates".into(),
        outcomes.iter().map(|o| o.bootstrap_failed as f64).sum(),
    );
    Ok(StudyResults { study: Study::Generalization, p: cfg.p, units: cfg.reps, rows, diagnostics })
}
