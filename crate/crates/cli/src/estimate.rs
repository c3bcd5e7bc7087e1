use std::path::{Path, PathBuf};

use clap::Args;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use privshift::estimators::{
    acw_estimate, bootstrap_ci, calibration_weights, cw_estimate, diff_in_means, fipw_estimate, gram_target,
    ipw_estimate, loop_estimate, moment_features, regression_adjusted, DEFAULT_LEVEL,
};
use privshift::rng::stream;
use privshift::{compute_gram, ols_from_gram, EstimateResult, EstimatorId, GramMatrix, RctSample};

use crate::artifact::GramArtifact;
use crate::error::{CliError, CliResult};
use crate::io::{read_numeric_csv, write_atomic, Table};
use crate::manifest::{Invocation, RunManifest};
use crate::transform::data_matrix;

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EstimateArgs {
    /// RCT data: headed numeric CSV.
    #[arg(long)]
    pub rct: PathBuf,
    /// Auxiliary data: a gram artifact (`.json`) or a raw CSV.
    #[arg(long)]
    pub aux: Option<PathBuf>,
    /// dm, ols, ipw, cw, acw, fipw or loop.
    #[arg(long)]
    pub estimator: EstimatorId,
    #[arg(long)]
    pub outcome: String,
    /// Treatment indicator column (0 or 1).
    #[arg(long)]
    pub treatment: String,
    /// Comma-separated covariate columns (default: every other column).
    #[arg(long)]
    pub covariates: Option<String>,
    /// Outcome column of a raw auxiliary CSV (default: --outcome).
    #[arg(long)]
    pub aux_outcome: Option<String>,
    /// Treatment probability.
    #[arg(long, default_value_t = 0.5)]
    pub pi: f64,
    /// Bootstrap replicates for the interval (0 keeps the analytic interval).
    #[arg(long, default_value_t = 0)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = DEFAULT_LEVEL)]
    pub level: f64,
    /// Also calibrate second moments.
    #[arg(long)]
    pub second_moments: bool,
    /// RCT covariates used by the loop estimator's own model.
    #[arg(long, default_value_t = 20)]
    pub max_rct_covariates: usize,
    #[arg(long, env = "PRIVSHIFT_SEED")]
    pub seed: Option<u64>,
    /// Result JSON; the run manifest goes next to it.
    #[arg(long)]
    pub output: PathBuf,
}

struct Rct {
    sample: RctSample,
    covariate_names: Vec<String>,
}

fn load_rct(a: &EstimateArgs) -> CliResult<Rct> {
    let t = read_numeric_csv(&a.rct)?;
    let y = t.column_index(&a.outcome)?;
    let tr = t.column_index(&a.treatment)?;
    let cov: Vec<usize> = match &a.covariates {
        Some(list) => list
            .split(',')
            .map(str::trim)
            .filter(|c| !c.is_empty())
            .map(|c| t.column_index(c))
            .collect::<CliResult<_>>()?,
        None => (0..t.header.len()).filter(|&j| j != y && j != tr).collect(),
    };
    let treat = t
        .column(tr)
        .into_iter()
        .enumerate()
        .map(|(i, v)| match v {
            0.0 => Ok(false),
            1.0 => Ok(true),
            _ => Err(CliError::Config(format!("treatment value {v} in row {} is not 0 or 1", i + 1))),
        })
        .collect::<CliResult<Vec<bool>>>()?;
    let sample = RctSample::new(DVector::from_vec(t.column(y)), treat, t.select(&cov), a.pi)?;
    Ok(Rct { sample, covariate_names: cov.iter().map(|&j| t.header[j].clone()).collect() })
}

fn load_aux(a: &EstimateArgs, path: &Path) -> CliResult<GramMatrix> {
    if path.extension().is_some_and(|e| e == "json") {
        return GramArtifact::read(path)?.to_gram();
    }
    let t: Table = read_numeric_csv(path)?;
    let outcome = a.aux_outcome.as_deref().unwrap_or(&a.outcome);
    Ok(compute_gram(&data_matrix(&t, outcome)?))
}

/// Gram indices of the RCT covariates.
fn aux_columns(g: &GramMatrix, names: &[String]) -> CliResult<Vec<usize>> {
    names
        .iter()
        .map(|n| {
            g.column_index(n)
                .filter(|&i| i >= 2)
                .ok_or_else(|| CliError::Config(format!("auxiliary data has no covariate `{n}`")))
        })
        .collect()
}

type Estimator = Box<dyn Fn(&RctSample) -> privshift::Result<EstimateResult> + Sync>;

fn build(a: &EstimateArgs, rct: &Rct) -> CliResult<Estimator> {
    let needs_aux = matches!(
        a.estimator,
        EstimatorId::Cw | EstimatorId::Acw | EstimatorId::Fipw | EstimatorId::Loop
    );
    let aux = match (&a.aux, needs_aux) {
        (Some(p), true) => Some(load_aux(a, p)?),
        (None, true) => return Err(CliError::Config(format!("--estimator {} needs --aux", a.estimator))),
        (_, false) => None,
    };
    let second = a.second_moments;
    Ok(match a.estimator {
        EstimatorId::DiffInMeans => Box::new(diff_in_means),
        EstimatorId::RegressionAdjusted => Box::new(|s: &RctSample| regression_adjusted(s, s.x())),
        EstimatorId::Ipw => Box::new(ipw_estimate),
        EstimatorId::Cw | EstimatorId::Acw => {
            let g = aux.expect("loaded above");
            let cols = aux_columns(&g, &rct.covariate_names)?;
            let target = gram_target(&g, &cols, second)?;
            let aux_mu = target.rows(0, cols.len()).into_owned();
            let acw = a.estimator == EstimatorId::Acw;
            Box::new(move |s: &RctSample| {
                let w = calibration_weights(&moment_features(s.x(), second), &target)?;
                if acw {
                    acw_estimate(s, &w, &aux_mu)
                } else {
                    cw_estimate(s, &w)
                }
            })
        }
        EstimatorId::Fipw | EstimatorId::Loop => {
            let g = aux.expect("loaded above");
            let cols = aux_columns(&g, &rct.covariate_names)?;
            let model = ols_from_gram(&g, 1, &cols)?;
            let max = a.max_rct_covariates;
            let fipw = a.estimator == EstimatorId::Fipw;
            Box::new(move |s: &RctSample| {
                let pred = model.predict_rows(s.x());
                if fipw {
                    fipw_estimate(s, &pred)
                } else {
                    loop_estimate(s, &pred, max)
                }
            })
        }
    })
}

pub fn estimate(a: &EstimateArgs) -> CliResult<EstimateResult> {
    if !(a.pi > 0.0 && a.pi < 1.0) {
        return Err(CliError::Config(format!("--pi must lie in (0, 1), got {}", a.pi)));
    }
    let rct = load_rct(a)?;
    let est = build(a, &rct)?;
    let mut result = est(&rct.sample)?;
    if a.bootstrap > 0 {
        let mut rng = stream(&[a.seed.unwrap_or(0)]);
        let ci = bootstrap_ci(|s| est(s).map(|r| r.tau_hat), &rct.sample, a.bootstrap, a.level, &mut rng)?;
        result.ci_low = Some(ci.ci_low);
        result.ci_high = Some(ci.ci_high);
        result.diagnostics.insert("bootstrap_se".into(), ci.se);
        result.diagnostics.insert("bootstrap_failed".into(), ci.failed as f64);
    }
    Ok(result)
}

pub fn run(mut a: EstimateArgs) -> CliResult<()> {
    a.seed = Some(a.seed.unwrap_or(0));
    let result = estimate(&a)?;
    let mut text = serde_json::to_string_pretty(&result).expect("result serializes");
    text.push('\n');
    write_atomic(&a.output, text.as_bytes())?;
    let outputs = vec![a.output.display().to_string()];
    RunManifest::new(Invocation::Estimate(a.clone()), serde_json::Value::Null, outputs).write_beside(&a.output)
}

