use rand::Rng;
use rayon::prelude::*;

use super::sample::{mean_var, z_two_sided, RctSample};
use crate::error::{Error, Result};
use crate::rng::stream;

/// Normal-approximation bootstrap interval.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapCi {
    pub ci_low: f64,
    pub ci_high: f64,
    pub point: f64,
    pub se: f64,
    pub succeeded: usize,
    pub failed: usize,
}

/// Resamples RCT rows `b` times and recomputes `estimator` on each resample.
///
/// Replicates where the estimator errors (for example an infeasible
/// calibration or an empty arm) are dropped and counted. Each replicate has its
/// own stream keyed by a seed drawn from `rng`, so the result does not depend
/// on thread scheduling.
pub fn bootstrap_ci<F, R>(estimator: F, s: &RctSample, b: usize, level: f64, rng: &mut R) -> Result<BootstrapCi>
where
    F: Fn(&RctSample) -> Result<f64> + Sync,
    R: Rng + ?Sized,
{
    if b < 2 {
        return Err(Error::InvalidConfig(format!("bootstrap needs at least 2 replicates, got {b}")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidConfig(format!("confidence level must lie in (0, 1), got {level}")));
    }
    let point = estimator(s)?;
    let base: u64 = rng.random();
    let n = s.n();
    let draws: Vec<Option<f64>> = (0..b)
        .into_par_iter()
        .map(|rep| {
            let mut r = stream(&[base, rep as u64]);
            let idx: Vec<usize> = (0..n).map(|_| r.random_range(0..n)).collect();
            s.resample(&idx).and_then(|bs| estimator(&bs)).ok().filter(|v| v.is_finite())
        })
        .collect();
    let ok: Vec<f64> = draws.iter().flatten().copied().collect();
    let failed = b - ok.len();
    if ok.len() < 2 {
        return Err(Error::AllReplicatesFailed { failed, requested: b });
    }
    let (_, var) = mean_var(&ok);
    let se = var.sqrt();
    let half = z_two_sided(level) * se;
    Ok(BootstrapCi { ci_low: point - half, ci_high: point + half, point, se, succeeded: ok.len(), failed })
}
