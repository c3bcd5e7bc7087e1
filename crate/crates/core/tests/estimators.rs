use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use privshift::estimators::{
    calibration_weights, cw_estimate, diff_in_means, fipw_estimate, ipw_estimate, loop_estimate,
    regression_adjusted, RctSample,
};

/// All treatment vectors of length `n` with exactly `k` treated units.
fn assignments(n: usize, k: Option<usize>) -> Vec<Vec<bool>> {
    (0u32..1 << n)
        .filter(|mask| k.is_none_or(|k| mask.count_ones() as usize == k))
        .map(|mask| (0..n).map(|i| mask >> i & 1 == 1).collect())
        .filter(|t: &Vec<bool>| t.iter().any(|&x| x) && t.iter().any(|&x| !x))
        .collect()
}

fn observed(yt: &[f64], yc: &[f64], t: &[bool]) -> DVector<f64> {
    DVector::from_fn(t.len(), |i, _| if t[i] { yt[i] } else { yc[i] })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn balanced_enumeration_is_unbiased(half in 2usize..=4, seed in any::<u64>()) {
        let n = 2 * half;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let yc: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let yt: Vec<f64> = yc.iter().map(|y| y + 1.0 + rng.sample::<f64, _>(StandardNormal)).collect();
        let f: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let sate = (0..n).map(|i| yt[i] - yc[i]).sum::<f64>() / n as f64;
        let x = DMatrix::zeros(n, 1);
        let all = assignments(n, Some(half));
        let (mut dm, mut ipw, mut fipw) = (0.0, 0.0, 0.0);
        for t in &all {
            let s = RctSample::new(observed(&yt, &yc, t), t.clone(), x.clone(), 0.5).unwrap();
            dm += diff_in_means(&s).unwrap().tau_hat;
            ipw += ipw_estimate(&s).unwrap().tau_hat;
            fipw += fipw_estimate(&s, &DVector::from_column_slice(&f)).unwrap().tau_hat;
        }
        let k = all.len() as f64;
        prop_assert!((dm / k - sate).abs() < 1e-12);
        prop_assert!((ipw / k - sate).abs() < 1e-12);
        prop_assert!((fipw / k - sate).abs() < 1e-12);
    }

    #[test]
    fn regression_without_covariates_is_difference_in_means(n in 4usize..40, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t: Vec<bool> = (0..n).map(|_| rng.random()).collect();
        t[0] = true;
        t[1] = false;
        let y = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let s = RctSample::new(y, t, DMatrix::zeros(n, 1), 0.5).unwrap();
        let a = regression_adjusted(&s, &DMatrix::zeros(n, 0)).unwrap().tau_hat;
        let b = diff_in_means(&s).unwrap().tau_hat;
        prop_assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn ipw_and_uniform_cw_equal_dm_when_balanced(half in 2usize..20, seed in any::<u64>()) {
        let n = 2 * half;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t: Vec<bool> = (0..n).map(|i| i < half).collect();
        let y = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x = DMatrix::from_fn(n, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let s = RctSample::new(y, t, x.clone(), 0.5).unwrap();
        let dm = diff_in_means(&s).unwrap().tau_hat;
        prop_assert!((ipw_estimate(&s).unwrap().tau_hat - dm).abs() < 1e-12);
        let w = calibration_weights(&x, &x.row_mean().transpose()).unwrap();
        for wi in w.w.iter() {
            prop_assert!((wi - 1.0 / n as f64).abs() < 1e-10);
        }
        prop_assert!((cw_estimate(&s, &w).unwrap().tau_hat - dm).abs() < 1e-10);
    }

    #[test]
    fn loop_ignores_constant_shifts_of_the_prediction(seed in any::<u64>(), shift in -50.0f64..50.0) {
        let n = 40;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let t: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();
        let pred = DVector::from_fn(n, |i, _| x[(i, 0)] + 0.5 * rng.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(n, |i, _| x[(i, 0)] - x[(i, 2)] + if t[i] { 0.5 } else { 0.0 } + rng.sample::<f64, _>(StandardNormal));
        let s = RctSample::new(y, t, x, 0.5).unwrap();
        let a = loop_estimate(&s, &pred, 3).unwrap();
        let b = loop_estimate(&s, &pred.add_scalar(shift), 3).unwrap();
        prop_assert_eq!(a.diagnostics["alpha"], b.diagnostics["alpha"]);
        prop_assert!((a.tau_hat - b.tau_hat).abs() < 1e-10);
    }
}

#[test]
fn fipw_with_the_mixed_potential_outcome_is_exact() {
    let n = 6;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let yc: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let yt: Vec<f64> = yc.iter().map(|y| y + rng.sample::<f64, _>(StandardNormal)).collect();
    let pi = 0.5;
    let m = DVector::from_fn(n, |i, _| pi * yt[i] + (1.0 - pi) * yc[i]);
    let sate = (0..n).map(|i| yt[i] - yc[i]).sum::<f64>() / n as f64;
    let all = assignments(n, None);
    assert_eq!(all.len(), 62);
    for t in &all {
        let s = RctSample::new(observed(&yt, &yc, t), t.clone(), DMatrix::zeros(n, 1), pi).unwrap();
        let tau = fipw_estimate(&s, &m).unwrap().tau_hat;
        assert!((tau - sate).abs() < 1e-12, "{t:?}: {tau} vs {sate}");
    }
}

#[test]
fn balanced_enumeration_of_four_units() {
    let all = assignments(4, Some(2));
    assert_eq!(all.len(), 6);
    let mean: f64 = all
        .iter()
        .map(|t| {
            let s = RctSample::new(observed(&[1.0; 4], &[0.0; 4], t), t.clone(), DMatrix::zeros(4, 1), 0.5).unwrap();
            diff_in_means(&s).unwrap().tau_hat
        })
        .sum::<f64>()
        / 6.0;
    assert_eq!(mean, 1.0);
}

#[test]
fn oracle_prediction_drives_loop_variance_to_zero() {
    // Noiseless outcomes: the prediction equals the control outcome up to an
    // affine map, and the effect is constant.
    let n = 60;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = DMatrix::from_fn(n, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
    let yc = DVector::from_fn(n, |i, _| 1.0 + 2.0 * x[(i, 0)] - x[(i, 1)]);
    let pred = yc.map(|v| 3.0 * v - 7.0);
    let mut vars = Vec::new();
    for rep in 0..20 {
        let mut r = ChaCha8Rng::seed_from_u64(100 + rep);
        let mut t: Vec<bool> = (0..n).map(|_| r.random()).collect();
        t[0] = true;
        t[1] = false;
        let y = DVector::from_fn(n, |i, _| yc[i] + if t[i] { 0.5 } else { 0.0 });
        let s = RctSample::new(y, t, DMatrix::zeros(n, 1), 0.5).unwrap();
        let r = loop_estimate(&s, &pred, 0).unwrap();
        assert!((r.tau_hat - 0.5).abs() < 1e-8);
        vars.push(r.variance_hat.unwrap());
    }
    assert!(vars.iter().all(|v| *v < 1e-12));
}
