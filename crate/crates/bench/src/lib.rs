//! Shared fixtures for the benchmarks.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use privshift::{DataMatrix, RctSample};

/// `m` rows of `p` standard-normal covariates and a linear outcome.
pub fn aux_data(m: usize, p: usize, seed: u64) -> DataMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(m, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let scale = (0.7 / p as f64).sqrt();
    let y = DVector::from_fn(m, |i, _| 0.5 + scale * x.row(i).sum() + 0.3f64.sqrt() * rng.sample::<f64, _>(StandardNormal));
    DataMatrix::from_unnamed(&y, &x).expect("valid fixture")
}

/// A balanced-in-expectation trial with `p` covariates and effect 0.5.
pub fn rct(n: usize, p: usize, seed: u64) -> RctSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut t: Vec<bool> = (0..n).map(|_| rng.random()).collect();
    t[0] = true;
    t[1] = false;
    let scale = (0.7 / p as f64).sqrt();
    let y = DVector::from_fn(n, |i, _| {
        scale * x.row(i).sum() + if t[i] { 0.5 } else { 0.0 } + 0.3f64.sqrt() * rng.sample::<f64, _>(StandardNormal)
    });
    RctSample::new(y, t, x, 0.5).expect("valid fixture")
}
