//! Treatment-effect estimators for a randomized sample, optionally using
//! auxiliary summaries.

mod basic;
mod bootstrap;
mod calibration;
mod loop_est;
mod ols;
mod sample;

pub use basic::{diff_in_means, fipw_estimate, ipw_estimate, regression_adjusted};
pub use bootstrap::{bootstrap_ci, BootstrapCi};
pub use calibration::{
    acw_estimate, calibration_weights, cw_estimate, gram_target, moment_features, CalibrationWeights,
    CONSTRAINT_TOLERANCE, MAX_STEP_HALVINGS, NEWTON_MAX_ITERATIONS, NEWTON_TOLERANCE,
};
pub use loop_est::{loop_estimate, ALPHA_STEPS};
pub use sample::{z_two_sided, EstimateResult, EstimatorId, RctSample, DEFAULT_LEVEL};
