//! Data-generating processes and replication harness for the two simulation
//! studies: generalizing an RCT to a shifted population, and improving the
//! precision of a sample effect with auxiliary predictions.

mod config;
mod dgp;
mod generalization;
mod metrics;
mod precision;
mod results;
mod transforms;

pub use config::{GeneralizationConfig, PrecisionConfig, TransformSpec, DEFAULT_DELTA};
pub use dgp::{
    draw_coefficients, gen_generalization_rep, gen_precision_generation, rct_covariate_columns, Coefficients,
    GeneralizationRep, PrecisionGeneration, EXPLAINED_SHARE, PATE, RESIDUAL_VARIANCE, SELECTION_INTERCEPT,
    TREATMENT_PROBABILITY,
};
pub use generalization::{generalization_coefficients, run_generalization_study};
pub use metrics::{mse_decompose, MseDecomposition};
pub use precision::{precision_coefficients, run_precision_study};
pub use results::{ResultRow, Study, StudyResults, NO_TRANSFORM};
pub use transforms::release_gram;

pub(crate) const STUDY_GENERALIZATION: u64 = 1;
pub(crate) const STUDY_PRECISION: u64 = 2;

/// Stream purposes within a replicate.
pub(crate) mod purpose {
    pub const COEFFICIENTS: u64 = 0;
    pub const DATA: u64 = 1;
    pub const TRANSFORM: u64 = 2;
    pub const ASSIGNMENT: u64 = 3;
    pub const BOOTSTRAP: u64 = 4;
}
