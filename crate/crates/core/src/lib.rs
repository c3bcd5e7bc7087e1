//! Treatment-effect estimation that borrows strength from auxiliary data
//! released only through privacy-preserving summaries.
//!
//! The auxiliary study is reduced to a gram matrix (or a noisy, differentially
//! private, or synthetic-data stand-in for one). Estimators combine that
//! summary with randomized-trial rows to generalize an effect to the auxiliary
//! population or to sharpen its precision.

pub mod error;
mod linalg;
pub mod model;
pub mod privacy;
pub mod rng;
pub mod synthesis;
pub mod estimators;
pub mod simulation;

pub use error::{Error, Result};
pub use model::{
    compute_gram, ols_from_gram, partition_gram, predict, reconstruct_gram, DataMatrix, GramMatrix,
    LinearModel, MomentSummary, Provenance,
};
pub use estimators::{EstimateResult, EstimatorId, RctSample};
