//! Differential privacy and entry-wise noise for auxiliary data.

mod budget;
mod mechanism;
mod sensitivity;
mod transform;

pub use budget::{
    allocate_budget, mean_label, variance_label, Allocation, BudgetLedger, Fraction, PrivacyBudget,
    CORRELATION_LABEL,
};
pub use mechanism::{gaussian_gamma, gaussian_mechanism};
pub use sensitivity::{loo_sensitivities, loo_sensitivity, LooSensitivities, StatBlock};
pub use transform::{dp_gram_transform, dp_gram_transform_with, en_transform, DpGramOptions, DpRelease, NoiseSpec, VARIANCE_FLOOR};
