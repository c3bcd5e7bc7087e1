use rand::Rng;

use super::config::TransformSpec;
use crate::error::Result;
use crate::model::{compute_gram, DataMatrix, GramMatrix};
use crate::privacy::{dp_gram_transform, en_transform, NoiseSpec, PrivacyBudget};
use crate::synthesis::synthetic_gram;

/// Releases the auxiliary data as a gram matrix under `spec`.
pub fn release_gram<R: Rng + ?Sized>(spec: &TransformSpec, aux: &DataMatrix, delta: f64, rng: &mut R) -> Result<GramMatrix> {
    match *spec {
        TransformSpec::Gram => Ok(compute_gram(aux)),
        TransformSpec::EntryNoise { lambda } => en_transform(aux, &NoiseSpec::Uniform(lambda), rng),
        TransformSpec::Dp { epsilon } => {
            let budget = PrivacyBudget::new(epsilon, delta)?;
            Ok(dp_gram_transform(aux, budget, rng)?.0)
        }
        TransformSpec::Synthetic => synthetic_gram(aux, aux.m(), rng),
    }
}
