//! The Gaussian mechanism.

use rand::Rng;
use rand_distr::StandardNormal;

use super::budget::{BudgetLedger, PrivacyBudget};
use crate::error::{Error, Result};

/// Noise standard deviation `sensitivity * sqrt(2 ln(1.25 / delta)) / epsilon`
/// that makes the Gaussian mechanism `(epsilon, delta)`-private.
pub fn gaussian_gamma(sensitivity: f64, budget: &PrivacyBudget) -> Result<f64> {
    if !(sensitivity.is_finite() && sensitivity >= 0.0) {
        return Err(Error::InvalidData(format!(
            "sensitivity must be finite and nonnegative, got {sensitivity}"
        )));
    }
    if budget.delta() >= 1.25 {
        return Err(Error::InvalidBudget(format!(
            "delta {} leaves ln(1.25/delta) nonpositive",
            budget.delta()
        )));
    }
    if sensitivity == 0.0 {
        return Ok(0.0);
    }
    Ok(sensitivity * (2.0 * (1.25 / budget.delta()).ln()).sqrt() / budget.epsilon())
}

/// Adds independent `N(0, gamma^2)` noise to every coordinate of `stat`.
/// `sensitivity` is the L2 sensitivity of the whole vector.
pub fn gaussian_mechanism<R: Rng + ?Sized>(
    stat: &[f64],
    sensitivity: f64,
    budget: &PrivacyBudget,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let gamma = gaussian_gamma(sensitivity, budget)?;
    if gamma == 0.0 {
        return Ok(stat.to_vec());
    }
    Ok(stat
        .iter()
        .map(|&x| {
            let z: f64 = rng.sample(StandardNormal);
            x + gamma * z
        })
        .collect())
}

impl BudgetLedger {
    /// Charges the allocation `label` and releases `stat` through the
    /// Gaussian mechanism with that share of the budget.
    pub fn release<R: Rng + ?Sized>(
        &mut self,
        label: &str,
        stat: &[f64],
        sensitivity: f64,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        // Validate before charging so a bad sensitivity does not burn budget.
        gaussian_gamma(sensitivity, &self.total())?;
        let share = self.charge(label)?;
        gaussian_mechanism(stat, sensitivity, &share, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn budget(eps: f64) -> PrivacyBudget {
        PrivacyBudget::new(eps, 1e-5).unwrap()
    }

    #[test]
    fn gamma_reference_value() {
        // sqrt(2 ln 125000) = 4.8448052626...
        let g = gaussian_gamma(1.0, &budget(1.0)).unwrap();
        assert!((g - 4.844_805_262_6).abs() < 1e-9, "{g}");
    }

    #[test]
    fn gamma_zero_and_inverse_epsilon() {
        assert_eq!(gaussian_gamma(0.0, &budget(1.0)).unwrap(), 0.0);
        let g1 = gaussian_gamma(1.0, &budget(1.0)).unwrap();
        let g2 = gaussian_gamma(1.0, &budget(2.0)).unwrap();
        assert_eq!(g2, g1 / 2.0);
        assert!(gaussian_gamma(-1.0, &budget(1.0)).is_err());
    }

    #[test]
    fn gamma_monotonicity() {
        let b = |e, d| PrivacyBudget::new(e, d).unwrap();
        assert!(gaussian_gamma(1.0, &b(1.0, 1e-5)).unwrap() > gaussian_gamma(1.0, &b(1.5, 1e-5)).unwrap());
        assert!(gaussian_gamma(2.0, &b(1.0, 1e-5)).unwrap() > gaussian_gamma(1.0, &b(1.0, 1e-5)).unwrap());
        assert!(gaussian_gamma(1.0, &b(1.0, 1e-6)).unwrap() > gaussian_gamma(1.0, &b(1.0, 1e-5)).unwrap());
    }

    #[test]
    fn zero_noise_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let stat = [1.5, -2.0, 0.25];
        assert_eq!(gaussian_mechanism(&stat, 0.0, &budget(1.0), &mut rng).unwrap(), stat);
    }

    #[test]
    fn seeds_control_the_noise() {
        let stat = [0.0; 4];
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            gaussian_mechanism(&stat, 1.0, &budget(1.0), &mut rng).unwrap()
        };
        assert_eq!(run(7), run(7));
        assert_ne!(run(7), run(8));
    }

    #[test]
    fn release_charges_the_ledger() {
        let mut ledger = BudgetLedger::new(budget(1.0));
        ledger.reserve("x", super::super::budget::Fraction::new(1, 2)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(ledger.release("x", &[0.0], -1.0, &mut rng).is_err());
        assert_eq!(ledger.spent_epsilon(), 0.0);
        ledger.release("x", &[0.0], 1.0, &mut rng).unwrap();
        assert_eq!(ledger.spent_epsilon(), 0.5);
    }
}
