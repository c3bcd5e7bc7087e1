//! Privacy budgets and exact composition accounting.
//!
//! Shares are kept as rational fractions of the total budget so that the
//! spent totals are exact sums, independent of floating-point order.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Fraction = Ratio<u64>;

/// An `(epsilon, delta)` differential-privacy budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    epsilon: f64,
    delta: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::InvalidBudget(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidBudget(format!("delta must lie in (0, 1), got {delta}")));
        }
        Ok(Self { epsilon, delta })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// The budget scaled by `fraction`. A fraction of one returns the budget
    /// unchanged, bit for bit.
    pub fn share(&self, fraction: Fraction) -> Self {
        Self {
            epsilon: scale(self.epsilon, fraction),
            delta: scale(self.delta, fraction),
        }
    }
}

fn scale(x: f64, f: Fraction) -> f64 {
    if *f.numer() == *f.denom() {
        x
    } else {
        x * (*f.numer() as f64) / (*f.denom() as f64)
    }
}

/// One statistic's slice of the budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub label: String,
    pub fraction: Fraction,
    pub spent: bool,
}

impl Allocation {
    pub fn epsilon(&self, total: &PrivacyBudget) -> f64 {
        scale(total.epsilon, self.fraction)
    }

    pub fn delta(&self, total: &PrivacyBudget) -> f64 {
        scale(total.delta, self.fraction)
    }
}

/// Tracks how a total budget is divided among released statistics and how
/// much of it has been spent. A ledger belongs to one release; parallel
/// workers each own their own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetLedger {
    total: PrivacyBudget,
    allocations: Vec<Allocation>,
    reserved: Fraction,
    spent: Fraction,
}

impl BudgetLedger {
    pub fn new(total: PrivacyBudget) -> Self {
        Self {
            total,
            allocations: Vec::new(),
            reserved: Fraction::from_integer(0),
            spent: Fraction::from_integer(0),
        }
    }

    pub fn total(&self) -> PrivacyBudget {
        self.total
    }

    pub fn allocations(&self) -> &[Allocation] {
        &self.allocations
    }

    /// Plans a share for `label` without spending it.
    pub fn reserve(&mut self, label: impl Into<String>, fraction: Fraction) -> Result<()> {
        let label = label.into();
        if *fraction.numer() == 0 {
            return Err(Error::InvalidBudget(format!("empty share for `{label}`")));
        }
        if self.allocations.iter().any(|a| a.label == label) {
            return Err(Error::InvalidBudget(format!("`{label}` is already allocated")));
        }
        let reserved = self.reserved + fraction;
        if reserved > Fraction::from_integer(1) {
            return Err(Error::BudgetExceeded(format!(
                "allocating {fraction} to `{label}` would reserve {reserved} of the budget"
            )));
        }
        self.reserved = reserved;
        self.allocations.push(Allocation {
            label,
            fraction,
            spent: false,
        });
        Ok(())
    }

    /// Marks a reserved share as spent and returns it.
    pub fn charge(&mut self, label: &str) -> Result<PrivacyBudget> {
        let total = self.total;
        let alloc = self
            .allocations
            .iter_mut()
            .find(|a| a.label == label)
            .ok_or_else(|| Error::InvalidBudget(format!("no allocation named `{label}`")))?;
        if alloc.spent {
            return Err(Error::BudgetExceeded(format!("`{label}` was already spent")));
        }
        alloc.spent = true;
        self.spent += alloc.fraction;
        Ok(total.share(alloc.fraction))
    }

    /// Reserves and immediately charges a share.
    pub fn spend(&mut self, label: impl Into<String>, fraction: Fraction) -> Result<PrivacyBudget> {
        let label = label.into();
        self.reserve(label.clone(), fraction)?;
        self.charge(&label)
    }

    pub fn spent_fraction(&self) -> Fraction {
        self.spent
    }

    pub fn reserved_fraction(&self) -> Fraction {
        self.reserved
    }

    pub fn spent_epsilon(&self) -> f64 {
        scale(self.total.epsilon, self.spent)
    }

    pub fn spent_delta(&self) -> f64 {
        scale(self.total.delta, self.spent)
    }
}

/// Label of the mean of data column `j` (0 is the outcome).
pub fn mean_label(j: usize) -> String {
    format!("mean[{j}]")
}

/// Label of the variance of data column `j`.
pub fn variance_label(j: usize) -> String {
    format!("variance[{j}]")
}

pub const CORRELATION_LABEL: &str = "correlation";

/// Splits a budget across the moments of `p + 1` data columns in proportion
/// to the number of released elements.
///
/// With `D = p^2 + 5p + 4`, the means and the variances each receive
/// `2(p+1)/D`, spread evenly so every element gets `2/D`, and the `p(p+1)/2`
/// off-diagonal correlations receive the remaining `(p^2+p)/D` as one vector.
pub fn allocate_budget(total: PrivacyBudget, p: usize) -> Result<BudgetLedger> {
    if p == 0 {
        return Err(Error::InvalidConfig("need at least one covariate".into()));
    }
    let p = p as u64;
    let denom = p * p + 5 * p + 4;
    let element = Fraction::new(2, denom);
    let mut ledger = BudgetLedger::new(total);
    for j in 0..=p as usize {
        ledger.reserve(mean_label(j), element)?;
    }
    for j in 0..=p as usize {
        ledger.reserve(variance_label(j), element)?;
    }
    ledger.reserve(CORRELATION_LABEL, Fraction::new(p * p + p, denom))?;
    debug_assert_eq!(ledger.reserved, Fraction::from_integer(1));
    Ok(ledger)
}
