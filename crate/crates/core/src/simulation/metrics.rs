use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MseDecomposition {
    pub mse: f64,
    pub bias2: f64,
    pub variance: f64,
}

/// Mean squared error against `truth`, split into squared bias and the
/// (population) variance, which is defined as the difference.
pub fn mse_decompose(estimates: &[f64], truth: f64) -> Result<MseDecomposition> {
    if estimates.is_empty() {
        return Err(Error::InvalidData("no estimates to summarize".into()));
    }
    let n = estimates.len() as f64;
    let mse = estimates.iter().map(|e| (e - truth) * (e - truth)).sum::<f64>() / n;
    let mean = estimates.iter().sum::<f64>() / n;
    let bias2 = (mean - truth) * (mean - truth);
    Ok(MseDecomposition { mse, bias2, variance: mse - bias2 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_examples() {
        assert_eq!(mse_decompose(&[1.0, 1.0], 1.0).unwrap(), MseDecomposition { mse: 0.0, bias2: 0.0, variance: 0.0 });
        let d = mse_decompose(&[1.5, 1.5, 1.5], 1.0).unwrap();
        assert_eq!((d.mse, d.bias2, d.variance), (0.25, 0.25, 0.0));
        let d = mse_decompose(&[0.0, 2.0], 1.0).unwrap();
        assert_eq!((d.mse, d.bias2, d.variance), (1.0, 0.0, 1.0));
        assert!(mse_decompose(&[], 0.0).is_err());
    }
}
