//! JSON file form of a released gram matrix.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use privshift::{GramMatrix, Provenance};

use crate::error::{CliError, CliResult};
use crate::io::{read_to_string, write_atomic};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "gram")]
    Gram,
    #[serde(rename = "en")]
    EntryNoise,
    #[serde(rename = "dp")]
    Dp,
    #[serde(rename = "synth-derived")]
    SynthDerived,
}

impl From<Provenance> for Method {
    fn from(p: Provenance) -> Self {
        match p {
            Provenance::Exact => Method::Gram,
            Provenance::EntryNoise => Method::EntryNoise,
            Provenance::Dp => Method::Dp,
            Provenance::SyntheticDerived => Method::SynthDerived,
        }
    }
}

impl From<Method> for Provenance {
    fn from(m: Method) -> Self {
        match m {
            Method::Gram => Provenance::Exact,
            Method::EntryNoise => Provenance::EntryNoise,
            Method::Dp => Provenance::Dp,
            Method::SynthDerived => Provenance::SyntheticDerived,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformInfo {
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramArtifact {
    pub schema_version: u32,
    pub m: usize,
    pub p: usize,
    /// Gram column names, intercept first.
    pub column_names: Vec<String>,
    /// Gram index of the outcome column.
    pub outcome_index: usize,
    /// Full `(p+2) x (p+2)` matrix, row-major.
    pub matrix: Vec<f64>,
    pub transform: TransformInfo,
    pub seed: u64,
    pub created_utc: String,
}

impl GramArtifact {
    pub fn from_gram(g: &GramMatrix, transform: TransformInfo, seed: u64) -> Self {
        let k = g.p() + 2;
        let e = g.entries();
        Self {
            schema_version: SCHEMA_VERSION,
            m: g.m(),
            p: g.p(),
            column_names: g.column_names().to_vec(),
            outcome_index: 1,
            matrix: (0..k).flat_map(|i| (0..k).map(move |j| e[(i, j)])).collect(),
            transform,
            seed,
            created_utc: created_utc(),
        }
    }

    /// Checks the schema and rebuilds the matrix.
    pub fn to_gram(&self) -> CliResult<GramMatrix> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported artifact schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let k = self.p + 2;
        if self.matrix.len() != k * k {
            return Err(CliError::Config(format!(
                "artifact matrix has {} entries, expected (p+2)^2 = {}",
                self.matrix.len(),
                k * k
            )));
        }
        if self.outcome_index != 1 {
            return Err(CliError::Config(format!("artifact outcome_index must be 1, got {}", self.outcome_index)));
        }
        let entries = DMatrix::from_row_slice(k, k, &self.matrix);
        Ok(GramMatrix::new(entries, self.m, self.transform.method.into(), self.column_names.clone())?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("artifact serializes");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        write_atomic(path, self.to_json().as_bytes())
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Timestamp from `SOURCE_DATE_EPOCH`, or the Unix epoch when it is unset, so
/// that equal inputs give byte-identical artifacts.
pub fn created_utc() -> String {
    let secs = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .unwrap_or(0);
    chrono::DateTime::from_timestamp(secs, 0)
        .unwrap_or_default()
        .to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use privshift::{compute_gram, DataMatrix};

    fn gram() -> GramMatrix {
        let y = DVector::from_vec(vec![0.1, 1.7, -0.3, 2.2]);
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.5, 2.0, -1.0, 0.3, 0.3, 1.0 / 3.0, 7.0]);
        compute_gram(&DataMatrix::from_unnamed(&y, &x).unwrap())
    }

    #[test]
    fn json_round_trip_is_bitwise() {
        let g = gram();
        let info = TransformInfo { method: Method::Dp, epsilon: Some(3.0), delta: Some(1e-5), lambda: None };
        let a = GramArtifact::from_gram(&g, info, 42);
        let back: GramArtifact = serde_json::from_str(&a.to_json()).unwrap();
        assert_eq!(back, a);
        let g2 = back.to_gram().unwrap();
        for (u, v) in g.entries().iter().zip(g2.entries().iter()) {
            assert_eq!(u.to_bits(), v.to_bits());
        }
        assert_eq!(g2.provenance(), Provenance::Dp);
        assert!(!a.to_json().contains("lambda"));
    }

    #[test]
    fn asymmetric_or_short_matrices_are_rejected() {
        let info = TransformInfo { method: Method::Gram, epsilon: None, delta: None, lambda: None };
        let mut a = GramArtifact::from_gram(&gram(), info, 0);
        a.matrix[1] += 1e-12;
        assert!(matches!(a.to_gram(), Err(CliError::Config(_))));
        a.matrix.pop();
        assert!(matches!(a.to_gram(), Err(CliError::Config(_))));
    }
}
