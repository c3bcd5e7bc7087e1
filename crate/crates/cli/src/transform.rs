use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use privshift::privacy::{dp_gram_transform_with, en_transform, DpGramOptions, NoiseSpec, PrivacyBudget};
use privshift::rng::stream;
use privshift::simulation::DEFAULT_DELTA;
use privshift::synthesis::{fit_sequential, synthesize};
use privshift::{compute_gram, DataMatrix, GramMatrix, Provenance};

use crate::artifact::{GramArtifact, Method, TransformInfo};
use crate::error::{CliError, CliResult};
use crate::io::{fmt_f64, read_numeric_csv, write_atomic, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransformMethod {
    Gram,
    EnGram,
    DpGram,
    Synth,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TransformArgs {
    /// Confidential data: headed numeric CSV without an intercept column.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub method: TransformMethod,
    /// Outcome column name.
    #[arg(long)]
    pub outcome: String,
    /// Privacy budget for dp-gram.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    pub delta: f64,
    /// Entry-noise variance for en-gram (default: each column's variance).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Synthetic row count for synth (default: input row count).
    #[arg(long)]
    pub rows: Option<usize>,
    /// Clip negative eigenvalues of a dp-gram release.
    #[arg(long)]
    pub psd_repair: bool,
    #[arg(long, env = "PRIVSHIFT_SEED")]
    pub seed: Option<u64>,
    /// Artifact path, or CSV path for synth (a `.json` path gets the gram of
    /// the synthetic rows instead).
    #[arg(long)]
    pub output: PathBuf,
}

/// Data matrix with `outcome` first and the remaining columns in file order.
pub fn data_matrix(t: &Table, outcome: &str) -> CliResult<DataMatrix> {
    if let Some(h) = t.header.iter().find(|h| {
        let h = h.to_ascii_lowercase();
        h == "intercept" || h == "(intercept)"
    }) {
        return Err(CliError::Config(format!("column `{h}`: the intercept is implicit and must not be in the file")));
    }
    let y = t.column_index(outcome)?;
    let cols: Vec<usize> = (0..t.header.len()).filter(|&j| j != y).collect();
    if cols.is_empty() {
        return Err(CliError::Config("need at least one covariate column".into()));
    }
    let names: Vec<String> = cols.iter().map(|&j| t.header[j].clone()).collect();
    let yv = nalgebra::DVector::from_vec(t.column(y));
    Ok(DataMatrix::from_parts(&yv, &t.select(&cols), outcome, &names)?)
}

pub fn run(a: &TransformArgs) -> CliResult<()> {
    let seed = a.seed.unwrap_or(0);
    let table = read_numeric_csv(&a.input)?;
    let d = data_matrix(&table, &a.outcome)?;
    let mut rng = stream(&[seed]);
    let info = |method, epsilon, delta, lambda| TransformInfo { method, epsilon, delta, lambda };
    match a.method {
        TransformMethod::Gram => {
            reject_flag(a.epsilon.is_some(), "--epsilon", "gram")?;
            GramArtifact::from_gram(&compute_gram(&d), info(Method::Gram, None, None, None), seed).write(&a.output)
        }
        TransformMethod::EnGram => {
            reject_flag(a.epsilon.is_some(), "--epsilon", "en-gram")?;
            let noise = match a.lambda {
                Some(l) => NoiseSpec::Uniform(l),
                None => NoiseSpec::ColumnVariance,
            };
            let g = en_transform(&d, &noise, &mut rng)?;
            GramArtifact::from_gram(&g, info(Method::EntryNoise, None, None, a.lambda), seed).write(&a.output)
        }
        TransformMethod::DpGram => {
            let epsilon = a.epsilon.ok_or_else(|| CliError::Config("dp-gram needs --epsilon".into()))?;
            let budget = PrivacyBudget::new(epsilon, a.delta)?;
            let release = dp_gram_transform_with(&d, budget, DpGramOptions { psd_repair: a.psd_repair }, &mut rng)?;
            print_ledger(&release.ledger);
            let info = info(Method::Dp, Some(epsilon), Some(a.delta), None);
            GramArtifact::from_gram(&release.gram, info, seed).write(&a.output)
        }
        TransformMethod::Synth => {
            let rows = a.rows.unwrap_or(d.m());
            let s = fit_sequential(&d, None)?;
            let syn = synthesize(&s, rows, &mut rng)?;
            if a.output.extension().is_some_and(|e| e == "json") {
                let exact = compute_gram(&syn);
                let g = GramMatrix::new(exact.entries().clone(), exact.m(), Provenance::SyntheticDerived, exact.column_names().to_vec())?;
                GramArtifact::from_gram(&g, info(Method::SynthDerived, None, None, None), seed).write(&a.output)
            } else {
                write_atomic(&a.output, data_csv(&syn).as_bytes())
            }
        }
    }
}

fn reject_flag(given: bool, flag: &str, method: &str) -> CliResult<()> {
    if given {
        return Err(CliError::Config(format!("{flag} does not apply to --method {method}")));
    }
    Ok(())
}

fn data_csv(d: &DataMatrix) -> String {
    let mut out = d.column_names()[1..].join(",");
    out.push('\n');
    for row in d.values().row_iter() {
        let cells: Vec<String> = row.iter().skip(1).map(|v| fmt_f64(*v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn print_ledger(ledger: &privshift::privacy::BudgetLedger) {
    let total = ledger.total();
    println!("{:<16} {:>12} {:>14} {:>14}", "statistic", "fraction", "epsilon", "delta");
    for a in ledger.allocations() {
        println!(
            "{:<16} {:>12} {:>14.6e} {:>14.6e}",
            a.label,
            a.fraction.to_string(),
            a.epsilon(&total),
            a.delta(&total)
        );
    }
    println!("{:<16} {:>12} {:>14.6e} {:>14.6e}", "total", "1", ledger.spent_epsilon(), ledger.spent_delta());
}
