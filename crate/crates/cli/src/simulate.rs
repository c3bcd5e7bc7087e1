use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use privshift::simulation::{
    run_generalization_study, run_precision_study, GeneralizationConfig, PrecisionConfig, ResultRow, StudyResults,
    TransformSpec, DEFAULT_DELTA,
};

use crate::error::{CliError, CliResult};
use crate::io::write_atomic;
use crate::manifest::{Invocation, RunManifest};
use crate::results;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyArg {
    Generalization,
    Precision,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub study: StudyArg,
    /// Covariate counts, comma-separated (for example `10,20,50`).
    #[arg(long, value_delimiter = ',', required = true)]
    pub p: Vec<usize>,
    /// Replicates (generalization).
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    /// Data generations (precision).
    #[arg(long, default_value_t = 100)]
    pub generations: usize,
    /// Treatment assignments per generation (precision).
    #[arg(long, default_value_t = 1000)]
    pub assignments: usize,
    /// Auxiliary sample size.
    #[arg(long, default_value_t = 1000)]
    pub m: usize,
    /// RCT size (precision).
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Candidate pool screened for RCT selection (generalization).
    #[arg(long, default_value_t = 1300)]
    pub candidates: usize,
    /// Bootstrap replicates per interval (generalization).
    #[arg(long, default_value_t = 100)]
    pub bootstrap: usize,
    /// Auxiliary releases, e.g. `gram,en:1,dp:1,dp:3,dp:6,synth`.
    #[arg(long, default_value = "gram")]
    pub transforms: String,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    pub delta: f64,
    /// Cap on RCT covariates (precision).
    #[arg(long, default_value_t = 20)]
    pub max_rct_covariates: usize,
    /// Also calibrate second moments (generalization).
    #[arg(long)]
    pub second_moments: bool,
    #[arg(long, env = "PRIVSHIFT_SEED")]
    pub seed: Option<u64>,
    /// Results CSV; the run manifest goes next to it.
    #[arg(long)]
    pub output: PathBuf,
}

/// Fully resolved per-dimension configurations.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "study", content = "configs", rename_all = "snake_case")]
pub enum ResolvedStudy {
    Generalization(Vec<GeneralizationConfig>),
    Precision(Vec<PrecisionConfig>),
}

pub fn resolve(a: &SimulateArgs) -> CliResult<ResolvedStudy> {
    if a.p.is_empty() {
        return Err(CliError::Config("--p needs at least one value".into()));
    }
    let transforms = TransformSpec::parse_list(&a.transforms)?;
    let seed = a.seed.unwrap_or(0);
    Ok(match a.study {
        StudyArg::Generalization => ResolvedStudy::Generalization(
            a.p.iter()
                .map(|&p| {
                    let mut c = GeneralizationConfig::new(p, a.reps, seed);
                    c.candidate_pool = a.candidates;
                    c.m_aux = a.m;
                    c.bootstrap_b = a.bootstrap;
                    c.transforms = transforms.clone();
                    c.delta = a.delta;
                    c.second_moments = a.second_moments;
                    c.validate().map(|_| c)
                })
                .collect::<privshift::Result<_>>()?,
        ),
        StudyArg::Precision => ResolvedStudy::Precision(
            a.p.iter()
                .map(|&p| {
                    let mut c = PrecisionConfig::new(p, a.generations, a.assignments, seed);
                    c.n = a.n;
                    c.m_aux = a.m;
                    c.max_rct_covariates = a.max_rct_covariates;
                    c.transforms = transforms.clone();
                    c.delta = a.delta;
                    c.validate().map(|_| c)
                })
                .collect::<privshift::Result<_>>()?,
        ),
    })
}

pub fn execute(study: &ResolvedStudy) -> CliResult<Vec<StudyResults>> {
    let out: privshift::Result<Vec<StudyResults>> = match study {
        ResolvedStudy::Generalization(cs) => cs.iter().map(run_generalization_study).collect(),
        ResolvedStudy::Precision(cs) => cs.iter().map(run_precision_study).collect(),
    };
    out.map_err(|e| CliError::Config(e.to_string()))
}

pub fn run(mut a: SimulateArgs) -> CliResult<()> {
    a.seed = Some(a.seed.unwrap_or(0));
    let study = resolve(&a)?;
    let results = execute(&study)?;
    let rows: Vec<ResultRow> = results.iter().flat_map(|r| r.rows.iter().cloned()).collect();
    write_atomic(&a.output, results::to_csv(&rows).as_bytes())?;
    for r in &results {
        let d: Vec<String> = r.diagnostics.iter().map(|(k, v)| format!("{k}={v}")).collect();
        eprintln!("{} p={}: {}", r.study, r.p, d.join(" "));
    }
    let outputs = vec![a.output.display().to_string()];
    let resolved = serde_json::to_value(&study).expect("config serializes");
    RunManifest::new(Invocation::Simulate(a.clone()), resolved, outputs).write_beside(&a.output)
}
