//! Run manifests: the resolved inputs of an `estimate` or `simulate` call,
//! written next to its output so the run can be repeated exactly.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::estimate::EstimateArgs;
use crate::io::{read_to_string, write_atomic};
use crate::simulate::SimulateArgs;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "command", content = "args", rename_all = "snake_case")]
pub enum Invocation {
    Estimate(EstimateArgs),
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool_version: String,
    #[serde(flatten)]
    pub invocation: Invocation,
    /// Configuration after defaults were applied.
    pub resolved: serde_json::Value,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(invocation: Invocation, resolved: serde_json::Value, outputs: Vec<String>) -> Self {
        Self {
            schema_version: MANIFEST_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            invocation,
            resolved,
            outputs,
        }
    }

    /// `<output>.manifest.json`.
    pub fn path_for(output: &Path) -> PathBuf {
        let mut s = output.as_os_str().to_owned();
        s.push(".manifest.json");
        PathBuf::from(s)
    }

    pub fn write_beside(&self, output: &Path) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        write_atomic(&Self::path_for(output), text.as_bytes())
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let m: Self = serde_json::from_str(&read_to_string(path)?)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if m.schema_version != MANIFEST_VERSION {
            return Err(CliError::Config(format!("unsupported manifest schema_version {}", m.schema_version)));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Write here instead of the recorded output path.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

pub fn replay(a: &ReplayArgs) -> CliResult<()> {
    let m = RunManifest::read(&a.manifest)?;
    match m.invocation {
        Invocation::Estimate(mut args) => {
            if let Some(o) = &a.output {
                args.output = o.clone();
            }
            crate::estimate::run(args)
        }
        Invocation::Simulate(mut args) => {
            if let Some(o) = &a.output {
                args.output = o.clone();
            }
            crate::simulate::run(args)
        }
    }
}
