use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod artifact;
mod error;
mod estimate;
mod io;
mod manifest;
mod report;
mod results;
mod simulate;
mod transform;

use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "privshift", version, about = "Disclosure-limited auxiliary data for treatment-effect estimation")]
struct Cli {
    /// Worker threads for parallel work (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Release a confidential CSV as a gram artifact or synthetic CSV.
    Transform(transform::TransformArgs),
    /// Estimate a treatment effect from an RCT CSV and optional auxiliary data.
    Estimate(estimate::EstimateArgs),
    /// Run a simulation study and write its results table.
    Simulate(simulate::SimulateArgs),
    /// Render a results table.
    Report(report::ReportArgs),
    /// Re-run the command recorded in a run manifest.
    Replay(manifest::ReplayArgs),
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot start thread pool: {e}")))?;
    }
    match cli.command {
        Command::Transform(a) => transform::run(&a),
        Command::Estimate(a) => estimate::run(a),
        Command::Simulate(a) => simulate::run(a),
        Command::Report(a) => report::run(&a),
        Command::Replay(a) => manifest::replay(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(error::EXIT_CONFIG as u8),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("privshift: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
