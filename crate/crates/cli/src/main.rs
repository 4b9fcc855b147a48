use std::path::PathBuf;
use std::process::ExitCode;

use cavity_pqs::io::commands::{cmd_estimate, cmd_experiment, cmd_simulate, init_workers_from_env, Which};
use clap::{Parser, Subcommand, ValueEnum};

/// QND photon-number monitoring: simulation, forward/backward/PQS estimation
/// and the two ensemble experiments.
///
/// Exit codes: 0 success, 1 invalid input or configuration, 2 I/O failure,
/// 3 numerical failure. Set CAVITY_PQS_WORKERS to bound the worker threads.
#[derive(Debug, Parser)]
#[command(name = "cavity-pqs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write simulated detection records, one file per record.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        records: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Smooth a record file into a per-time CSV of distributions and summaries.
    Estimate {
        /// Record file to read.
        record: PathBuf,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an experiment ensemble and write CSV + JSON artifacts.
    Experiment {
        which: ExperimentArg,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Realizations (experiment 1) or simulated runs before selection (experiment 2).
        #[arg(long)]
        realizations: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Use the laboratory ensemble sizes (6000 and 16320).
        #[arg(long)]
        full_scale: bool,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ExperimentArg {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
}

fn run(cli: Cli) -> cavity_pqs::Result<()> {
    init_workers_from_env()?;
    match cli.command {
        Command::Simulate { config, out, records, seed } => {
            let m = cmd_simulate(config.as_ref(), &out, records, seed)?;
            eprintln!("wrote {} record(s) to {}", m.artifact_paths.len(), out.display());
        }
        Command::Estimate { record, out } => {
            cmd_estimate(&record, &out)?;
            eprintln!("wrote {}", out.display());
        }
        Command::Experiment { which, config, out, realizations, seed, full_scale } => {
            let which = match which {
                ExperimentArg::One => Which::One,
                ExperimentArg::Two => Which::Two,
            };
            let m = cmd_experiment(which, config.as_ref(), &out, realizations, seed, full_scale)?;
            for p in &m.artifact_paths {
                eprintln!("wrote {p}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
