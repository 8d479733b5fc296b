use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dressed_stirap::commands::{execute, Overrides};
use dressed_stirap::config::Experiment;

/// Adiabatic transfer between microwave-dressed spin states of an NV center.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON config, or any output file of an earlier run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: out/<subcommand>).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write into a non-empty output directory.
    #[arg(long, global = true)]
    force: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Superadiabatic far-detuned pulses at the configured detuning.
    SatdPulses,
    /// CRAB optimization of the transfer.
    CrabOptimize,
    /// A single run with its density-matrix trajectory.
    Simulate,
    /// Efficiency against the one-photon detuning.
    SweepDetuning,
    /// Efficiency against the width of the bath distribution.
    SweepSigma,
    /// Efficiency histograms for each dephasing variant.
    HistogramVariants,
}

impl From<Command> for Experiment {
    fn from(c: Command) -> Self {
        match c {
            Command::SatdPulses => Experiment::SatdPulses,
            Command::CrabOptimize => Experiment::CrabOptimize,
            Command::Simulate => Experiment::Simulate,
            Command::SweepDetuning => Experiment::SweepDetuning,
            Command::SweepSigma => Experiment::SweepSigma,
            Command::HistogramVariants => Experiment::HistogramVariants,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.exit_code() == 0 => e.exit(),
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let overrides = Overrides {
        config: cli.config,
        seed: cli.seed,
        out: cli.out,
        threads: cli.threads,
        force: cli.force,
    };
    match execute(cli.command.into(), &overrides) {
        Ok(out) => {
            eprintln!("wrote {}", out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
