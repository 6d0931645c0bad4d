mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use commands::{NoData, VerificationFailed};
use config::{RunArgs, UsageError};
use mcgraph_core::verify::Profile;

#[derive(Debug, Parser)]
#[command(
    name = "mcgraph",
    version,
    about = "Multiplicative coalescent simulation and limit checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ProfileArg {
    Quick,
    Full,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the mass vector and its summary.
    Generate(RunArgs),
    /// Simulate an ensemble and write one CSV per trajectory plus a manifest.
    Simulate(RunArgs),
    /// Scale a simulated ensemble and test it against the limit.
    Analyze {
        #[command(flatten)]
        run: RunArgs,
        /// Sup-norm tolerance for the fluid-limit check.
        #[arg(long, default_value_t = 0.01)]
        fluid_tol: f64,
    },
    /// Compare the engine with the exact law and the percolation sampler on
    /// a small instance.
    Oracle {
        #[command(flatten)]
        run: RunArgs,
        /// Unscaled time at which to compare.
        #[arg(long)]
        t: f64,
    },
    /// Run the acceptance criteria.
    Verify {
        #[arg(long, value_enum, default_value = "full")]
        profile: ProfileArg,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Directory for `verify.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Generate(args) => commands::generate(&args.resolve()?),
        Command::Simulate(args) => commands::simulate(&args.resolve()?),
        Command::Analyze { run, fluid_tol } => commands::analyze(&run.resolve()?, fluid_tol),
        Command::Oracle { run, t } => commands::oracle(&run.resolve()?, t),
        Command::Verify {
            profile,
            seed,
            workers,
            out,
        } => {
            let profile = match profile {
                ProfileArg::Quick => Profile::Quick,
                ProfileArg::Full => Profile::Full,
            };
            commands::verify(profile, seed, workers, out)
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.is::<UsageError>() {
        1
    } else if err.is::<VerificationFailed>() {
        2
    } else if err.is::<NoData>() || err.is::<std::io::Error>() {
        3
    } else if let Some(e) = err.downcast_ref::<mcgraph_core::Error>() {
        if matches!(e, mcgraph_core::Error::Parse(_)) {
            3
        } else {
            1
        }
    } else {
        3
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
