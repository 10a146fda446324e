//! `minmove`: run gradient-flow experiments from a TOML configuration.
//!
//! Exit codes: 0 success, 1 I/O, 2 invalid configuration, 3 solver failure.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Options;
use error::CliError;

#[derive(Parser)]
#[command(name = "minmove", version, about = "Minimizing-movement experiments for non-convex gradient flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory; overrides `output.dir` of the config.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker threads for ensemble runs.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// Suppress progress messages.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory and write its energy ledger.
    Simulate,
    /// Locate rest points from a list of seeds.
    Restpoints,
    /// Approximate the global attractor from seeds in a ball.
    Attractor,
    /// Compare attractors of the shifted problems with decreasing lambda.
    LambdaStudy,
    /// Print the excess of ensemble dump A over dump B.
    Excess { a: PathBuf, b: PathBuf },
    /// Check a configuration without running anything.
    ValidateConfig,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::field("--threads", "must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .expect("the global pool is configured once");
    }
    let opts = Options {
        config: cli.config,
        out: cli.out,
        quiet: cli.quiet,
    };
    match cli.command {
        Command::Simulate => commands::simulate(&opts),
        Command::Restpoints => commands::restpoints(&opts),
        Command::Attractor => commands::attractor(&opts),
        Command::LambdaStudy => commands::lambda(&opts),
        Command::Excess { a, b } => {
            let e = commands::excess_between(&opts, &a, &b)?;
            println!("{e:?}");
            Ok(())
        }
        Command::ValidateConfig => commands::validate(&opts),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
