//! Command-line front end for robust auction design.

mod commands;
mod output;
mod scenario;

use clap::{Parser, Subcommand};
use output::Table;
use scenario::Scenario;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] robust_auction::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("{failed} check(s) failed")]
    Check { table: Table, failed: usize },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use robust_auction::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(E::NotSeparable(_) | E::ClassExceedsInformation { .. }) => 3,
            CliError::Core(_) => 2,
            CliError::Io(_) | CliError::Csv(_) | CliError::Check { .. } => 1,
        }
    }

    fn explain(&self) -> Option<&'static str> {
        match self {
            CliError::Core(robust_auction::Error::NotSeparable(_)) => Some(
                "Myerson's payment depends on more than the top order statistics, so its revenue at the \
                 consistent i.i.d. distribution is not a worst-case guarantee. \
                 Run `robust-auction reproduce counterexample` for a witness.",
            ),
            CliError::Core(robust_auction::Error::ClassExceedsInformation { .. }) => {
                Some("The mechanism's payment uses order statistics beyond the one whose distribution is known.")
            }
            _ => None,
        }
    }
}

#[derive(Parser)]
#[command(name = "robust-auction", version, about = "Robust auction design from order-statistic information")]
struct Cli {
    /// Scenario file (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write CSV here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    samples: Option<u64>,
    /// Knots used when discretizing continuous families.
    #[arg(long, global = true)]
    grid: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Knot table of the consistent i.i.d. marginal with its round-trip residual.
    Invert,
    /// Best robust reserve with its guarantee and regularity certificate.
    Reserve,
    /// Worst-case revenue of a top-k mechanism over the ambiguity set.
    Worstcase,
    /// Revenue curve of the consistent i.i.d. marginal, raw and ironed.
    Curve,
    /// Recompute a worked example and compare against its reference values.
    Reproduce {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(commands::REPRODUCTIONS))]
        name: String,
    },
    /// Monte Carlo revenue for explicit bidders.
    Simulate,
}

fn load(cli: &Cli) -> Result<Scenario, CliError> {
    let path = cli.config.as_deref().ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut sc = Scenario::load(path)?;
    if cli.grid.is_some() {
        sc.grid = cli.grid;
    }
    Ok(sc)
}

fn run(cli: &Cli) -> Result<Table, CliError> {
    match &cli.command {
        Command::Invert => commands::invert(&load(cli)?),
        Command::Reserve => commands::reserve(&load(cli)?),
        Command::Worstcase => commands::worstcase(&load(cli)?),
        Command::Curve => commands::curve(&load(cli)?),
        Command::Reproduce { name } => commands::reproduce(name),
        Command::Simulate => commands::simulate(&load(cli)?, cli.seed, cli.samples),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli).and_then(|t| t.write(cli.out.as_deref()));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Check { table, failed }) => {
            let _ = table.write(cli.out.as_deref());
            eprintln!("error: {failed} check(s) failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let Some(why) = e.explain() {
                eprintln!("{why}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
