use std::path::PathBuf;
use std::process::ExitCode;

use barcodelab_cli::commands::{run_mi, run_price_report, run_sweep, run_tranche};
use barcodelab_cli::validate::{run_validate, ClosedForms};
use barcodelab_cli::{CliError, RunConfig};
use barcodelab_core::Unit;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "barcodelab",
    version,
    about = "Information and barcode prices of pooled assets and tranches"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration; defaults apply to missing blocks.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides the config and BARCODELAB_OUT).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Unit for information quantities.
    #[arg(long, global = true)]
    unit: Option<Unit>,

    /// Master seed for Monte Carlo oracles.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form information quantities for the model block.
    Mi,
    /// Information against pool size (sweep.csv).
    Sweep,
    /// Barcode prices, budget balances and share-size bounds (price.json).
    Price,
    /// Single tranches and a tranche decomposition (tranche.csv, tranche.json).
    Tranche,
    /// Full validation suite (validation.json); exit status 1 on failure.
    Validate,
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    let config = match &cli.config {
        Some(path) => RunConfig::from_path(path)?,
        None => RunConfig::default(),
    };
    let config = config.with_overrides(cli.out, cli.unit, cli.seed);
    Ok(match cli.command {
        Command::Mi => vec![run_mi(&config)?.1],
        Command::Sweep => vec![run_sweep(&config)?.1],
        Command::Price => vec![run_price_report(&config)?.1],
        Command::Tranche => run_tranche(&config)?.1,
        Command::Validate => vec![run_validate(&config, &ClosedForms::default())?.1],
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
