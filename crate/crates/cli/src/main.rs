//! Batch entry point. Every subcommand runs one pipeline stage against a
//! config file and writes its artifacts into the output directory;
//! `backtest` runs the full cycle. Exit codes: 0 success, 1 validation
//! error, 2 numerical failure (non-convergence / singular systems).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use quantfolio_cli::config::Stage;
use quantfolio_cli::{load_config, Pipeline};
use quantfolio_core::Error;

#[derive(Parser)]
#[command(
    name = "quantfolio",
    about = "Factor-driven portfolio construction, rebalancing, TCA and attribution",
    version
)]
struct Cli {
    /// Configuration file (JSON).
    #[arg(long, global = true, default_value = "config.json")]
    config: PathBuf,
    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load and validate market data; write the return panel.
    Ingest,
    /// Fit the multi-factor model on the fit window.
    FitFactors,
    /// Score and rank the universe at every holding period.
    Rank,
    /// Derive views and confidences from out-of-sample IC statistics.
    Views,
    /// Black-Litterman construction at each trading rebalance date.
    Construct,
    /// Compare rebalancing policies by simulation.
    Rebalance,
    /// Calibrate the market-impact model from completed orders.
    ImpactCalibrate,
    /// Pre- and post-trade transaction cost analysis.
    Tca,
    /// Performance attribution over the trading window.
    Attribute,
    /// Run the full cycle end to end.
    Backtest {
        /// Stop after the named stage (one of the subcommand names).
        #[arg(long)]
        stage: Option<String>,
    },
}

fn run(cli: Cli) -> Result<(), Error> {
    let loaded = load_config(&cli.config)?;
    let pipeline = Pipeline::load(loaded, &cli.out, cli.seed)?;
    match cli.command {
        Command::Ingest => {
            pipeline.ingest()?;
        }
        Command::FitFactors => {
            pipeline.fit_factors()?;
        }
        Command::Rank => {
            pipeline.rank()?;
        }
        Command::Views => {
            pipeline.views()?;
        }
        Command::Construct => {
            pipeline.construct()?;
        }
        Command::Rebalance => {
            pipeline.rebalance()?;
        }
        Command::ImpactCalibrate => {
            pipeline.impact_calibrate()?;
        }
        Command::Tca => {
            pipeline.tca()?;
        }
        Command::Attribute => {
            pipeline.attribute()?;
        }
        Command::Backtest { stage } => match stage {
            None => {
                pipeline.backtest()?;
            }
            Some(name) => {
                let stage = Stage::from_name(&name).ok_or_else(|| {
                    Error::InvalidInput(format!(
                        "unknown stage `{name}` (expected one of: {})",
                        Stage::ALL.map(|s| s.name()).join(", ")
                    ))
                })?;
                run_through(&pipeline, stage)?;
            }
        },
    }
    Ok(())
}

/// Runs the pipeline stages in order up to and including `last`.
fn run_through(pipeline: &Pipeline, last: Stage) -> Result<(), Error> {
    for stage in Stage::ALL {
        if stage > last {
            break;
        }
        match stage {
            Stage::Ingest => {
                pipeline.ingest()?;
            }
            Stage::FitFactors => {
                pipeline.fit_factors()?;
            }
            Stage::Rank => {
                pipeline.rank()?;
            }
            Stage::Views => {
                pipeline.views()?;
            }
            Stage::Construct => {
                pipeline.construct()?;
            }
            Stage::Rebalance => {
                pipeline.rebalance()?;
            }
            Stage::ImpactCalibrate => {
                pipeline.impact_calibrate()?;
            }
            Stage::Tca => {
                pipeline.tca()?;
            }
            Stage::Attribute => {
                pipeline.attribute()?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let mut source = std::error::Error::source(&err);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            match err {
                Error::NonConvergence { .. } | Error::Singular(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
