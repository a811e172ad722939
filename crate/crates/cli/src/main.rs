//! `gmc`: metrics, rank estimation, property checks, training runs and
//! experiment suites.
//!
//! Exit codes: 0 ok, 1 property failure, 2 input error, 3 degenerate data.

mod commands;
mod exit;
mod scorefile;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use scorefile::Column;

#[derive(Parser)]
#[command(name = "gmc", version, about = "Correlation-consistency losses for quality regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// PLCC and SROCC of an `id,pred,gt` CSV, printed as JSON.
    Metrics {
        file: PathBuf,
    },
    /// Differentiable rank estimates of one column, as `id,sigma` CSV.
    EstimateRanks {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = Column::Pred)]
        column: Column,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the identity, gradient and invariant checks.
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train one model and write `report.json` and `curves.csv`.
    Train {
        /// Experiment config (JSON); defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// mse, gmc, pgcc-only, sgcc-only or no-queue; overrides the config.
        #[arg(long)]
        loss: Option<String>,
        /// Defaults to the first seed of the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        queue_ratio: Option<f64>,
        /// Number of MALs when training the MoNet model.
        #[arg(long)]
        mal_count: Option<usize>,
    },
    /// Multi-seed experiment suite; writes aggregate JSON and median curves.
    Suite {
        /// loss-compare, lr-sweep, queue-sweep, mal-sweep or ablation;
        /// defaults to the config's `suite`.
        kind: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Metrics { file } => commands::metrics(&file),
        Command::EstimateRanks { file, column, out } => {
            commands::estimate_ranks(&file, column, out.as_deref())
        }
        Command::Check { seed } => commands::check(seed),
        Command::Train {
            config,
            loss,
            seed,
            out,
            queue_ratio,
            mal_count,
        } => commands::train(commands::TrainArgs {
            config: config.as_deref(),
            loss: loss.as_deref(),
            seed,
            out: &out,
            queue_ratio,
            mal_count,
        }),
        Command::Suite { kind, config, out } => {
            commands::suite(kind.as_deref(), config.as_deref(), &out)
        }
    };
    let code = match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    };
    std::process::exit(code as i32);
}
