//! `gabp`: solve linear systems with GaBP, train and apply the kernel
//! classifier, and benchmark the row-partitioned runtime.
//!
//! Every command prints one JSON document on standard output. Exit status is
//! 0 on success, 2 when GaBP does not converge, 1 on usage or input errors.

mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::settings::SettingsArgs;

#[derive(Debug, Parser)]
#[command(name = "gabp", version, about = "Gaussian belief propagation solver and kernel classifier")]
#[command(subcommand_required = true, arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DataFormat {
    Libsvm,
    Csv,
}

#[derive(Debug, Clone, clap::Args)]
pub struct DataArgs {
    /// Dataset file (libsvm, or CSV when the name ends in .csv).
    pub data: PathBuf,
    /// Override the format guessed from the file extension.
    #[arg(long, value_enum)]
    pub format: Option<DataFormat>,
    /// CSV column holding the label, 0-based (default: last column).
    #[arg(long)]
    pub label_column: Option<usize>,
    /// The CSV file starts with a header row.
    #[arg(long)]
    pub header: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve W x = b from a system file: n, then n rows of W, then b.
    Solve {
        system: PathBuf,
        #[command(flatten)]
        settings: SettingsArgs,
    },
    /// Train the classifier and write a model file.
    Train {
        #[command(flatten)]
        data: DataArgs,
        /// Where to write the model.
        #[arg(long, short)]
        model: PathBuf,
        /// Hold out this fraction of the data (seeded split) and report its error.
        #[arg(long)]
        holdout: Option<f64>,
        #[command(flatten)]
        settings: SettingsArgs,
    },
    /// Label a dataset with a trained model.
    Predict {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, short)]
        model: PathBuf,
        /// Also write one predicted label per line to this file.
        #[arg(long)]
        labels_out: Option<PathBuf>,
        /// Score with support vectors only instead of every training point.
        #[arg(long)]
        support_only: bool,
    },
    /// Time one random dominant system across worker counts and check that
    /// every count reproduces the single-process result.
    Bench {
        /// System order.
        #[arg(long, default_value_t = 400)]
        n: usize,
        /// Fraction of non-zero off-diagonal entries.
        #[arg(long, default_value_t = 0.2)]
        density: f64,
        /// Comma-separated worker counts.
        #[arg(long = "workers-list", value_delimiter = ',', default_values_t = [1usize, 2, 4, 8])]
        workers_list: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = gabp_core::gabp::DEFAULT_EPSILON)]
        epsilon: f64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match cli.command {
        Command::Solve { system, settings } => commands::solve(&system, &settings),
        Command::Train {
            data,
            model,
            holdout,
            settings,
        } => commands::train(&data, &model, holdout, &settings),
        Command::Predict {
            data,
            model,
            labels_out,
            support_only,
        } => commands::predict(&data, &model, labels_out.as_deref(), support_only),
        Command::Bench {
            n,
            density,
            workers_list,
            seed,
            epsilon,
        } => commands::bench(n, density, &workers_list, seed, epsilon),
    };
    match result {
        Ok(out) => {
            println!("{}", serde_json::to_string_pretty(&out.document).expect("report serializes"));
            if out.converged {
                ExitCode::SUCCESS
            } else {
                eprintln!("gabp: GaBP did not converge");
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("gabp: {e:#}");
            ExitCode::from(1)
        }
    }
}
