//! `catfuse`: fit, path, cv and simulate from the command line.
//!
//! Every output file carries `schema_version`, the software version and the
//! resolved configuration. Failures print a JSON error document on stderr and
//! exit with status 1.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "catfuse",
    version,
    about = "L1 difference-penalized regression for categorical predictors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit at one s/s_max value and write coefficients, partition and a log.
    Fit {
        #[command(flatten)]
        common: CommonArgs,
        /// Penalty budget ratio in [0, 1].
        #[arg(long, conflicts_with = "chosen")]
        s_ratio: Option<f64>,
        /// Take the s/s_max value from a chosen.json written by `cv`.
        #[arg(long)]
        chosen: Option<PathBuf>,
        /// Refit the fused design by least squares.
        #[arg(long)]
        refit: bool,
    },
    /// Write the full coefficient path as CSV.
    Path {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// K-fold cross-validation over the s/s_max grid.
    Cv {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 5)]
        k_folds: usize,
        /// Refit inside every fold before scoring.
        #[arg(long)]
        refit: bool,
    },
    /// Replicated simulation study.
    Simulate {
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 1)]
        replicates: usize,
        /// Comma-separated estimator labels, e.g. `ols,stdrd+nij+rf,adapt+nij+rf`.
        #[arg(long, default_value = "ols,stdrd+nij+rf,adapt+nij+rf")]
        variants: String,
        #[arg(long, default_value_t = 5)]
        k_folds: usize,
        #[arg(long, default_value_t = 100)]
        grid: usize,
        #[arg(long, default_value_t = 1e10)]
        gamma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Args, Serialize)]
struct CommonArgs {
    /// CSV with a header row.
    #[arg(long, requires = "schema", required_unless_present = "scenario")]
    data: Option<PathBuf>,
    /// JSON array of factor schemas.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Name of the response column.
    #[arg(long, default_value = "y")]
    response: String,
    /// Use the training part of a built-in scenario instead of a file.
    #[arg(long, conflicts_with = "data")]
    scenario: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (created if missing).
    #[arg(long)]
    #[serde(skip)]
    out: PathBuf,
    #[arg(long)]
    adaptive: bool,
    /// Include class-frequency terms in the weights.
    #[arg(long)]
    frequency: bool,
    /// Epanechnikov bandwidth for factors with spatial coordinates.
    #[arg(long)]
    spatial_h: Option<f64>,
    #[arg(long, default_value_t = catfuse::weights::DEFAULT_SPATIAL_FLOOR)]
    spatial_floor: f64,
    /// Restriction weight gamma (not its square root).
    #[arg(long, default_value_t = 1e10)]
    gamma: f64,
    /// Number of path grid points.
    #[arg(long, default_value_t = 100)]
    grid: usize,
}

#[derive(Debug, Serialize)]
struct ErrorDoc<'a> {
    schema_version: u32,
    error: ErrorBody<'a>,
}

#[derive(Debug, Serialize)]
struct ErrorBody<'a> {
    kind: &'a str,
    message: String,
}

fn fail(kind: &str, message: String) -> ExitCode {
    let doc = ErrorDoc {
        schema_version: output::SCHEMA_VERSION,
        error: ErrorBody { kind, message },
    };
    eprintln!("{}", serde_json::to_string(&doc).expect("error document serializes"));
    ExitCode::from(1)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("Usage", e.to_string().trim().to_string()),
    };
    let result = match cli.command {
        Command::Fit {
            common,
            s_ratio,
            chosen,
            refit,
        } => commands::fit(&common, s_ratio, chosen.as_deref(), refit),
        Command::Path { common } => commands::path(&common),
        Command::Cv { common, k_folds, refit } => commands::cv(&common, k_folds, refit),
        Command::Simulate {
            scenario,
            replicates,
            variants,
            k_folds,
            grid,
            gamma,
            seed,
            out,
        } => commands::simulate(&commands::SimulateArgs {
            scenario,
            replicates,
            variants,
            k_folds,
            grid,
            gamma,
            seed,
            out,
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), e.to_string()),
    }
}
