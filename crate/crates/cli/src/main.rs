mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use selection_core::harness::Algorithm;
use selection_core::instances::ErrorKind;

/// Monte-Carlo experiments for online selection with predictions.
#[derive(Parser, Debug)]
#[command(name = "selection-lab", version, about, long_about = None)]
struct Cli {
    /// TOML experiment file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed (SELECTION_LAB_SEED takes precedence when set).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Trials per cell (instances for truthful-audit).
    #[arg(long, global = true)]
    trials: Option<u64>,

    /// Write CSV here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Finite-size slack for verdicts.
    #[arg(long, global = true)]
    slack: Option<f64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Secretary problem: classical, algorithm1 or naive.
    Secretary(RunArgs),
    /// Online bipartite matching: kesselheim or algorithm3.
    Bipartite(RunArgs),
    /// Graphic matroid: algorithm4 or algorithm5.
    Graphic(RunArgs),
    /// Exhaustive truthfulness audit on random unit-demand instances.
    TruthfulAudit(AuditArgs),
    /// Evaluate f(c), phase fractions and the guarantee functions.
    Bounds(BoundArgs),
    /// Run the grid of a config file.
    Sweep(SweepArgs),
}

/// Grid axes accept comma-separated lists.
#[derive(Args, Debug, Default)]
struct GridArgs {
    #[arg(long, value_delimiter = ',')]
    c: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    d: Vec<f64>,
    /// Relative to the per-trial scale.
    #[arg(long, value_delimiter = ',')]
    lambda: Vec<f64>,
    /// Relative to the per-trial scale.
    #[arg(long, value_delimiter = ',')]
    eta: Vec<f64>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, value_parser = parse_algorithm)]
    algorithm: Option<Algorithm>,
    /// exact, constant_shift, uniform_noise or adversarial_sign.
    #[arg(long, value_parser = parse_error_kind)]
    error: Option<ErrorKind>,
    /// Edge density or edge probability.
    #[arg(long)]
    density: Option<f64>,
    /// Naive randomization weight of the classical rule.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Compare each cell with its bound; exit 1 on any failure.
    #[arg(long)]
    check: bool,
}

#[derive(Args, Debug)]
struct AuditArgs {
    /// Largest number of agents.
    #[arg(long, default_value_t = 5)]
    n: usize,
    /// Largest number of items.
    #[arg(long, default_value_t = 5)]
    m: usize,
    #[arg(long, default_value_t = 3.0)]
    c: f64,
    #[arg(long, default_value_t = 1.5)]
    d: f64,
    #[arg(long, default_value_t = 20)]
    max_value: u64,
    /// Reports are tried up to max value plus this margin.
    #[arg(long, default_value_t = 5)]
    margin: u64,
}

#[derive(Args, Debug)]
struct BoundArgs {
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    check: bool,
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    s.parse().map_err(|e: selection_core::Error| e.to_string())
}

fn parse_error_kind(s: &str) -> Result<ErrorKind, String> {
    match s {
        "exact" => Ok(ErrorKind::Exact),
        "constant_shift" => Ok(ErrorKind::ConstantShift),
        "uniform_noise" => Ok(ErrorKind::UniformNoise),
        "adversarial_sign" => Ok(ErrorKind::AdversarialSign),
        other => Err(format!("unknown error model {other:?}")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
