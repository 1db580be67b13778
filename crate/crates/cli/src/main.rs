//! `unicirc`: densities, samples and verification reports for the unimodular
//! circular ensembles.
//!
//! Exit codes: 0 success, 1 bad flags or I/O, 2 unsupported or degenerate
//! ensemble / invalid parameters, 3 statistical verification failure.

mod commands;
mod config;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};

use crate::commands::CliError;

#[derive(Parser)]
#[command(
    name = "unicirc",
    version,
    about = "Eigenphase densities of unimodular circular ensembles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the one-point eigenphase density on a uniform grid.
    Density(DensityArgs),
    /// Draw eigenphase vectors from the matrix model.
    Sample(SampleArgs),
    /// Sample and test against the exact density.
    Verify(VerifyArgs),
    /// Evaluate Morris's constant term integral.
    Morris(MorrisArgs),
    /// Analytic (and optionally empirical) E[Σ_j cos kθ_j].
    Moments(MomentsArgs),
}

#[derive(Args)]
struct EnsembleArgs {
    /// Dyson index.
    #[arg(long)]
    beta: u32,
    /// Number of distinct eigenphases.
    #[arg(long = "N", value_name = "N")]
    n: usize,
    /// Impose Σθ ≡ 0 (mod 2π).
    #[arg(long, action = ArgAction::Set, num_args = 0..=1, default_value_t = true, default_missing_value = "true")]
    unimodular: bool,
}

#[derive(Args)]
struct StreamArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    stream_id: u64,
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write to this file instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    fn name(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormalizationArg {
    Total,
    PerEigenvalue,
}

#[derive(Args)]
struct DensityArgs {
    #[command(flatten)]
    ensemble: EnsembleArgs,
    #[arg(long, default_value_t = 256)]
    grid_points: usize,
    #[arg(long, value_enum, default_value_t = NormalizationArg::Total)]
    normalization: NormalizationArg,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    ensemble: EnsembleArgs,
    #[arg(long, default_value_t = 1000)]
    count: usize,
    #[command(flatten)]
    stream: StreamArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    ensemble: EnsembleArgs,
    #[arg(long, default_value_t = 200_000)]
    count: usize,
    #[arg(long, default_value_t = unicirc::verify::DEFAULT_BINS)]
    bins: usize,
    #[command(flatten)]
    stream: StreamArgs,
    /// Test against the flat density instead (power check; should fail).
    #[arg(long)]
    expect_uniform: bool,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct MorrisArgs {
    #[arg(long)]
    n_vars: usize,
    #[arg(long, allow_negative_numbers = true)]
    a: f64,
    #[arg(long, allow_negative_numbers = true)]
    b: f64,
    #[arg(long, allow_negative_numbers = true)]
    lam: f64,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct MomentsArgs {
    #[command(flatten)]
    ensemble: EnsembleArgs,
    #[arg(long, allow_negative_numbers = true)]
    k: i64,
    /// Also estimate the moment from this many samples.
    #[arg(long)]
    count: Option<usize>,
    #[command(flatten)]
    stream: StreamArgs,
    #[command(flatten)]
    out: OutputArgs,
}

fn emit(bytes: &[u8], path: Option<&PathBuf>) -> std::io::Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (result, path) = match &cli.command {
        Command::Density(a) => (commands::density(a), a.out.output.as_ref()),
        Command::Sample(a) => (commands::sample(a), a.out.output.as_ref()),
        Command::Verify(a) => (commands::verify(a), a.out.output.as_ref()),
        Command::Morris(a) => (commands::morris(a), a.out.output.as_ref()),
        Command::Moments(a) => (commands::moments(a), a.out.output.as_ref()),
    };
    let artifact = match result {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    if let Err(e) = emit(&artifact.bytes, path) {
        eprintln!("error: {}", CliError::Io(e));
        return ExitCode::from(1);
    }
    if artifact.passed {
        ExitCode::SUCCESS
    } else {
        eprintln!("verification failed");
        ExitCode::from(3)
    }
}
