//! `hwlab`: seeded, bit-reproducible experiment runner.
//!
//! Every subcommand reads an optional TOML config file (`--config`),
//! lets command-line flags override the file's values, runs one
//! experiment, and writes a report plus a `.meta.json` sidecar to
//! `--output-dir` through atomic temp-and-rename writes. Exit codes:
//! 0 success, 2 configuration error, 3 numerical failure, 4 property
//! violation detected by a verification subcommand.

mod commands;
mod configfile;
mod output;
mod resolve;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use hwlab::Error;

use crate::configfile::FileConfig;
use crate::output::Format;

#[derive(Parser)]
#[command(
    name = "hwlab",
    version,
    about = "Tail-bound experiments for quadratic forms in random vectors",
    after_help = "Reports are byte-identical for a fixed seed at any --threads value."
)]
struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// RNG seed (never derived from the clock).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory for report artifacts.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    output_dir: PathBuf,

    /// Report file format; the metadata sidecar is always JSON.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Worker thread count (default: all cores). Output bytes do not
    /// depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one closed-form tail bound over a t-grid.
    Bound(commands::BoundArgs),
    /// Empirical tail of a centered quadratic form, with optional bounds.
    Tail(commands::TailArgs),
    /// Empirical tail of the supremum over a matrix family.
    UniformTail(commands::UniformTailArgs),
    /// Evaluate a truncated quadratic and its tangent-plane envelope at a
    /// point.
    Envelope(commands::EnvelopeArgs),
    /// Covariance-operator deviation experiment.
    Covest(commands::CovestArgs),
    /// Stress a sampler's declared concentration constant with random
    /// convex 1-Lipschitz functions.
    VerifyConcentration(commands::VerifyArgs),
    /// Quantile lower-bound and median-mean-gap checks on scalar samples.
    Lemmas(commands::LemmasArgs),
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return 2;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: failed to size the thread pool: {e}");
            return 2;
        }
    }
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

/// Numerical failures are distinguished from bad input so scripts can
/// retry or re-parameterize; everything else about the input is the
/// caller's to fix.
fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::NonConvergence(_) | Error::BisectionFailure(_) | Error::DegenerateCovariance => 3,
        _ => 2,
    }
}

fn dispatch(cli: &Cli) -> hwlab::Result<i32> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let ctx = commands::RunContext {
        file,
        seed_flag: cli.seed,
        output_dir: cli.output_dir.clone(),
        format: cli.format,
        build_info: option_env!("HWLAB_GIT_DESCRIBE").unwrap_or("unknown"),
    };
    match &cli.command {
        Command::Bound(args) => commands::run_bound(&ctx, args),
        Command::Tail(args) => commands::run_tail(&ctx, args),
        Command::UniformTail(args) => commands::run_uniform_tail(&ctx, args),
        Command::Envelope(args) => commands::run_envelope(&ctx, args),
        Command::Covest(args) => commands::run_covest(&ctx, args),
        Command::VerifyConcentration(args) => commands::run_verify(&ctx, args),
        Command::Lemmas(args) => commands::run_lemmas(&ctx, args),
    }
}
