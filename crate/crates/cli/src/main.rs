//! `scv`: self-consistency verification of sampled reasoning traces.
//!
//! Exit codes: 0 success, 2 invalid input or arguments, 3 internal failure.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::ConfigFile;
use error::{CliResult, Fail, EXIT_OK};
use output::{Format, Output};
use scv_core::consistency::{ScoringConfig, DEFAULT_ALPHA, DEFAULT_FLAG_THRESHOLD};
use scv_core::equivalence::{ProviderKind, SimilarityProvider, DEFAULT_THRESHOLD};
use scv_core::iso::{IsoConfig, IsoMethod, DEFAULT_EXACT_CAP};

#[derive(Parser, Debug)]
#[command(name = "scv", version, about = "Self-consistency verification of reasoning traces")]
pub struct Cli {
    /// Master seed for every random choice.
    #[arg(long, global = true, env = "SCV_SEED")]
    seed: Option<u64>,
    /// Worker threads for pairwise scoring and Monte Carlo trials.
    #[arg(long, global = true, env = "SCV_JOBS")]
    jobs: Option<usize>,
    #[arg(long, global = true, env = "SCV_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,
    /// json, csv or both.
    #[arg(long, global = true, env = "SCV_FORMAT")]
    format: Option<Format>,
    /// TOML file of `key = value` defaults, overridden by env and flags.
    #[arg(long, global = true, env = "SCV_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Score a trace-set document.
    Verify(commands::verify::VerifyArgs),
    /// Draw traces adaptively from a generator backend.
    Sample(commands::sample::SampleArgs),
    /// Monte Carlo checks of the theoretical bounds.
    Simulate(commands::simulate::SimulateArgs),
    /// Repair one trace using the rest of its set.
    Repair(commands::repair::RepairArgs),
    /// Turn earlier outputs into plot-ready CSV series.
    Report(commands::report::ReportArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct ScoringArgs {
    #[arg(long, env = "SCV_ALPHA")]
    alpha: Option<f64>,
    #[arg(long, env = "SCV_FLAG_THRESHOLD")]
    flag_threshold: Option<f64>,
    /// token, canonical or remote (remote reads SCV_EMBED_URL).
    #[arg(long, env = "SCV_SIMILARITY_PROVIDER")]
    similarity_provider: Option<ProviderKind>,
    #[arg(long, env = "SCV_SIMILARITY_THRESHOLD")]
    similarity_threshold: Option<f64>,
    /// exact, spectral or auto.
    #[arg(long, env = "SCV_ISO_METHOD")]
    iso_method: Option<IsoMethod>,
    #[arg(long, env = "SCV_ISO_EXACT_CAP")]
    iso_exact_cap: Option<usize>,
}

/// Resolved global settings shared by all commands.
pub struct Context {
    pub config: ConfigFile,
    pub seed: u64,
    pub output: Output,
}

pub fn check_unit(name: &str, v: f64) -> CliResult<f64> {
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(Fail::invalid(format!("domain error: {name} = {v} outside [0, 1]")))
    }
}

impl Context {
    pub fn scoring(&self, a: &ScoringArgs) -> CliResult<(SimilarityProvider, ScoringConfig)> {
        let c = &self.config;
        let alpha = check_unit("alpha", c.pick(a.alpha, "alpha", DEFAULT_ALPHA)?)?;
        let flag_threshold = check_unit(
            "flag-threshold",
            c.pick(a.flag_threshold, "flag-threshold", DEFAULT_FLAG_THRESHOLD)?,
        )?;
        let kind = c.pick(a.similarity_provider, "similarity-provider", ProviderKind::Canonical)?;
        let threshold = check_unit(
            "similarity-threshold",
            c.pick(a.similarity_threshold, "similarity-threshold", DEFAULT_THRESHOLD)?,
        )?;
        let iso = IsoConfig {
            method: c.pick(a.iso_method, "iso-method", IsoMethod::Auto)?,
            exact_cap: c.pick(a.iso_exact_cap, "iso-exact-cap", DEFAULT_EXACT_CAP)?,
        };
        let provider = SimilarityProvider::from_kind(kind, threshold).map_err(Fail::invalid)?;
        Ok((
            provider,
            ScoringConfig {
                alpha,
                flag_threshold,
                iso,
            },
        ))
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let config = ConfigFile::load(cli.config.as_deref())?;
    let seed = config.pick(cli.seed, "seed", 0)?;
    if let Some(jobs) = config.pick_opt(cli.jobs, "jobs")? {
        if jobs == 0 {
            return Err(Fail::invalid("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(Fail::internal)?;
    }
    let dir = config.pick(cli.output_dir, "output-dir", PathBuf::from("."))?;
    let format = config.pick(cli.format, "format", Format::Both)?;
    let ctx = Context {
        config,
        seed,
        output: Output::new(dir, format)?,
    };
    match cli.command {
        Command::Verify(a) => commands::verify::run(&ctx, &a),
        Command::Sample(a) => commands::sample::run(&ctx, &a),
        Command::Simulate(a) => commands::simulate::run(&ctx, &a),
        Command::Repair(a) => commands::repair::run(&ctx, &a),
        Command::Report(a) => commands::report::run(&ctx, &a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(f) => {
            eprintln!("scv: {f}");
            ExitCode::from(f.code)
        }
    }
}
