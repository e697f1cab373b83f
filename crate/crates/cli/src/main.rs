//! `fmsos`: simulate, fit and evaluate sphere-on-sphere regressions.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
//! failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fmsos::{Error, RunConfig};

#[derive(Parser)]
#[command(name = "fmsos", version, about = "Bayesian sphere-on-sphere regression with optimal transport maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand. Flags override the configuration file,
/// which overrides the built-in defaults.
#[derive(Args, Clone, Debug, Default)]
pub struct Common {
    /// Flat `key = value` run configuration [default: built-in defaults]
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// RNG seed; required by simulate, fit and sim-study [default: config `seed`, else 0]
    #[arg(long, value_name = "INT")]
    pub seed: Option<u64>,
    /// Input data file [default: config `data`]
    #[arg(long, value_name = "PATH")]
    pub data: Option<PathBuf>,
    /// Truth file written by `simulate` [default: config `truth`]
    #[arg(long, value_name = "PATH")]
    pub truth: Option<PathBuf>,
    /// Output directory [default: out]
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Independent chains per fit, pooled [default: 1]
    #[arg(long, value_name = "INT")]
    pub chains: Option<usize>,
    /// Reference-cloud size for feasibility and interval checks [default: 10000]
    #[arg(long, value_name = "INT")]
    pub cloud_size: Option<usize>,
}

#[derive(Args, Debug)]
pub struct TraceArgs {
    /// Trace files to read [default: <out>/chain_*.jsonl]
    #[arg(long, value_name = "PATH")]
    pub trace: Vec<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a truth (k atoms, Haar rotation, concentration kappa) and n pairs from it
    Simulate(#[command(flatten)] Common),
    /// Run the sampler on a dataset and summarize the posterior
    Fit(#[command(flatten)] Common),
    /// Posterior mean response for each covariate in --data
    Predict {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        traces: TraceArgs,
    },
    /// Held-out log-likelihood on --data and, with --truth, the distance to the truth
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        traces: TraceArgs,
    },
    /// Fit the rotation-only model f(x) = Rx and score it on held-out pairs
    BaselineRotation {
        #[command(flatten)]
        common: Common,
        /// Held-out pairs [default: config `test_data`]
        #[arg(long, value_name = "PATH")]
        test: Option<PathBuf>,
    },
    /// Simulation grid over (k, kappa, n) from config `grid_k`, `grid_kappa`, `grid_n`
    SimStudy(#[command(flatten)] Common),
    /// Convert a HURDAT2 file (--data) into first-fix/last-fix regression pairs
    ParseHurdat2(#[command(flatten)] Common),
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Config(_) => 2,
            Error::NotConverged { .. }
            | Error::RejectionBudgetExceeded(_)
            | Error::InvalidMeasure(_)
            | Error::EmptyInterval { .. }
            | Error::NonPositiveConcentration(_)
            | Error::Antipodal
            | Error::Weights(_) => 4,
            _ => 3,
        };
        Self { code, message: e.to_string() }
    }
}

/// Defaults, then the configuration file, then flags.
pub fn resolve(common: &Common, need_seed: bool) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p).map_err(|e| match e {
            Error::Io(io) => CliError::config(format!("{}: {io}", p.display())),
            other => other.into(),
        })?,
        None => RunConfig::default(),
    };
    match common.seed {
        Some(s) => cfg.sampler.seed = s,
        None if need_seed => return Err(CliError::config("--seed is required for this subcommand")),
        None => {}
    }
    if let Some(d) = &common.data {
        cfg.data = Some(d.clone());
    }
    if let Some(t) = &common.truth {
        cfg.truth = Some(t.clone());
    }
    if let Some(o) = &common.out {
        cfg.out = o.clone();
    }
    if let Some(c) = common.chains {
        cfg.chains = c;
    }
    if let Some(c) = common.cloud_size {
        cfg.sampler.prior.cloud_size = c;
    }
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out).map_err(|e| CliError { code: 3, message: format!("{}: {e}", cfg.out.display()) })?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(c) => resolve(&c, true).and_then(|cfg| commands::simulate(&cfg)),
        Command::Fit(c) => resolve(&c, true).and_then(|cfg| commands::fit(&cfg)),
        Command::Predict { common, traces } => resolve(&common, false).and_then(|cfg| commands::predict(&cfg, &traces.trace)),
        Command::Evaluate { common, traces } => resolve(&common, false).and_then(|cfg| commands::evaluate(&cfg, &traces.trace)),
        Command::BaselineRotation { common, test } => resolve(&common, false).and_then(|mut cfg| {
            if let Some(t) = test {
                cfg.test_data = Some(t);
            }
            commands::baseline_rotation(&cfg)
        }),
        Command::SimStudy(c) => resolve(&c, true).and_then(|cfg| commands::sim_study(&cfg)),
        Command::ParseHurdat2(c) => resolve(&c, false).and_then(|cfg| commands::parse_hurdat2(&cfg)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
