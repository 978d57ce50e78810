//! The `phonecal` command line.
//!
//! Every subcommand writes its machine-readable JSON report (with an embedded
//! [`RunManifest`]) to `--report FILE`, or to standard output when no report
//! file is given. Diagnostics go to standard error.

mod commands;
mod manifest;

pub use commands::{
    calibrate, caveat, confusion, crosscal, eval, pool, reduce, synth, CalibrateReport,
    CaveatReport, ConfusionReport, CrossCalReport, CrossCalSide, EvalOutput, PoolReport,
    ReduceReport, SynthReport,
};
pub use manifest::RunManifest;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::Result;
use crate::likelihood::DEFAULT_FLOOR;
use crate::pooling::PoolingMethod;

#[derive(Debug, Parser)]
#[command(
    name = "phonecal",
    version,
    about = "Phone-likelihood calibration analysis"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Reduce pdf-id posteriors to phone frame log-likelihood matrices.
    Reduce(ReduceArgs),
    /// Pool frame log-likelihoods over aligned segments into a trials file.
    Pool(PoolArgs),
    /// Class-balanced cross entropy of a trials file.
    Eval(EvalArgs),
    /// Fit an affine calibration transform (self-calibration).
    Calibrate(CalibrateArgs),
    /// Fit on each of two sets and evaluate on the other.
    Crosscal(CrossCalArgs),
    /// Pairwise-EER confusion matrix as CSV and PGM.
    Confusion(ConfusionArgs),
    /// Write a synthetic corpus in the on-disk formats.
    Synth(SynthArgs),
    /// Cross entropy with shuffled labels, before and after self-calibration.
    Caveat(CaveatArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-7)]
    pub tol: f64,
    /// Ridge penalty on the offsets (0 = off).
    #[arg(long, default_value_t = 0.0)]
    pub ridge: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReduceArgs {
    /// Directory of per-utterance posterior matrices (.fpm or .csv).
    #[arg(long)]
    pub posteriors: PathBuf,
    #[arg(long)]
    pub pdf_map: PathBuf,
    #[arg(long)]
    pub pdf_priors: PathBuf,
    #[arg(long)]
    pub phones: PathBuf,
    /// Output directory for .fll matrices.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_FLOOR)]
    pub floor: f64,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PoolArgs {
    /// Directory of per-utterance log-likelihood matrices (.fll or .csv).
    #[arg(long)]
    pub llk: PathBuf,
    #[arg(long)]
    pub alignment: PathBuf,
    #[arg(long)]
    pub phones: PathBuf,
    #[arg(long, value_enum, default_value_t = PoolingMethod::Mean)]
    pub method: PoolingMethod,
    /// Output trials file (JSON lines).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub trials: PathBuf,
    #[arg(long)]
    pub phones: PathBuf,
    /// Calibration transform JSON to apply before scoring.
    #[arg(long)]
    pub transform: Option<PathBuf>,
    /// Evaluation prior, one value per phone; flat by default.
    #[arg(long)]
    pub prior: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub trials: PathBuf,
    #[arg(long)]
    pub phones: PathBuf,
    /// Where to write the fitted transform JSON.
    #[arg(long)]
    pub transform_out: PathBuf,
    #[arg(long)]
    pub prior: Option<PathBuf>,
    #[command(flatten)]
    pub fit: FitArgs,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CrossCalArgs {
    #[arg(long)]
    pub trials_a: PathBuf,
    #[arg(long)]
    pub trials_b: PathBuf,
    #[arg(long)]
    pub phones: PathBuf,
    #[arg(long)]
    pub prior: Option<PathBuf>,
    #[command(flatten)]
    pub fit: FitArgs,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ConfusionArgs {
    #[arg(long)]
    pub trials: PathBuf,
    #[arg(long)]
    pub phones: PathBuf,
    /// `all`, `vowels`, `consonants` (ARPAbet), or a file with one label per line.
    #[arg(long, default_value = "all")]
    pub subset: String,
    /// Split target rows by the stress tag of each token.
    #[arg(long)]
    pub stress_split: bool,
    #[arg(long)]
    pub csv: PathBuf,
    #[arg(long)]
    pub pgm: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    /// Generator config JSON.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the seed in the config file.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 50)]
    pub trials_per_utterance: usize,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CaveatArgs {
    #[arg(long)]
    pub trials: PathBuf,
    #[arg(long)]
    pub phones: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub prior: Option<PathBuf>,
    #[command(flatten)]
    pub fit: FitArgs,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

fn emit<T: Serialize>(report: &T, path: Option<&PathBuf>, stdout: &mut dyn Write) -> Result<()> {
    let text = serde_json::to_string_pretty(report)?;
    match path {
        Some(p) => std::fs::write(p, text + "\n")?,
        None => writeln!(stdout, "{text}")?,
    }
    Ok(())
}

/// Runs one subcommand, writing its report to `--report` or `stdout`.
pub fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Reduce(a) => emit(&reduce(a)?, a.report.as_ref(), stdout),
        Command::Pool(a) => emit(&pool(a)?, a.report.as_ref(), stdout),
        Command::Eval(a) => emit(&eval(a)?, a.report.as_ref(), stdout),
        Command::Calibrate(a) => emit(&calibrate(a)?, a.report.as_ref(), stdout),
        Command::Crosscal(a) => emit(&crosscal(a)?, a.report.as_ref(), stdout),
        Command::Confusion(a) => emit(&confusion(a)?, a.report.as_ref(), stdout),
        Command::Synth(a) => emit(&synth(a)?, a.report.as_ref(), stdout),
        Command::Caveat(a) => emit(&caveat(a)?, a.report.as_ref(), stdout),
    }
}
