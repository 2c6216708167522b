//! `slfm`: diagnostics, toy training and sampling for spherical latent flow
//! matching.
//!
//! Every command writes a single report to stdout (CSV with a header row, or a
//! JSON array of objects). Logging goes to stderr. Exit codes: 0 success,
//! 2 input or format error, 3 numerical divergence.

pub mod commands;
pub mod error;
pub mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::run;
pub use error::CliError;
pub use report::{Format, Report, ReportRow};

#[derive(Debug, Parser)]
#[command(name = "slfm", version, about = "Spherical latent flow matching toolkit")]
pub struct Cli {
    /// Report format written to stdout.
    #[arg(long, value_enum, default_value_t = Format::Csv, global = true)]
    pub format: Format,
    /// Increase log verbosity on stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analytical norm statistics of standard Gaussian tokens.
    GaussianNorms(GaussianNormsArgs),
    /// Per-token norm statistics of a latent container.
    Stats(StatsArgs),
    /// Norm, off-shell and radial-share profiles along transport paths.
    Paths(PathsArgs),
    /// Direction/radius component-swap hybrids of two containers.
    Swap(SwapArgs),
    /// Train a toy velocity field on a synthetic spherical mixture.
    Train(TrainArgs),
    /// Sample from a trained checkpoint.
    Sample(SampleArgs),
    /// One-step arc deficit of projected Euler against the exponential map.
    Deficit(DeficitArgs),
}

#[derive(Debug, Args)]
pub struct GaussianNormsArgs {
    /// Token dimensions.
    #[arg(value_parser = clap::value_parser!(u32).range(1..))]
    pub dims: Vec<u32>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    pub input: PathBuf,
    /// Radially project every token to this radius first.
    #[arg(long, value_name = "R")]
    pub project: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PathsArgs {
    #[arg(long, default_value = "linear")]
    pub kind: slfm_core::paths::PathKind,
    /// Synthetic endpoints: `sphere:d=<int>,R=<real>` or
    /// `gauss-shells:d=<int>,r0=<real>,r1=<real>,cv=<real>`.
    #[arg(long, value_name = "SPEC", conflicts_with_all = ["z0", "z1"])]
    pub synthetic: Option<slfm_core::diagnostics::SyntheticPairs>,
    /// Noise-endpoint container; drawn from the prior when omitted.
    #[arg(long, requires = "z1")]
    pub z0: Option<PathBuf>,
    /// Data-endpoint container.
    #[arg(long, required_unless_present = "synthetic")]
    pub z1: Option<PathBuf>,
    /// Number of grid points on [0, 1].
    #[arg(long, default_value_t = slfm_core::diagnostics::DEFAULT_GRID)]
    pub grid: usize,
    /// Number of endpoint pairs (synthetic default 2048; containers default to
    /// all tokens).
    #[arg(long)]
    pub pairs: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Override the noise shell as `MEAN,STD`.
    #[arg(long, value_name = "MEAN,STD", requires = "shell1")]
    pub shell0: Option<ShellOverride>,
    /// Override the data shell as `MEAN,STD`.
    #[arg(long, value_name = "MEAN,STD", requires = "shell0")]
    pub shell1: Option<ShellOverride>,
}

/// Externally measured shell statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShellOverride {
    pub mean: f64,
    pub std: f64,
}

impl std::str::FromStr for ShellOverride {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (m, sd) = s.split_once(',').ok_or("expected MEAN,STD")?;
        let mean: f64 = m.trim().parse().map_err(|e| format!("bad mean: {e}"))?;
        let std: f64 = sd.trim().parse().map_err(|e| format!("bad std: {e}"))?;
        if !(mean > 0.0 && mean.is_finite() && std >= 0.0 && std.is_finite()) {
            return Err("mean must be positive and std non-negative".into());
        }
        Ok(Self { mean, std })
    }
}

#[derive(Debug, Args)]
pub struct SwapArgs {
    #[arg(long)]
    pub anchor: PathBuf,
    #[arg(long)]
    pub substitute: PathBuf,
    /// Output for anchor directions at substitute radii.
    #[arg(long)]
    pub out_direction: PathBuf,
    /// Output for substitute directions at anchor radii.
    #[arg(long)]
    pub out_radius: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TimeSamplingArg {
    Uniform,
    LogitNormal,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub seed: u64,
    /// Checkpoint path; the sidecar goes to `<out>.json`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2000)]
    pub steps: usize,
    #[arg(long, default_value_t = 4)]
    pub dim: usize,
    /// Mixture weights; center k sits on coordinate axis k at radius sqrt(d).
    #[arg(long, value_delimiter = ',', default_value = "0.7,0.3")]
    pub weights: Vec<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub spread: f64,
    #[arg(long, default_value_t = 64)]
    pub hidden: usize,
    /// Learn one condition embedding per center instead of a single one.
    #[arg(long)]
    pub conditional: bool,
    #[arg(long, default_value = "slerp")]
    pub loss: slfm_core::flow::LossKind,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 128)]
    pub batch: usize,
    #[arg(long, value_enum, default_value_t = TimeSamplingArg::LogitNormal)]
    pub time_sampling: TimeSamplingArg,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub logit_mean: f64,
    #[arg(long, default_value_t = 1.0)]
    pub logit_std: f64,
    /// Timestep shift s.
    #[arg(long, default_value_t = 1.0)]
    pub shift: f64,
    #[arg(long, default_value_t = 0.0)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 1.0)]
    pub grad_clip: f64,
    /// Steps averaged for the initial and final smoothed loss.
    #[arg(long, default_value_t = 20)]
    pub window: usize,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value = "expmap")]
    pub sampler: slfm_core::flow::Sampler,
    #[arg(long, default_value_t = 50)]
    pub nfe: usize,
    #[arg(long, short, default_value_t = 4096)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub cond: usize,
    /// Also write the samples as a container.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DeficitArgs {
    /// Step size.
    #[arg(long)]
    pub h: f64,
    /// Geodesic speed in radians per unit time, in (0, pi).
    #[arg(long)]
    pub omega: f64,
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
}
