//! Command-line arguments.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use vidapprox_core::baselines::Method;
use vidapprox_core::learner::Profile;
use vidapprox_core::randm::RandomMMode;
use vidapprox_core::KernelFamily;

/// Unsupervised per-video action segmentation with learned MMD video approximations.
#[derive(Debug, Parser)]
#[command(name = "vidapprox", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the moving-glyph synthetic dataset (train/val/test).
    Gen(GenArgs),
    /// Segment one video.
    Segment(SegmentArgs),
    /// Score a stored segmentation, or aggregate stored reports into CSV.
    Eval(EvalArgs),
    /// Segment every video of a directory with a randomly perturbed m.
    Randm(RandmArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Videos per split.
    #[arg(long, default_value_t = 50)]
    pub videos: usize,
    /// Standard deviation of additive pixel noise.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 3)]
    pub max_repeats: usize,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub kernel: Option<KernelFamily>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub wd: Option<f64>,
    /// Temporal smoothing factor s; 0 disables smoothing.
    #[arg(long)]
    pub smooth: Option<f64>,
    /// Preset for smoothing and schedule: long, short, synthetic or raw.
    #[arg(long)]
    pub profile: Option<Profile>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Keep the uniform-segment means as the approximation.
    #[arg(long)]
    pub no_train: bool,
    #[arg(long)]
    pub baseline: Option<Method>,
    /// Fixed Gaussian length-scale instead of the median heuristic.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// L2-normalize frames after smoothing.
    #[arg(long)]
    pub normalize: bool,
    /// Keep synthetic frames at unit norm during training.
    #[arg(long)]
    pub unit_prototypes: bool,
    /// Ground-truth label excluded from evaluation.
    #[arg(long)]
    pub exclude_bg: Option<String>,
    #[arg(long, default_value_t = 3)]
    pub boundary_tol: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Segmentation JSON written by `segment`.
    #[arg(long, requires = "labels", conflicts_with = "aggregate")]
    pub pred: Option<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub exclude_bg: Option<String>,
    #[arg(long, default_value_t = 3)]
    pub boundary_tol: usize,
    /// Report or segmentation JSON files to summarize into one CSV.
    #[arg(long, num_args = 1..)]
    pub aggregate: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RandmArgs {
    /// Directory of `<name>.features.txt` files with matching `<name>.labels.txt`.
    #[arg(long)]
    pub features_dir: PathBuf,
    #[arg(long)]
    pub mbar: usize,
    #[arg(long)]
    pub mode: RandomMMode,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[arg(long)]
    pub baseline: Option<Method>,
    #[arg(long)]
    pub smooth: Option<f64>,
    #[arg(long)]
    pub exclude_bg: Option<String>,
    #[arg(long, default_value_t = 3)]
    pub boundary_tol: usize,
    /// Also write one segmentation JSON per video here.
    #[arg(long)]
    pub json_dir: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}
