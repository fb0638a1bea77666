use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

/// Simulate overlapped multi-lens microscopy, build labeled datasets, and
/// train and evaluate a patch detector.
#[derive(Debug, Parser)]
#[command(name = "overlapscope", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Command {
    /// Check a lens-array design and print its derived quantities as JSON.
    Design(DesignArgs),
    /// Render specimen phantoms with annotations, optionally overlapped.
    Phantom(PhantomArgs),
    /// Build an overlapped patch dataset split by specimen group.
    Overlap(OverlapArgs),
    /// Monte Carlo check of the compensation-noise model.
    Oracle(OracleArgs),
    /// Train one detector on a dataset written by `overlap`.
    Train(TrainArgs),
    /// Accuracy versus overlap number with seed ensembles.
    Sweep(SweepArgs),
    /// Sliding-window probability map of a frame.
    Heatmap(HeatmapArgs),
    /// Repeat a previous run from its run.json.
    #[serde(skip)]
    Rerun(RerunArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct OutArgs {
    /// Output directory (created if missing)
    #[arg(long, default_value = "overlapscope-out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SensorArgs {
    /// Sensor bit depth (bits): 8, 10, 12 or 16
    #[arg(long, default_value_t = 8)]
    pub n_bit: u8,
    /// Pixel full-well capacity (photoelectrons)
    #[arg(long, default_value_t = 10_000.0)]
    pub well_depth: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct PhantomShapeArgs {
    /// Number of phantom frames, one specimen group each
    #[arg(long, default_value_t = 24)]
    pub frames: u32,
    /// Side of each square phantom frame (pixels)
    #[arg(long, default_value_t = 512)]
    pub frame_size: usize,
    /// Targets per phantom frame (count)
    #[arg(long, default_value_t = 12)]
    pub targets: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct PatchArgs {
    /// Side of each square patch (pixels)
    #[arg(long, default_value_t = 32)]
    pub patch_size: usize,
    /// Side of the centred labeling region as a fraction of the patch side (ratio)
    #[arg(long, default_value_t = 1.0 / 3.0)]
    pub inner_fraction: f64,
    /// Distance between neighbouring patch origins (pixels)
    #[arg(long, default_value_t = 8)]
    pub stride: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerArg {
    Adam,
    SgdMomentum,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct TrainerArgs {
    /// Passes over the training set (count)
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    /// Optimizer step size (dimensionless)
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// Examples per gradient step (count)
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    /// Parameter update rule
    #[arg(long, value_enum, default_value_t = OptimizerArg::Adam)]
    pub optimizer: OptimizerArg,
    /// Disable random flips and quarter turns of training patches
    #[arg(long)]
    pub no_augment: bool,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct DesignArgs {
    /// Design JSON with `design`, `sensor` and optional `wavelength_um`; the
    /// prototype is used when omitted
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override the overlap number (count)
    #[arg(long)]
    pub n: Option<u32>,
    /// Override the sensor bit depth (bits)
    #[arg(long)]
    pub n_bit: Option<u8>,
    /// Override the sensor full-well capacity (photoelectrons)
    #[arg(long)]
    pub well_depth: Option<f64>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct PhantomArgs {
    /// Random seed (integer)
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Frames overlapped into each composite (count); 1 writes singles only
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[command(flatten)]
    pub shape: PhantomShapeArgs,
    #[command(flatten)]
    pub sensor: SensorArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct OverlapArgs {
    /// Random seed (integer)
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Overlap number (count of superimposed fields of view)
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    /// Group fractions for train, val and test (ratios summing to 1)
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0.7, 0.15, 0.15])]
    pub split: Vec<f64>,
    /// Composed training examples per class (count)
    #[arg(long, default_value_t = 500)]
    pub per_class: usize,
    /// Composed validation and test examples per class (count)
    #[arg(long, default_value_t = 150)]
    pub val_per_class: usize,
    #[command(flatten)]
    pub shape: PhantomShapeArgs,
    #[command(flatten)]
    pub patch: PatchArgs,
    #[command(flatten)]
    pub sensor: SensorArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct OracleArgs {
    /// Random seed (integer)
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Single overlap number (count); takes precedence over --n-list
    #[arg(long)]
    pub n: Option<usize>,
    /// Overlap numbers to test (counts, comma separated)
    #[arg(long, value_delimiter = ',', default_values_t = [2usize, 4, 7])]
    pub n_list: Vec<usize>,
    /// Total photon rates to test (photoelectrons, comma separated)
    #[arg(long, value_delimiter = ',', default_values_t = [50.0, 200.0, 1000.0])]
    pub lambda_list: Vec<f64>,
    /// Monte Carlo trials per cell (count)
    #[arg(long, default_value_t = 1_000_000)]
    pub trials: u64,
    /// Largest accepted relative error of the simulated mean (ratio)
    #[arg(long, default_value_t = 0.01)]
    pub mean_tol: f64,
    /// Largest accepted relative error of the simulated variance (ratio)
    #[arg(long, default_value_t = 0.02)]
    pub var_tol: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    /// Dataset directory holding train.json and val.json
    #[arg(long)]
    pub dataset: PathBuf,
    /// Random seed for initialisation and shuffling (integer)
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub trainer: TrainerArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    /// Random seed (integer)
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Overlap numbers to evaluate (counts, comma separated)
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 4, 7])]
    pub n_list: Vec<usize>,
    /// Share of specimen groups used for training; the rest validate (ratio)
    #[arg(long, default_value_t = 0.7)]
    pub train_fraction: f64,
    /// Composed training examples per class at each n (count)
    #[arg(long, default_value_t = 400)]
    pub per_class: usize,
    /// Composed validation examples per class at each n (count)
    #[arg(long, default_value_t = 200)]
    pub val_per_class: usize,
    /// Independently seeded models averaged at each n (count)
    #[arg(long, default_value_t = 3)]
    pub ensemble: usize,
    #[command(flatten)]
    pub shape: PhantomShapeArgs,
    #[command(flatten)]
    pub patch: PatchArgs,
    #[command(flatten)]
    pub sensor: SensorArgs,
    #[command(flatten)]
    pub trainer: TrainerArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct HeatmapArgs {
    /// Weights files whose probabilities are averaged (comma separated or repeated)
    #[arg(long, value_delimiter = ',', required = true)]
    pub weights: Vec<PathBuf>,
    /// Grayscale or color PNM frame to scan
    #[arg(long)]
    pub input: PathBuf,
    /// Distance between neighbouring windows (pixels)
    #[arg(long, default_value_t = 10)]
    pub step: usize,
    /// Annotation CSV; when given, target hits are reported
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    /// Only use annotation rows with this frame id
    #[arg(long)]
    pub frame_id: Option<String>,
    /// Probability at or above which a cell counts as a detection (probability)
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct RerunArgs {
    /// run.json written by an earlier invocation
    pub run_json: PathBuf,
    /// Write outputs here instead of the recorded directory
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

impl Command {
    pub fn out_dir_mut(&mut self) -> Option<&mut PathBuf> {
        match self {
            Command::Design(a) => Some(&mut a.out.out_dir),
            Command::Phantom(a) => Some(&mut a.out.out_dir),
            Command::Overlap(a) => Some(&mut a.out.out_dir),
            Command::Oracle(a) => Some(&mut a.out.out_dir),
            Command::Train(a) => Some(&mut a.out.out_dir),
            Command::Sweep(a) => Some(&mut a.out.out_dir),
            Command::Heatmap(a) => Some(&mut a.out.out_dir),
            Command::Rerun(_) => None,
        }
    }
}
