//! Evaluation: ROC and threshold selection, confusion counts, sliding-window
//! heatmaps, trace contrast and accuracy-versus-overlap sweeps.

mod contrast;
mod heatmap;
mod roc;
mod sweep;

pub use contrast::{bar_target, profile_contrast, trace_contrast, trace_profile, TRACE_ROWS};
pub use heatmap::{grid_len, sliding_heatmap, Heatmap, HitRate};
pub use roc::{confusion, gmean_threshold, roc_curve, write_roc_csv, ConfusionReport, GmeanThreshold, RocPoint, RocResult};
pub use sweep::{accuracy_vs_n, score_patches, write_sweep_csv, SweepConfig, SweepEntry, SweepRow};
