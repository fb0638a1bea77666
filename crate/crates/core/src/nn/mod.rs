//! Ten-layer convolutional binary detector trained from scratch on the CPU.
//!
//! Activations are stored channel-major (`[C, B, H, W]`) and convolutions run
//! as im2col followed by a matrix product.

mod arch;
mod gradcheck;
mod io;
mod model;
mod network;
mod params;
mod scalar;
mod train;

pub use arch::{ArchitectureSpec, ConvShape, DEFAULT_CHANNELS, DEFAULT_LEAKY_SLOPE};
pub use gradcheck::{gradient_check, micro_architecture, GradCheckReport};
pub use io::{decode_weights, encode_weights, load_weights, save_weights, TensorEntry, WeightsHeader};
pub use model::{build_model, pack_batch, predict_ensemble, DetectorModel, Ensemble, PatchScorer};
pub use params::{layout, ParamSet, Slot};
pub use scalar::Scalar;
pub use train::{
    evaluate, read_history_csv, train, write_history_csv, EpochStats, Optimizer, TrainConfig, TrainOutcome,
};
