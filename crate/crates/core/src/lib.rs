//! Simulation and analysis toolkit for overlapped multi-lens microscopy.
//!
//! Several sub-lenses image disjoint regions of a specimen onto one sensor.
//! This crate covers the design arithmetic of such a system ([`optics`]),
//! shot-noise-correct synthesis of overlapped frames ([`noise`]), procedural
//! specimens and labeled patch datasets ([`phantom`], [`dataset`]), a small
//! convolutional detector trained from scratch ([`nn`]), and the evaluation
//! procedures used to measure accuracy against the overlap number ([`eval`]).

pub mod dataset;
pub mod error;
pub mod eval;
pub mod frame;
pub mod nn;
pub mod noise;
pub mod optics;
pub mod phantom;
pub mod pnm;
pub mod rng;

pub use dataset::{Label, LabeledPatch, PatchGrid, PatchSource, Split};
pub use error::{Error, Result};
pub use frame::{BitDepth, Frame};
pub use nn::{ArchitectureSpec, DetectorModel, Ensemble, TrainConfig};

pub use optics::{DesignReport, LensArrayDesign, SensorModel};
