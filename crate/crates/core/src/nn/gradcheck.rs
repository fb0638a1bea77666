//! Finite-difference verification of the analytic gradients.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::arch::ArchitectureSpec;
use super::model::build_model;
use super::network;
use super::params::ParamSet;
use crate::error::Result;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter tensor and index holding the largest error.
    pub worst: String,
    pub params_checked: usize,
}

/// Examples in the verification batch.
const CHECK_BATCH: usize = 3;

/// Gradients smaller than this are compared on an absolute scale.
const REL_FLOOR: f64 = 1e-6;

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compare every analytic gradient entry with a central difference
/// `(L(w + eps) - L(w - eps)) / 2 eps`, all in 64-bit arithmetic.
///
/// Weights come from [`build_model`] at `seed`; biases, inputs and labels are
/// drawn from the same seed so that every parameter receives gradient.
pub fn gradient_check(arch: &ArchitectureSpec, seed: u64, epsilon: f64) -> Result<GradCheckReport> {
    let model = build_model(arch, seed)?;
    let mut params: ParamSet<f64> = model.params.cast();
    let mut rng = rng::stream(seed, &[0x6772_6164]);
    for l in 0..arch.convs().len() {
        for b in params.slice_mut(2 * l + 1) {
            *b = rng.random_range(-0.1..0.1);
        }
    }
    let n_input = arch.input_channels * CHECK_BATCH * arch.input_size * arch.input_size;
    let input: Vec<f64> = (0..n_input).map(|_| rng.random::<f64>()).collect();
    let targets: Vec<f64> = (0..CHECK_BATCH).map(|i| (i % 2) as f64).collect();

    let (_, _, analytic) = network::loss_and_grad(arch, &params, &input, &targets);
    let loss_at = |p: &ParamSet<f64>| {
        let fwd = network::forward(arch, p, &input, CHECK_BATCH, false);
        network::bce(&fwd.logits, &targets)
    };

    let mut max_rel_error: f64 = 0.0;
    let mut worst = String::new();
    for slot in 0..params.slots.len() {
        let offset = params.slots[slot].offset;
        for i in 0..params.slots[slot].len {
            let original = params.data[offset + i];
            params.data[offset + i] = original + epsilon;
            let up = loss_at(&params);
            params.data[offset + i] = original - epsilon;
            let down = loss_at(&params);
            params.data[offset + i] = original;
            let numeric = (up - down) / (2.0 * epsilon);
            let err = relative_error(analytic.data[offset + i], numeric);
            if err > max_rel_error {
                max_rel_error = err;
                worst = format!("{}[{i}]", params.slots[slot].name);
            }
        }
    }
    Ok(GradCheckReport { max_rel_error, worst, params_checked: params.len() })
}

/// Small random architecture suitable for finite differences.
pub fn micro_architecture(seed: u64) -> ArchitectureSpec {
    let mut rng = rng::stream(seed, &[0x006d_6963_726f]);
    let depth = rng.random_range(1..=2usize);
    ArchitectureSpec {
        input_size: rng.random_range(8..=11),
        input_channels: if rng.random_bool(0.3) { 3 } else { 1 },
        blocks: (0..depth).map(|_| rng.random_range(1..=4)).collect(),
        leaky_slope: rng.random_range(0.01..0.3),
    }
}
