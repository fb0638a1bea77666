//! Shared inputs for the benchmarks.

use overlapscope::{BitDepth, Frame, Label};

/// Deterministic 8-bit frame with a mild texture.
pub fn textured_frame(size: usize, salt: u64) -> Frame {
    let data = (0..size * size)
        .map(|i| (((i as u64).wrapping_mul(2_654_435_761).wrapping_add(salt * 977)) % 200 + 30) as f64)
        .collect();
    Frame::new(size, size, 1, BitDepth::Quantized(8), data).expect("valid frame")
}

/// Alternating labels with scores that overlap between the classes.
pub fn scored_labels(len: usize) -> (Vec<f64>, Vec<Label>) {
    let labels: Vec<Label> = (0..len).map(|i| if i % 3 == 0 { Label::Positive } else { Label::Negative }).collect();
    let scores = labels
        .iter()
        .enumerate()
        .map(|(i, l)| ((i * 7919) % 1000) as f64 / 1000.0 * 0.8 + if l.is_positive() { 0.2 } else { 0.0 })
        .collect();
    (scores, labels)
}
