//! Digital overlap synthesis with shot-noise-correct statistics.
//!
//! Averaging `n` independently exposed frames shrinks shot-noise variance by
//! `n` relative to a single exposure collecting the same photons. Adding
//! zero-mean Gaussian noise with variance `X_avg (1 - 1/n) 2^n_bit / v` at each
//! pixel restores it; [`poisson_oracle`] checks that claim by simulation in the
//! photoelectron domain.

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::frame::{max_level, BitDepth, Frame};
use crate::optics::SensorModel;
use crate::rng::{self, tag};

/// Per-pixel arithmetic mean of equally shaped frames.
pub fn average_stack(frames: &[Frame]) -> Result<Frame> {
    let first = frames.first().ok_or_else(|| Error::InvalidArgument("cannot average an empty stack".into()))?;
    let shape = first.shape();
    if let Some(f) = frames.iter().find(|f| f.shape() != shape) {
        return invalid(format!("stack shape mismatch: {:?} vs {:?}", f.shape(), shape));
    }
    let mut acc = first.data().to_vec();
    for f in &frames[1..] {
        acc.iter_mut().zip(f.data()).for_each(|(a, b)| *a += b);
    }
    let inv = 1.0 / frames.len() as f64;
    acc.iter_mut().for_each(|a| *a *= inv);
    let (w, h, c) = shape;
    Ok(Frame::from_parts_unchecked(w, h, c, BitDepth::Real, acc))
}

/// Standard deviation (digital numbers) of the compensation noise at one pixel.
pub fn compensation_sigma(x_avg: f64, n: usize, sensor: &SensorModel) -> Result<f64> {
    if x_avg < 0.0 || x_avg.is_nan() {
        return invalid(format!("pixel value must be non-negative, got {x_avg}"));
    }
    if n == 0 {
        return invalid("overlap number must be at least 1");
    }
    Ok(compensation_variance_unchecked(x_avg, n, sensor).sqrt())
}

#[inline]
fn compensation_variance_unchecked(x_avg: f64, n: usize, sensor: &SensorModel) -> f64 {
    x_avg * (1.0 - 1.0 / n as f64) * sensor.gain()
}

/// Round half to even, then clamp to `[0, 2^n_bit - 1]`.
pub fn quantize(frame: &Frame, n_bit: u8) -> Frame {
    let max = max_level(n_bit);
    let data = frame.data().iter().map(|&v| quantize_value(v, max)).collect();
    let (w, h, c) = frame.shape();
    Frame::from_parts_unchecked(w, h, c, BitDepth::Quantized(n_bit), data)
}

#[inline]
fn quantize_value(v: f64, max: f64) -> f64 {
    if v.is_nan() {
        return 0.0;
    }
    v.round_ties_even().clamp(0.0, max)
}

/// Simulate an `n`-fold overlapped exposure from `n` single-FOV frames.
///
/// Each row draws from its own seeded stream, so the output does not depend
/// on how rows are scheduled across threads. Channels are treated independently.
pub fn synthesize_overlap(frames: &[Frame], sensor: &SensorModel, seed: u64) -> Result<Frame> {
    sensor.validate()?;
    for f in frames {
        if f.depth() != BitDepth::Quantized(sensor.n_bit) {
            return invalid(format!(
                "overlap inputs must be quantized at {} bits, got {:?}",
                sensor.n_bit,
                f.depth()
            ));
        }
    }
    let avg = average_stack(frames)?;
    let n = frames.len();
    let (w, h, c) = avg.shape();
    let max = max_level(sensor.n_bit);
    let mut data = avg.into_data();
    if n > 1 {
        let row_len = w * c;
        let k_gain = (1.0 - 1.0 / n as f64) * sensor.gain();
        data.par_chunks_mut(row_len.max(1)).enumerate().for_each(|(row, pixels)| {
            let mut rng = rng::stream(seed, &[tag::NOISE_ROW, row as u64]);
            for v in pixels.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *v = quantize_value(*v + z * (*v * k_gain).sqrt(), max);
            }
        });
    } else {
        data.iter_mut().for_each(|v| *v = quantize_value(*v, max));
    }
    Ok(Frame::from_parts_unchecked(w, h, c, BitDepth::Quantized(sensor.n_bit), data))
}

/// Sample moments of the physical and simulated photon counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleStats {
    pub n: usize,
    pub lambda_total: f64,
    pub mean_real: f64,
    pub var_real: f64,
    pub mean_sim: f64,
    pub var_sim: f64,
    pub trials: u64,
}

impl OracleStats {
    pub fn mean_error(&self) -> f64 {
        (self.mean_sim - self.lambda_total).abs() / self.lambda_total
    }

    pub fn var_error(&self) -> f64 {
        (self.var_sim - self.lambda_total).abs() / self.lambda_total
    }

    pub fn within(&self, mean_tol: f64, var_tol: f64) -> bool {
        self.mean_error() <= mean_tol && self.var_error() <= var_tol
    }
}

/// Trials per independently seeded block.
const ORACLE_BLOCK: u64 = 1 << 14;

#[derive(Default, Clone, Copy)]
struct Moments {
    count: f64,
    // Offsets from a fixed pivot keep the sums well conditioned.
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1.0;
        self.sum += x;
        self.sum_sq += x * x;
    }

    fn merge(self, o: Moments) -> Moments {
        Moments { count: self.count + o.count, sum: self.sum + o.sum, sum_sq: self.sum_sq + o.sum_sq }
    }

    fn mean_var(&self, pivot: f64) -> (f64, f64) {
        let m = self.sum / self.count;
        let var = if self.count > 1.0 {
            ((self.sum_sq - self.count * m * m) / (self.count - 1.0)).max(0.0)
        } else {
            0.0
        };
        (m + pivot, var)
    }
}

/// Monte Carlo comparison of a true `n`-FOV overlapped exposure against the
/// averaged-plus-compensation-noise simulation, in photoelectrons.
///
/// Physical path: `x_real ~ Pois(sum lambda_q)`. Simulated path: each FOV is
/// exposed at `n` times the intensity, `x_q' ~ Pois(n lambda_q)`, averaged to
/// `x_sim`, then `x_sim' = x_sim + Z` with `Z | x_sim ~ N(0, (1 - 1/n) x_sim)`.
pub fn poisson_oracle(lambdas: &[f64], trials: u64, seed: u64) -> Result<OracleStats> {
    if lambdas.is_empty() {
        return invalid("at least one rate is required");
    }
    if let Some(l) = lambdas.iter().find(|&&l| !(l > 0.0 && l.is_finite())) {
        return invalid(format!("rates must be positive, got {l}"));
    }
    if trials == 0 {
        return invalid("trials must be at least 1");
    }
    let n = lambdas.len();
    let nf = n as f64;
    let total: f64 = lambdas.iter().sum();
    let real = Poisson::new(total).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let boosted = lambdas
        .iter()
        .map(|&l| Poisson::new(nf * l).map_err(|e| Error::InvalidArgument(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let k = 1.0 - 1.0 / nf;

    let blocks = trials.div_ceil(ORACLE_BLOCK);
    let (real_m, sim_m) = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng::stream(seed, &[tag::ORACLE, b]);
            let count = ORACLE_BLOCK.min(trials - b * ORACLE_BLOCK);
            let (mut rm, mut sm) = (Moments::default(), Moments::default());
            for _ in 0..count {
                let x_real: f64 = real.sample(&mut rng);
                let x_sim = boosted.iter().map(|p| p.sample(&mut rng)).sum::<f64>() / nf;
                let z: f64 = rng.sample::<f64, _>(StandardNormal) * (k * x_sim).sqrt();
                rm.push(x_real - total);
                sm.push(x_sim + z - total);
            }
            (rm, sm)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((Moments::default(), Moments::default()), |(ra, sa), (rb, sb)| (ra.merge(rb), sa.merge(sb)));

    let (mean_real, var_real) = real_m.mean_var(total);
    let (mean_sim, var_sim) = sim_m.mean_var(total);
    Ok(OracleStats { n, lambda_total: total, mean_real, var_real, mean_sim, var_sim, trials })
}

/// `n` equal rates summing to `lambda_total`.
pub fn equal_rates(lambda_total: f64, n: usize) -> Vec<f64> {
    vec![lambda_total / n as f64; n]
}
