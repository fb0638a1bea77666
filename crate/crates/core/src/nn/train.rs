//! Mini-batch training with deterministic shuffling and augmentation.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::arch::ArchitectureSpec;
use super::model::{clip_prob, DetectorModel};
use super::network::{self, sigmoid};
use super::params::ParamSet;
use crate::dataset::LabeledPatch;
use crate::error::{invalid, Error, Result};
use crate::frame::Frame;
use crate::rng::{self, tag};

/// Examples per gradient work unit. Fixed so that the reduction order does not
/// depend on the number of worker threads.
const GRAD_CHUNK: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    Adam,
    SgdMomentum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    #[serde(default = "default_betas")]
    pub betas: (f64, f64),
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    /// Random flips and quarter turns of each training patch, redrawn every epoch.
    #[serde(default = "default_augment")]
    pub augment: bool,
}

fn default_betas() -> (f64, f64) {
    (0.9, 0.999)
}

fn default_momentum() -> f64 {
    0.9
}

fn default_augment() -> bool {
    true
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: Optimizer::Adam,
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 10,
            seed: 0,
            betas: default_betas(),
            momentum: default_momentum(),
            augment: default_augment(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return invalid(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            return invalid("batch_size must be at least 1");
        }
        let (b1, b2) = self.betas;
        if !((0.0..1.0).contains(&b1) && (0.0..1.0).contains(&b2)) {
            return invalid(format!("betas must lie in [0, 1), got {:?}", self.betas));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return invalid(format!("momentum must lie in [0, 1), got {}", self.momentum));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Weights from the epoch with the best validation accuracy.
    pub model: DetectorModel,
    pub best_epoch: usize,
    pub history: Vec<EpochStats>,
}

/// Index map for one of the eight symmetries of the square: `k & 3` quarter
/// turns, then a horizontal flip when `k & 4` is set.
fn dihedral_index(k: u8, x: usize, y: usize, s: usize) -> (usize, usize) {
    let (mut x, mut y) = (x, y);
    for _ in 0..(k & 3) {
        (x, y) = (s - 1 - y, x);
    }
    if k & 4 != 0 {
        x = s - 1 - x;
    }
    (x, y)
}

/// Pack `(frame, symmetry)` pairs into the `[C, B, H, W]` layout.
fn pack_transformed(arch: &ArchitectureSpec, items: &[(&Frame, u8)]) -> Result<Vec<f32>> {
    let (s, c) = (arch.input_size, arch.input_channels);
    let b = items.len();
    let mut out = vec![0.0f32; c * b * s * s];
    for (bi, &(f, k)) in items.iter().enumerate() {
        if f.shape() != (s, s, c) {
            return invalid(format!("detector expects {s}x{s}x{c} input, got {:?}", f.shape()));
        }
        let norm = f.normalized();
        for y in 0..s {
            for x in 0..s {
                let (sx, sy) = dihedral_index(k, x, y, s);
                for ci in 0..c {
                    out[((ci * b + bi) * s + y) * s + x] = norm[(sy * s + sx) * c + ci] as f32;
                }
            }
        }
    }
    Ok(out)
}

/// Mean loss, logits and summed-then-averaged gradient over one mini-batch.
fn batch_gradient(
    model: &DetectorModel,
    items: &[(&Frame, u8)],
    targets: &[f64],
) -> Result<(f64, Vec<f64>, ParamSet<f32>)> {
    let total = items.len() as f64;
    let parts: Vec<(f64, Vec<f64>, ParamSet<f32>)> = items
        .par_chunks(GRAD_CHUNK)
        .zip(targets.par_chunks(GRAD_CHUNK))
        .map(|(chunk, t)| {
            let input = pack_transformed(&model.arch, chunk)?;
            Ok(network::loss_and_grad(&model.arch, &model.params, &input, t))
        })
        .collect::<Result<_>>()?;
    let mut grads = model.params.zeros_like();
    let mut loss = 0.0;
    let mut logits = Vec::with_capacity(items.len());
    for ((l, z, g), t) in parts.into_iter().zip(targets.chunks(GRAD_CHUNK)) {
        let w = t.len() as f64 / total;
        loss += l * w;
        logits.extend(z);
        let wf = w as f32;
        for (a, b) in grads.data.iter_mut().zip(&g.data) {
            *a += b * wf;
        }
    }
    Ok((loss, logits, grads))
}

struct OptimizerState {
    first: Vec<f32>,
    second: Vec<f32>,
    step: i32,
}

impl OptimizerState {
    fn new(len: usize) -> Self {
        Self { first: vec![0.0; len], second: vec![0.0; len], step: 0 }
    }

    fn apply(&mut self, cfg: &TrainConfig, params: &mut [f32], grads: &[f32]) {
        self.step += 1;
        let lr = cfg.learning_rate;
        match cfg.optimizer {
            Optimizer::Adam => {
                let (b1, b2) = cfg.betas;
                let c1 = 1.0 - b1.powi(self.step);
                let c2 = 1.0 - b2.powi(self.step);
                for i in 0..params.len() {
                    let g = grads[i] as f64;
                    let m = b1 * self.first[i] as f64 + (1.0 - b1) * g;
                    let v = b2 * self.second[i] as f64 + (1.0 - b2) * g * g;
                    self.first[i] = m as f32;
                    self.second[i] = v as f32;
                    let update = lr * (m / c1) / ((v / c2).sqrt() + 1e-8);
                    params[i] = (params[i] as f64 - update) as f32;
                }
            }
            Optimizer::SgdMomentum => {
                for i in 0..params.len() {
                    let v = cfg.momentum * self.first[i] as f64 + grads[i] as f64;
                    self.first[i] = v as f32;
                    params[i] = (params[i] as f64 - lr * v) as f32;
                }
            }
        }
    }
}

fn accuracy(probs: &[f64], targets: &[f64]) -> f64 {
    let hits = probs.iter().zip(targets).filter(|(&p, &y)| (p >= 0.5) == (y >= 0.5)).count();
    hits as f64 / probs.len().max(1) as f64
}

/// Mean loss and accuracy of `model` on `patches`, without augmentation.
pub fn evaluate(model: &DetectorModel, patches: &[LabeledPatch]) -> Result<(f64, f64)> {
    let frames: Vec<&Frame> = patches.iter().map(|p| &p.pixels).collect();
    let probs = model.predict_refs(&frames)?;
    let targets: Vec<f64> = patches.iter().map(|p| p.label.as_f64()).collect();
    let loss = probs
        .iter()
        .zip(&targets)
        .map(|(&p, &y)| -(y * clip_prob(p).ln() + (1.0 - y) * (1.0 - clip_prob(p)).ln()))
        .sum::<f64>()
        / probs.len().max(1) as f64;
    Ok((loss, accuracy(&probs, &targets)))
}

/// Train `model` and return the weights with the best validation accuracy
/// (earliest epoch wins ties).
pub fn train(
    model: DetectorModel,
    train_set: &[LabeledPatch],
    val_set: &[LabeledPatch],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return invalid("training needs non-empty train and validation sets");
    }
    let mut model = model;
    let mut state = OptimizerState::new(model.params.len());
    let mut best: Option<(f64, usize, ParamSet<f32>)> = None;
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=cfg.epochs {
        let mut rng = rng::stream(cfg.seed, &[tag::SHUFFLE, epoch as u64]);
        order.sort_unstable();
        order.shuffle(&mut rng);
        let syms: Vec<u8> =
            order.iter().map(|_| if cfg.augment { rng.random_range(0..8u8) } else { 0 }).collect();

        let (mut loss_sum, mut hits) = (0.0, 0usize);
        for (idx, sym) in order.chunks(cfg.batch_size).zip(syms.chunks(cfg.batch_size)) {
            let items: Vec<(&Frame, u8)> = idx.iter().zip(sym).map(|(&i, &k)| (&train_set[i].pixels, k)).collect();
            let targets: Vec<f64> = idx.iter().map(|&i| train_set[i].label.as_f64()).collect();
            let (loss, logits, grads) = batch_gradient(&model, &items, &targets)?;
            if !loss.is_finite() || grads.data.iter().any(|g| !g.is_finite()) {
                return Err(Error::TrainingFailure { epoch, reason: format!("loss became {loss}") });
            }
            loss_sum += loss * idx.len() as f64;
            hits += logits.iter().zip(&targets).filter(|(&z, &y)| (sigmoid(z) >= 0.5) == (y >= 0.5)).count();
            state.apply(cfg, &mut model.params.data, &grads.data);
        }
        if model.params.data.iter().any(|w| !w.is_finite()) {
            return Err(Error::TrainingFailure { epoch, reason: "weights became non-finite".into() });
        }

        let (val_loss, val_acc) = evaluate(&model, val_set)?;
        if !val_loss.is_finite() {
            return Err(Error::TrainingFailure { epoch, reason: format!("validation loss became {val_loss}") });
        }
        let n = train_set.len() as f64;
        history.push(EpochStats { epoch, train_loss: loss_sum / n, train_acc: hits as f64 / n, val_loss, val_acc });
        if best.as_ref().is_none_or(|(acc, _, _)| val_acc > *acc) {
            best = Some((val_acc, epoch, model.params.clone()));
        }
    }

    let best_epoch = match best {
        Some((_, epoch, params)) => {
            model.params = params;
            epoch
        }
        None => 0,
    };
    Ok(TrainOutcome { model, best_epoch, history })
}

pub fn write_history_csv(path: &Path, history: &[EpochStats]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in history {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_history_csv(path: &Path) -> Result<Vec<EpochStats>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
