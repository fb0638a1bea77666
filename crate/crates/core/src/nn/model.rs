use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::arch::ArchitectureSpec;
use super::network::{self, sigmoid, PROB_EPS};
use super::params::ParamSet;
use super::scalar::Scalar;
use crate::dataset::Label;
use crate::error::{invalid, Error, Result};
use crate::frame::Frame;
use crate::rng::{self, tag};

/// Examples per forward call during inference.
const INFER_CHUNK: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorModel {
    pub arch: ArchitectureSpec,
    pub init_seed: u64,
    pub params: ParamSet<f32>,
}

/// He-normal initialised detector: kernels `~ N(0, 2 / fan_in)`, zero biases.
pub fn build_model(arch: &ArchitectureSpec, seed: u64) -> Result<DetectorModel> {
    arch.validate()?;
    let mut params = ParamSet::<f32>::zeros(arch);
    let convs = arch.convs();
    let mut fans: Vec<usize> = convs.iter().map(|c| c.fan_in()).collect();
    fans.push(arch.final_channels());
    for (i, fan_in) in fans.into_iter().enumerate() {
        let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
        let mut rng = rng::stream(seed, &[tag::INIT, i as u64]);
        for w in params.slice_mut(2 * i) {
            *w = normal.sample(&mut rng) as f32;
        }
    }
    Ok(DetectorModel { arch: arch.clone(), init_seed: seed, params })
}

/// Pack frames into the `[C, B, H, W]` layout, scaled to `[0, 1]`.
pub fn pack_batch<T: Scalar>(arch: &ArchitectureSpec, frames: &[&Frame]) -> Result<Vec<T>> {
    let (s, c) = (arch.input_size, arch.input_channels);
    let b = frames.len();
    let mut out = vec![T::zero(); c * b * s * s];
    for (bi, f) in frames.iter().enumerate() {
        if f.shape() != (s, s, c) {
            return invalid(format!("detector expects {s}x{s}x{c} input, got {:?}", f.shape()));
        }
        let norm = f.normalized();
        for (p, px) in norm.chunks(c).enumerate() {
            for (ci, &v) in px.iter().enumerate() {
                out[(ci * b + bi) * s * s + p] = T::of_f64(v);
            }
        }
    }
    Ok(out)
}

pub(crate) fn clip_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

impl DetectorModel {
    pub fn build(arch: &ArchitectureSpec, seed: u64) -> Result<Self> {
        build_model(arch, seed)
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Logits for an already packed batch.
    pub(crate) fn logits_packed(&self, input: &[f32], batch: usize) -> Vec<f64> {
        network::forward(&self.arch, &self.params, input, batch, false)
            .logits
            .into_iter()
            .map(f64::from)
            .collect()
    }

    /// Positive-class probabilities, clipped to `[eps, 1 - eps]`.
    pub fn forward(&self, frames: &[Frame]) -> Result<Vec<f64>> {
        let refs: Vec<&Frame> = frames.iter().collect();
        self.predict_refs(&refs)
    }

    pub(crate) fn predict_refs(&self, frames: &[&Frame]) -> Result<Vec<f64>> {
        let chunks: Vec<Vec<f64>> = frames
            .par_chunks(INFER_CHUNK)
            .map(|chunk| {
                let input = pack_batch::<f32>(&self.arch, chunk)?;
                Ok(self.logits_packed(&input, chunk.len()).into_iter().map(|z| clip_prob(sigmoid(z))).collect())
            })
            .collect::<Result<_>>()?;
        Ok(chunks.concat())
    }

    /// Mean binary cross-entropy over the batch and its gradient.
    pub fn loss_and_grad(&self, frames: &[Frame], labels: &[Label]) -> Result<(f64, ParamSet<f32>)> {
        if frames.len() != labels.len() || frames.is_empty() {
            return invalid("loss needs a non-empty batch with one label per frame");
        }
        let refs: Vec<&Frame> = frames.iter().collect();
        let input = pack_batch::<f32>(&self.arch, &refs)?;
        let targets: Vec<f64> = labels.iter().map(|l| l.as_f64()).collect();
        let (loss, _, grads) = network::loss_and_grad(&self.arch, &self.params, &input, &targets);
        Ok((loss, grads))
    }
}

/// Anything that maps fixed-size patches to positive-class probabilities.
pub trait PatchScorer: Sync {
    fn arch(&self) -> &ArchitectureSpec;
    fn score(&self, frames: &[&Frame]) -> Result<Vec<f64>>;
}

impl PatchScorer for DetectorModel {
    fn arch(&self) -> &ArchitectureSpec {
        &self.arch
    }

    fn score(&self, frames: &[&Frame]) -> Result<Vec<f64>> {
        self.predict_refs(frames)
    }
}

/// Independently trained detectors whose probabilities are averaged.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    models: Vec<DetectorModel>,
}

impl Ensemble {
    pub fn new(models: Vec<DetectorModel>) -> Result<Self> {
        let first = models.first().ok_or_else(|| Error::InvalidArgument("ensemble needs at least one model".into()))?;
        if let Some(m) = models.iter().find(|m| m.arch != first.arch) {
            return invalid(format!("ensemble architecture mismatch: {:?} vs {:?}", m.arch, first.arch));
        }
        Ok(Self { models })
    }

    pub fn models(&self) -> &[DetectorModel] {
        &self.models
    }

    pub fn predict(&self, frames: &[Frame]) -> Result<Vec<f64>> {
        let refs: Vec<&Frame> = frames.iter().collect();
        self.score(&refs)
    }
}

impl PatchScorer for Ensemble {
    fn arch(&self) -> &ArchitectureSpec {
        &self.models[0].arch
    }

    fn score(&self, frames: &[&Frame]) -> Result<Vec<f64>> {
        let mut acc = vec![0.0; frames.len()];
        for m in &self.models {
            for (a, p) in acc.iter_mut().zip(m.predict_refs(frames)?) {
                *a += p;
            }
        }
        let inv = 1.0 / self.models.len() as f64;
        Ok(acc.into_iter().map(|a| a * inv).collect())
    }
}

/// Arithmetic mean of the models' probabilities.
pub fn predict_ensemble(models: &[DetectorModel], frames: &[Frame]) -> Result<Vec<f64>> {
    Ensemble::new(models.to_vec())?.predict(frames)
}
