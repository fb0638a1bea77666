use std::io::Write;

use serde::{Deserialize, Serialize};

use super::roc::{confusion, gmean_threshold, roc_curve, RocResult};
use crate::dataset::{compose_overlap_dataset, Label, LabeledPatch};
use crate::error::{invalid, Error, Result};
use crate::frame::Frame;
use crate::nn::{build_model, train, ArchitectureSpec, Ensemble, EpochStats, PatchScorer, TrainConfig};
use crate::optics::SensorModel;
use crate::rng::{derive_seed, tag};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub arch: ArchitectureSpec,
    pub train: TrainConfig,
    pub sensor: SensorModel,
    /// Composed training examples per class at each `n`.
    pub train_per_class: usize,
    /// Composed validation examples per class at each `n`.
    pub val_per_class: usize,
    /// Independently seeded models averaged per `n`.
    pub ensemble_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub train_acc: f64,
    pub val_acc: f64,
    pub auc: f64,
    pub threshold: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub row: SweepRow,
    pub ensemble: Ensemble,
    pub roc: RocResult,
    /// Training history of each ensemble member.
    pub histories: Vec<Vec<EpochStats>>,
}

/// Ensemble probabilities for a patch set.
pub fn score_patches<S: PatchScorer + ?Sized>(scorer: &S, patches: &[LabeledPatch]) -> Result<Vec<f64>> {
    let frames: Vec<&Frame> = patches.iter().map(|p| &p.pixels).collect();
    scorer.score(&frames)
}

fn accuracy_at_half(scores: &[f64], labels: &[Label]) -> f64 {
    let hits = scores.iter().zip(labels).filter(|(&s, l)| (s >= 0.5) == l.is_positive()).count();
    hits as f64 / scores.len().max(1) as f64
}

/// For each `n`: compose train and validation sets from the singles, train
/// `ensemble_size` detectors, and evaluate their average on both sets.
///
/// Accuracies use a 0.5 cut; `threshold` and the counts come from the
/// g-mean threshold on the validation scores.
pub fn accuracy_vs_n(
    train_singles: &[LabeledPatch],
    val_singles: &[LabeledPatch],
    n_values: &[usize],
    cfg: &SweepConfig,
    seed: u64,
) -> Result<Vec<SweepEntry>> {
    if cfg.ensemble_size == 0 || cfg.train_per_class == 0 || cfg.val_per_class == 0 {
        return invalid("sweep needs a positive ensemble size and example counts");
    }
    cfg.train.validate()?;
    let mut out = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let n64 = n as u64;
        let train_set =
            compose_overlap_dataset(train_singles, n, cfg.train_per_class, &cfg.sensor, derive_seed(seed, &[tag::SWEEP, n64, 0]))?;
        let val_set =
            compose_overlap_dataset(val_singles, n, cfg.val_per_class, &cfg.sensor, derive_seed(seed, &[tag::SWEEP, n64, 1]))?;
        let mut models = Vec::with_capacity(cfg.ensemble_size);
        let mut histories = Vec::with_capacity(cfg.ensemble_size);
        for k in 0..cfg.ensemble_size as u64 {
            let model = build_model(&cfg.arch, derive_seed(seed, &[tag::SWEEP, n64, 2, k]))?;
            let tc = TrainConfig { seed: derive_seed(seed, &[tag::SWEEP, n64, 3, k]), ..cfg.train.clone() };
            let outcome = train(model, &train_set, &val_set, &tc).map_err(|e| match e {
                Error::TrainingFailure { epoch, reason } => {
                    Error::TrainingFailure { epoch, reason: format!("n={n}, model {k}: {reason}") }
                }
                other => other,
            })?;
            models.push(outcome.model);
            histories.push(outcome.history);
        }
        let ensemble = Ensemble::new(models)?;
        let train_labels: Vec<Label> = train_set.iter().map(|p| p.label).collect();
        let val_labels: Vec<Label> = val_set.iter().map(|p| p.label).collect();
        let train_scores = score_patches(&ensemble, &train_set)?;
        let val_scores = score_patches(&ensemble, &val_set)?;
        let roc = roc_curve(&val_scores, &val_labels)?;
        let g = gmean_threshold(&val_scores, &val_labels)?;
        let c = confusion(&val_scores, &val_labels, g.threshold)?;
        let row = SweepRow {
            n,
            train_acc: accuracy_at_half(&train_scores, &train_labels),
            val_acc: accuracy_at_half(&val_scores, &val_labels),
            auc: roc.auc,
            threshold: g.threshold,
            tp: c.tp,
            fp: c.fp,
            tn: c.tn,
            fn_: c.fn_,
        };
        out.push(SweepEntry { row, ensemble, roc, histories });
    }
    Ok(out)
}

pub fn write_sweep_csv<W: Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
