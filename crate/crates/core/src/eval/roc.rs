use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC points ordered from the strictest threshold `(0, 0)` to the loosest `(1, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocResult {
    pub points: Vec<RocPoint>,
    /// Threshold producing each point; the first is `+inf`.
    pub thresholds: Vec<f64>,
    pub auc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmeanThreshold {
    pub threshold: f64,
    pub gmean: f64,
    /// Set when all scores are equal and no midpoint exists.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionReport {
    pub threshold: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub accuracy: f64,
    /// `None` without positive examples.
    pub tpr: Option<f64>,
    /// `None` without negative examples.
    pub tnr: Option<f64>,
}

fn check_inputs(scores: &[f64], labels: &[Label]) -> Result<()> {
    if scores.len() != labels.len() {
        return invalid(format!("{} scores but {} labels", scores.len(), labels.len()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return invalid("scores must not be NaN");
    }
    Ok(())
}

/// Unique scores in descending order with the positive and negative counts at each.
fn score_groups(scores: &[f64], labels: &[Label]) -> Vec<(f64, u64, u64)> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut groups: Vec<(f64, u64, u64)> = Vec::new();
    for i in idx {
        let (p, n) = if labels[i].is_positive() { (1, 0) } else { (0, 1) };
        match groups.last_mut() {
            Some(g) if g.0 == scores[i] => {
                g.1 += p;
                g.2 += n;
            }
            _ => groups.push((scores[i], p, n)),
        }
    }
    groups
}

fn class_counts(labels: &[Label]) -> (u64, u64) {
    let pos = labels.iter().filter(|l| l.is_positive()).count() as u64;
    (pos, labels.len() as u64 - pos)
}

/// Threshold sweep over the unique scores with trapezoidal area.
pub fn roc_curve(scores: &[f64], labels: &[Label]) -> Result<RocResult> {
    check_inputs(scores, labels)?;
    let (pos, neg) = class_counts(labels);
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedRoc(format!("need both classes, have {pos} positive and {neg} negative")));
    }
    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0 }];
    let mut thresholds = vec![f64::INFINITY];
    let (mut tp, mut fp) = (0u64, 0u64);
    // Twice the area in units of one positive-negative pair; exact in integers.
    let mut twice_area: u128 = 0;
    for (score, p, n) in score_groups(scores, labels) {
        twice_area += n as u128 * (2 * tp + p) as u128;
        tp += p;
        fp += n;
        points.push(RocPoint { fpr: fp as f64 / neg as f64, tpr: tp as f64 / pos as f64 });
        thresholds.push(score);
    }
    let auc = twice_area as f64 / (2 * pos as u128 * neg as u128) as f64;
    Ok(RocResult { points, thresholds, auc })
}

/// Threshold maximising `sqrt(TPR * TNR)` among midpoints between adjacent
/// unique scores; the lowest threshold wins ties.
pub fn gmean_threshold(scores: &[f64], labels: &[Label]) -> Result<GmeanThreshold> {
    check_inputs(scores, labels)?;
    let (pos, neg) = class_counts(labels);
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedThreshold(format!(
            "need both classes, have {pos} positive and {neg} negative"
        )));
    }
    let mut groups = score_groups(scores, labels);
    groups.reverse();
    if groups.len() == 1 {
        // Everything predicted positive: TNR is zero.
        return Ok(GmeanThreshold { threshold: groups[0].0, gmean: 0.0, degenerate: true });
    }
    // Ascending sweep: at the midpoint above group k every example in groups
    // 0..=k is predicted negative.
    let (mut tn, mut fn_) = (0u64, 0u64);
    let mut best: Option<(u128, f64)> = None;
    for w in groups.windows(2) {
        fn_ += w[0].1;
        tn += w[0].2;
        let product = (pos - fn_) as u128 * tn as u128;
        let threshold = w[0].0 + (w[1].0 - w[0].0) / 2.0;
        if best.is_none_or(|(b, _)| product > b) {
            best = Some((product, threshold));
        }
    }
    let (product, threshold) = best.expect("at least two groups");
    let gmean = (product as f64 / (pos as f64 * neg as f64)).sqrt();
    Ok(GmeanThreshold { threshold, gmean, degenerate: false })
}

/// Counts with `score >= threshold` predicted positive.
pub fn confusion(scores: &[f64], labels: &[Label], threshold: f64) -> Result<ConfusionReport> {
    check_inputs(scores, labels)?;
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&s, l) in scores.iter().zip(labels) {
        match (s >= threshold, l.is_positive()) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let ratio = |a: usize, b: usize| (a + b > 0).then(|| a as f64 / (a + b) as f64);
    Ok(ConfusionReport {
        threshold,
        tp,
        fp,
        tn,
        fn_,
        accuracy: ratio(tp + tn, fp + fn_).unwrap_or(0.0),
        tpr: ratio(tp, fn_),
        tnr: ratio(tn, fp),
    })
}

pub fn write_roc_csv<W: std::io::Write>(out: W, roc: &RocResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in &roc.points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}
