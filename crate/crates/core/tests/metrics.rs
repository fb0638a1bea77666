use overlapscope::eval::{confusion, gmean_threshold, grid_len, roc_curve, trace_contrast, TRACE_ROWS};
use overlapscope::{BitDepth, Frame, Label};
use proptest::prelude::*;

fn to_labels(bits: &[bool]) -> Vec<Label> {
    bits.iter().map(|&b| if b { Label::Positive } else { Label::Negative }).collect()
}

/// Mann-Whitney statistic by explicit pair enumeration.
fn pair_auc(scores: &[f64], labels: &[Label]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (s_p, _) in scores.iter().zip(labels).filter(|(_, l)| l.is_positive()) {
        for (s_n, _) in scores.iter().zip(labels).filter(|(_, l)| !l.is_positive()) {
            pairs += 1.0;
            wins += if s_p > s_n { 1.0 } else if s_p == s_n { 0.5 } else { 0.0 };
        }
    }
    wins / pairs
}

/// Every midpoint tried in ascending order; later candidates must win by a clear margin.
fn brute_force_threshold(scores: &[f64], labels: &[Label]) -> Option<(f64, f64)> {
    let mut uniq = scores.to_vec();
    uniq.sort_by(f64::total_cmp);
    uniq.dedup();
    let mut best: Option<(f64, f64)> = None;
    for w in uniq.windows(2) {
        let t = (w[0] + w[1]) / 2.0;
        let c = confusion(scores, labels, t).unwrap();
        let g = (c.tpr.unwrap() * c.tnr.unwrap()).sqrt();
        if best.is_none_or(|(_, b)| g > b + 1e-12) {
            best = Some((t, g));
        }
    }
    best
}

fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<Label>)> {
    (2usize..=200, any::<bool>()).prop_flat_map(|(len, coarse)| {
        (prop::collection::vec(0.0f64..1.0, len), prop::collection::vec(any::<bool>(), len - 2)).prop_map(
            move |(mut s, mut bits)| {
                if coarse {
                    s.iter_mut().for_each(|v| *v = (*v * 8.0).round() / 8.0);
                }
                bits.extend([true, false]);
                (s, to_labels(&bits))
            },
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn auc_matches_pair_counting((scores, labels) in instance()) {
        let roc = roc_curve(&scores, &labels).unwrap();
        prop_assert!((roc.auc - pair_auc(&scores, &labels)).abs() <= 1e-12);
        let first = roc.points.first().unwrap();
        let last = roc.points.last().unwrap();
        prop_assert_eq!((first.fpr, first.tpr), (0.0, 0.0));
        prop_assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
        let trapezoid: f64 = roc.points.windows(2).map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0).sum();
        prop_assert!((roc.auc - trapezoid).abs() <= 1e-12);
    }

    #[test]
    fn gmean_matches_exhaustive_search((scores, labels) in instance()) {
        let got = gmean_threshold(&scores, &labels).unwrap();
        match brute_force_threshold(&scores, &labels) {
            Some((t, g)) => {
                prop_assert!(!got.degenerate);
                prop_assert!((got.threshold - t).abs() <= 1e-12, "{} vs {}", got.threshold, t);
                prop_assert!((got.gmean - g).abs() <= 1e-12);
            }
            None => prop_assert!(got.degenerate),
        }
    }

    #[test]
    fn confusion_counts_partition((scores, labels) in instance(), t in 0.0f64..1.0) {
        let c = confusion(&scores, &labels, t).unwrap();
        prop_assert_eq!(c.tp + c.fp + c.tn + c.fn_, scores.len());
        if let Some(tpr) = c.tpr {
            prop_assert_eq!(tpr, c.tp as f64 / (c.tp + c.fn_) as f64);
        }
    }

    #[test]
    fn heatmap_grid_follows_floor_formula(window in 1usize..64, extra in 0usize..200, step in 1usize..40) {
        let frame = window + extra;
        let cells = grid_len(frame, window, step);
        prop_assert_eq!(cells, (frame - window) / step + 1);
        // Last window fits, one more would not.
        prop_assert!((cells - 1) * step + window <= frame);
        prop_assert!(cells * step + window > frame);
    }

    #[test]
    fn trace_contrast_ignores_offsets(
        levels in prop::collection::vec(20.0f64..200.0, 24),
        offset in -20.0f64..50.0,
        row in 0usize..8,
    ) {
        let (w, h) = (24, 30);
        let make = |b: f64| {
            let data = (0..w * h).map(|i| (levels[i % w] + b).round()).collect();
            Frame::new(w, h, 1, BitDepth::Quantized(8), data).unwrap()
        };
        let base = make(0.0);
        let shifted = make(offset.round());
        let a = trace_contrast(&base, row, TRACE_ROWS, 0..w).unwrap();
        let b = trace_contrast(&shifted, row, TRACE_ROWS, 0..w).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn chance_scores_have_auc_near_half() {
    let mut state = 12345u64;
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let scores: Vec<f64> = (0..20_000).map(|_| next()).collect();
    let labels: Vec<Label> = (0..20_000).map(|_| if next() < 0.5 { Label::Positive } else { Label::Negative }).collect();
    let auc = roc_curve(&scores, &labels).unwrap().auc;
    assert!((auc - 0.5).abs() < 0.05, "{auc}");
}
