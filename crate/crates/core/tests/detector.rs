use overlapscope::dataset::PatchSource;
use overlapscope::nn::{
    build_model, decode_weights, encode_weights, gradient_check, micro_architecture, train, ArchitectureSpec,
    TrainConfig,
};
use overlapscope::rng::stream;
use overlapscope::{BitDepth, Frame, Label, LabeledPatch};
use proptest::prelude::*;
use rand::Rng;

fn patches(count: usize, size: usize, seed: u64) -> Vec<LabeledPatch> {
    let mut rng = stream(seed, &[]);
    (0..count)
        .map(|i| {
            let label = if rng.random_bool(0.5) { Label::Positive } else { Label::Negative };
            // Positives carry a dark square in the middle.
            let data = (0..size * size)
                .map(|p| {
                    let (x, y) = (p % size, p / size);
                    let centre = x.abs_diff(size / 2) < 3 && y.abs_diff(size / 2) < 3;
                    let base = if label.is_positive() && centre { 40.0 } else { 180.0 };
                    (base + rng.random_range(-25.0f64..25.0)).round()
                })
                .collect();
            LabeledPatch {
                id: format!("p{i}"),
                pixels: Frame::new(size, size, 1, BitDepth::Quantized(8), data).unwrap(),
                label,
                source: PatchSource { group_id: 0, frame_id: "synthetic".into(), x: 0, y: 0 },
                contributors: vec![],
            }
        })
        .collect()
}

#[test]
fn gradients_match_finite_differences_on_random_architectures() {
    for seed in 100..120 {
        let arch = micro_architecture(seed);
        let r = gradient_check(&arch, seed, 1e-5).unwrap();
        assert!(r.max_rel_error < 1e-4, "seed {seed} {arch:?}: {r:?}");
    }
}

#[test]
fn training_is_bit_identical_across_worker_counts() {
    let arch = ArchitectureSpec { input_size: 16, input_channels: 1, blocks: vec![4, 8, 8], leaky_slope: 0.01 };
    let data = patches(48, 16, 1);
    let val = patches(16, 16, 2);
    let cfg = TrainConfig { epochs: 2, batch_size: 20, seed: 9, ..TrainConfig::default() };
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| train(build_model(&arch, 3).unwrap(), &data, &val, &cfg).unwrap())
    };
    let (one, four) = (run(1), run(4));
    assert_eq!(encode_weights(&one.model).unwrap(), encode_weights(&four.model).unwrap());
    assert_eq!(one.history, four.history);
}

#[test]
fn centred_square_is_learned_within_fifty_epochs() {
    let arch = ArchitectureSpec::standard(32, 1);
    let data = patches(64, 32, 4);
    let cfg = TrainConfig { epochs: 50, batch_size: 16, seed: 1, ..TrainConfig::default() };
    let out = train(build_model(&arch, 2).unwrap(), &data, &patches(32, 32, 5), &cfg).unwrap();
    let first_perfect = out.history.iter().position(|h| h.train_acc == 1.0);
    assert!(first_perfect.is_some(), "{:?}", out.history.last());
    assert!(out.history[out.best_epoch - 1].val_acc >= 0.95);
    let saved = decode_weights(&encode_weights(&out.model).unwrap()).unwrap();
    assert_eq!(saved, out.model);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn probabilities_stay_strictly_inside_unit_interval(seed in any::<u64>(), scale in 1.0f32..1e4) {
        let arch = ArchitectureSpec { input_size: 8, input_channels: 1, blocks: vec![3], leaky_slope: 0.01 };
        let mut m = build_model(&arch, seed).unwrap();
        m.params.data.iter_mut().for_each(|w| *w *= scale);
        let p = m.forward(&patches(4, 8, seed).into_iter().map(|p| p.pixels).collect::<Vec<_>>()).unwrap();
        prop_assert!(p.iter().all(|&v| v > 0.0 && v < 1.0));
    }
}
