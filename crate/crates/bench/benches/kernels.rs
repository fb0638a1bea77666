use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use overlapscope::eval::{gmean_threshold, roc_curve, sliding_heatmap};
use overlapscope::nn::{build_model, ArchitectureSpec};
use overlapscope::noise::{poisson_oracle, synthesize_overlap};
use overlapscope::{Frame, Label, SensorModel};
use overlapscope_bench::{scored_labels, textured_frame};
use std::hint::black_box;

fn overlap_synthesis(c: &mut Criterion) {
    let sensor = SensorModel::prototype();
    let mut group = c.benchmark_group("synthesize_overlap");
    for n in [1usize, 4, 7] {
        let frames: Vec<Frame> = (0..n as u64).map(|s| textured_frame(512, s)).collect();
        group.throughput(Throughput::Elements(512 * 512));
        group.bench_with_input(BenchmarkId::from_parameter(n), &frames, |b, f| {
            b.iter(|| synthesize_overlap(black_box(f), &sensor, 1).unwrap())
        });
    }
    group.finish();
}

fn oracle(c: &mut Criterion) {
    c.bench_function("poisson_oracle/n7_100k", |b| {
        b.iter(|| poisson_oracle(black_box(&[100.0; 7]), 100_000, 3).unwrap())
    });
}

fn detector(c: &mut Criterion) {
    let mut group = c.benchmark_group("detector");
    group.sample_size(10);
    for size in [32usize, 48] {
        let model = build_model(&ArchitectureSpec::standard(size, 1), 0).unwrap();
        let frames: Vec<Frame> = (0..32).map(|s| textured_frame(size, s)).collect();
        let labels: Vec<Label> = (0..32).map(|i| if i % 2 == 0 { Label::Positive } else { Label::Negative }).collect();
        group.throughput(Throughput::Elements(32));
        group.bench_with_input(BenchmarkId::new("forward_b32", size), &frames, |b, f| {
            b.iter(|| model.forward(black_box(f)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("loss_and_grad_b32", size), &frames, |b, f| {
            b.iter(|| model.loss_and_grad(black_box(f), &labels).unwrap())
        });
    }
    group.finish();
}

fn heatmap(c: &mut Criterion) {
    let model = build_model(&ArchitectureSpec::standard(32, 1), 0).unwrap();
    let frame = textured_frame(128, 5);
    let mut group = c.benchmark_group("sliding_heatmap");
    group.sample_size(10);
    group.bench_function("128px_w32_s8", |b| b.iter(|| sliding_heatmap(&model, black_box(&frame), 32, 8).unwrap()));
    group.finish();
}

fn metrics(c: &mut Criterion) {
    let mut group = c.benchmark_group("metrics");
    for len in [1_000usize, 100_000] {
        let (scores, labels) = scored_labels(len);
        group.throughput(Throughput::Elements(len as u64));
        group.bench_with_input(BenchmarkId::new("roc_curve", len), &len, |b, _| {
            b.iter(|| roc_curve(black_box(&scores), &labels).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("gmean_threshold", len), &len, |b, _| {
            b.iter(|| gmean_threshold(black_box(&scores), &labels).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, overlap_synthesis, oracle, detector, heatmap, metrics);
criterion_main!(benches);
