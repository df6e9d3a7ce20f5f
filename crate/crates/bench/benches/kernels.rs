use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use xaikit_bench::{scored_labels, uniform_tensor};
use xaikit_core::metrics::{roc_auc, ScoredLabels};
use xaikit_core::numerics::{pixel_shuffle, softmax, weighted_least_squares};

fn shuffle(c: &mut Criterion) {
    let input = uniform_tensor(vec![64, 64, 64], 1);
    c.bench_function("pixel_shuffle 64x64x64 r=4", |b| {
        b.iter(|| pixel_shuffle(black_box(&input), 4).unwrap())
    });
}

fn auc(c: &mut Criterion) {
    let mut group = c.benchmark_group("roc_auc");
    for n in [1_000, 100_000] {
        let (scores, labels) = scored_labels(n, 2);
        let data = ScoredLabels::new(scores, labels).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &data, |b, d| b.iter(|| roc_auc(d).unwrap()));
    }
    group.finish();
}

fn wls(c: &mut Criterion) {
    let (n, m) = (1000, 50);
    let x = uniform_tensor(vec![n, m], 3);
    let y = uniform_tensor(vec![n], 4).into_data();
    let w = uniform_tensor(vec![n], 5).into_data();
    c.bench_function("weighted_least_squares 1000x50", |b| {
        b.iter(|| weighted_least_squares(black_box(&x), &y, &w, 1e-6).unwrap())
    });
}

fn soft(c: &mut Criterion) {
    let v = uniform_tensor(vec![1000], 6).into_data();
    c.bench_function("softmax 1000", |b| b.iter(|| softmax(black_box(&v)).unwrap()));
}

criterion_group!(benches, shuffle, auc, wls, soft);
criterion_main!(benches);
