use criterion::{criterion_group, criterion_main, Criterion};
use xaikit_bench::{clustered_points, uniform_tensor, TableGame};
use xaikit_core::latent::{tsne_embed, EmbeddingSet, TsneConfig};
use xaikit_core::perturb::{
    exact_shapley, grid_superpixels, kernel_shap_game, lime_explain, FnPredictor, FnValue, LimeConfig, Mask,
    ShapConfig,
};
use xaikit_core::Tensor;

fn shapley(c: &mut Criterion) {
    let game = TableGame::new(10, 7);
    let mut group = c.benchmark_group("shapley m=10");
    group.bench_function("exact", |b| {
        b.iter(|| exact_shapley(&mut FnValue(|z: &Mask| game.value(z)), 10).unwrap())
    });
    group.bench_function("kernel enumerated", |b| {
        let cfg = ShapConfig { n_samples: 1022, ..ShapConfig::default() };
        b.iter(|| kernel_shap_game(&mut FnValue(|z: &Mask| game.value(z)), 10, 0, &cfg).unwrap())
    });
    group.bench_function("kernel sampled 256", |b| {
        let cfg = ShapConfig { n_samples: 256, ..ShapConfig::default() };
        b.iter(|| kernel_shap_game(&mut FnValue(|z: &Mask| game.value(z)), 10, 0, &cfg).unwrap())
    });
    group.finish();
}

fn lime(c: &mut Criterion) {
    let image = uniform_tensor(vec![64, 64, 3], 8);
    let spmap = grid_superpixels(64, 64, 16).unwrap();
    let cfg = LimeConfig { n_samples: 500, ..LimeConfig::default() };
    c.bench_function("lime 64x64x3 16 regions 500 samples", |b| {
        b.iter(|| {
            // mean intensity as a stand-in model
            let mut pred = FnPredictor::new(|batch: &Tensor| {
                let n = batch.shape()[0];
                let px = batch.len() / n;
                let rows = (0..n).map(|r| batch.data()[r * px..(r + 1) * px].iter().sum::<f64>() / px as f64);
                Ok(Tensor::matrix(n, 1, rows.collect()).unwrap())
            });
            lime_explain(&mut pred, &image, &spmap, 0, &cfg).unwrap()
        })
    });
}

fn tsne(c: &mut Criterion) {
    let x = EmbeddingSet::new(clustered_points(4, 50, 16, 9)).unwrap();
    let cfg = TsneConfig { iterations: 250, ..TsneConfig::default() };
    let mut group = c.benchmark_group("tsne");
    group.sample_size(10);
    group.bench_function("n=200 d=16 250 iterations", |b| b.iter(|| tsne_embed(&x, &cfg).unwrap()));
    group.finish();
}

criterion_group!(benches, shapley, lime, tsne);
criterion_main!(benches);
