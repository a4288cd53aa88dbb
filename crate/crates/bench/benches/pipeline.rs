use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use watchlab_bench::fixture;
use watchlab_core::estimator::{fit_all_groups, fit_group_gmm, smooth_curves};
use watchlab_core::eval::gauc;
use watchlab_core::trainer::Trainer;
use watchlab_core::{apply_method, CorrectionParams, GmmOptions, Method, TrainConfig};

fn estimator(c: &mut Criterion) {
    let f = fixture(50_000);
    let opts = GmmOptions::default();
    let (d, rows) = f
        .dataset
        .duration_groups()
        .into_iter()
        .max_by_key(|(_, idx)| idx.len())
        .unwrap();
    let values: Vec<f64> = rows.iter().map(|&i| f.dataset.rows[i].watch_time_s).collect();
    c.bench_function(&format!("gmm_one_group_{}_rows", values.len()), |b| {
        b.iter(|| fit_group_gmm(d, black_box(&values), &opts).unwrap())
    });
    c.bench_function("gmm_all_groups_50k", |b| {
        b.iter(|| fit_all_groups(black_box(&f.dataset), &opts).unwrap())
    });
    c.bench_function("smooth_curves_t3", |b| {
        b.iter(|| smooth_curves(black_box(&f.fits), 3).unwrap())
    });
}

fn correction(c: &mut Criterion) {
    let f = fixture(50_000);
    let mut group = c.benchmark_group("labels_50k");
    for m in [Method::Wtg, Method::D2q, Method::D2coA, Method::D2coS] {
        let params = CorrectionParams::new(m).with_curves(f.curves.clone()).with_alpha(-0.03);
        group.bench_function(m.id(), |b| {
            b.iter(|| apply_method(black_box(&f.dataset), &params).unwrap())
        });
    }
    group.finish();
}

fn training(c: &mut Criterion) {
    let f = fixture(20_000);
    let labels: Vec<f64> = f.interest.iter().map(|&r| f64::from(u8::from(r))).collect();
    let config = TrainConfig::default();
    c.bench_function("fm_epoch_20k", |b| {
        b.iter_batched(
            || Trainer::new(&f.dataset, &labels, &config).unwrap(),
            |mut t| t.epoch(1).unwrap(),
            BatchSize::LargeInput,
        )
    });
}

fn metrics(c: &mut Criterion) {
    let f = fixture(100_000);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let scores: Vec<f64> = (0..f.dataset.len()).map(|_| rng.random()).collect();
    let users = f.dataset.user_ids();
    c.bench_function("gauc_100k", |b| {
        b.iter(|| gauc(black_box(&scores), &f.interest, &users).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = estimator, correction, training, metrics
}
criterion_main!(benches);
