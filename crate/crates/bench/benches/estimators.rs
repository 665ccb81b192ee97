use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use semigrad::AlternatingTensor;
use semigrad::variation::evolve_first_variation;
use semigrad::{generate_noise, integrate_ito, TimeGrid};
use semigrad_bench::{Fixture, SCENARIOS};

const STEPS: usize = 1000;

fn paths(c: &mut Criterion) {
    let mut group = c.benchmark_group("path");
    group.throughput(Throughput::Elements(STEPS as u64));
    let grid = TimeGrid::new(1.0, STEPS).unwrap();
    for id in SCENARIOS {
        let fx = Fixture::new(id);
        let noise = generate_noise(&grid, 1, 0, fx.model.noise_dim());
        group.bench_function(BenchmarkId::new("integrate", id), |b| {
            b.iter(|| integrate_ito(fx.model.as_ref(), black_box(&fx.scenario.x0), &grid, &noise).unwrap())
        });
        let traj = integrate_ito(fx.model.as_ref(), &fx.scenario.x0, &grid, &noise).unwrap();
        group.bench_function(BenchmarkId::new("first_variation", id), |b| {
            b.iter(|| evolve_first_variation(fx.model.as_ref(), &traj, &noise, black_box(&fx.scenario.v0)).unwrap())
        });
    }
    group.finish();
}

fn estimators(c: &mut Criterion) {
    let mut group = c.benchmark_group("estimator");
    group.sample_size(10);
    let n_paths = 1000;
    group.throughput(Throughput::Elements(n_paths as u64));
    for id in SCENARIOS {
        let fx = Fixture::new(id);
        let mc = fx.monte_carlo(n_paths, STEPS).unwrap();
        let f = fx.scenario.observable(fx.scenario.default_observable).unwrap();
        group.bench_function(BenchmarkId::new("value", id), |b| b.iter(|| mc.semigroup_value(&f).unwrap()));
        group.bench_function(BenchmarkId::new("bel_gradient", id), |b| {
            b.iter(|| mc.bel_gradient(&f, &fx.scenario.v0).unwrap())
        });
    }
    let fx = Fixture::new("sphere3");
    let mc = fx.monte_carlo(n_paths, STEPS).unwrap();
    let vol = fx.scenario.form("vol_s2").unwrap();
    group.bench_function("q_form/sphere3", |b| {
        b.iter(|| mc.q_form_semigroup(vol.as_ref(), &[&fx.scenario.v0, &fx.scenario.u0]).unwrap())
    });
    group.finish();
}

fn tensors(c: &mut Criterion) {
    let a = AlternatingTensor::from_covector(vec![1.0, -2.0, 0.5]).unwrap();
    let b = AlternatingTensor::from_covector(vec![0.3, 0.1, 2.0]).unwrap();
    let ab = a.wedge(&b).unwrap();
    c.bench_function("wedge/1x1", |bch| bch.iter(|| black_box(&a).wedge(black_box(&b)).unwrap()));
    c.bench_function("wedge/2x1", |bch| bch.iter(|| black_box(&ab).wedge(black_box(&a)).unwrap()));
}

criterion_group!(benches, paths, estimators, tensors);
criterion_main!(benches);
