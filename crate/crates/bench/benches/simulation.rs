use criterion::{criterion_group, criterion_main, Criterion};
use decum_bench::base;
use decum_core::history::simulate_history;
use decum_core::sim::{BootstrapSource, SyntheticSource};
use decum_core::{expected_shortfall, path_rng, simulate_strategy, Strategy};
use rand::Rng;

const PATHS: usize = 20_000;

fn engines(c: &mut Criterion) {
    let sc = base();
    let policy = Strategy::ConstantWeightArva { p: 0.4 };
    let synth = SyntheticSource::new(&sc.market, sc.dt(), sc.m, PATHS, 1).unwrap();
    let history = simulate_history(&sc.market, 93, 7).unwrap();
    let boot = BootstrapSource::new(&history, 2.0, sc.dt(), sc.m, PATHS, 1).unwrap();
    let mut group = c.benchmark_group("simulate 20k paths");
    group.sample_size(20);
    group.bench_function("synthetic", |b| {
        b.iter(|| simulate_strategy(&synth, &policy, &sc).unwrap())
    });
    group.bench_function("bootstrap", |b| {
        b.iter(|| simulate_strategy(&boot, &policy, &sc).unwrap())
    });
    group.finish();
}

fn shortfall(c: &mut Criterion) {
    let mut rng = path_rng(3, 0);
    let x: Vec<f64> = (0..1_000_000)
        .map(|_| rng.random_range(-500.0..2000.0))
        .collect();
    c.bench_function("expected shortfall 1e6", |b| {
        b.iter(|| expected_shortfall(&x, 0.05).unwrap())
    });
}

criterion_group!(benches, engines, shortfall);
criterion_main!(benches);
