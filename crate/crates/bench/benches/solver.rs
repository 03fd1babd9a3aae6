use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use decum_bench::{base, grid};
use decum_core::dp::{
    apply_rebalance, terminal_value, Component, FourierPropagator, ObjectiveParams, Propagator,
    Solver,
};
use decum_core::GridSpec;

fn propagate(c: &mut Criterion) {
    let sc = base();
    for n in [256, 512] {
        let g = grid(n);
        let prop = FourierPropagator::new(&g, &sc.market, sc.dt(), 0.5).unwrap();
        let obj = ObjectiveParams::new(2.5);
        let pair = vec![
            terminal_value(&g, sc.m, 0.0, &obj),
            terminal_value(&g, sc.m, 5.0, &obj),
        ];
        c.bench_function(&format!("propagate pair {n}x{n}"), |b| {
            b.iter_batched(
                || pair.clone(),
                |mut v| prop.propagate(&mut v).unwrap(),
                BatchSize::LargeInput,
            )
        });
    }
}

fn rebalance(c: &mut Criterion) {
    let sc = base();
    let g = grid(256);
    let obj = ObjectiveParams::new(2.5);
    let v = vec![terminal_value(&g, sc.m, 5.0, &obj)];
    let t = sc.dt() * (sc.m - 1) as f64;
    c.bench_function("rebalance 256x256", |b| {
        b.iter(|| {
            apply_rebalance(
                &g,
                &v,
                &[Component::Objective],
                &sc.rule,
                sc.m - 1,
                t,
                GridSpec::square(256).controls(),
            )
        })
    });
}

fn backward_pass(c: &mut Criterion) {
    let sc = base();
    let solver = Solver::new(&sc, &GridSpec::square(128), ObjectiveParams::new(2.5)).unwrap();
    let mut group = c.benchmark_group("solver");
    group.sample_size(10);
    group.bench_function("two W* candidates 128x128", |b| {
        b.iter(|| solver.values(&[0.0, 5.0]).unwrap())
    });
    group.finish();
}

criterion_group!(benches, propagate, rebalance, backward_pass);
criterion_main!(benches);
