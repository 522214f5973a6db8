use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use vpd_bench::two_clusters;
use vpd_core::dynamics::{Integrator, IntegratorConfig, PushMode, Scheme};
use vpd_core::fields::{
    charge_density, grid_deposit, pairwise_field, pairwise_field_with, Evaluation, PoissonSolver,
};
use vpd_core::{GridSpec, Softening};

fn pairwise(c: &mut Criterion) {
    let mut group = c.benchmark_group("pairwise_field");
    for n in [128, 256, 512] {
        let e = two_clusters(n);
        group.bench_with_input(BenchmarkId::new("serial", 2 * n), &e, |b, e| {
            b.iter(|| pairwise_field(black_box(e), Softening(0.02)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("rows", 2 * n), &e, |b, e| {
            b.iter(|| pairwise_field_with(black_box(e), Softening(0.02), Evaluation::Rows).unwrap())
        });
    }
    group.finish();
}

fn rk4_step(c: &mut Criterion) {
    let config = IntegratorConfig {
        dt: 0.005,
        scheme: Scheme::Rk4,
        t_end: 1.0,
    };
    let mut integrator =
        Integrator::new(config, PushMode::Vpd { epsilon: 0.1 }, Softening(0.02)).unwrap();
    let state = integrator.initial_state(two_clusters(256)).unwrap();
    c.bench_function("rk4_step_512", |b| {
        b.iter_batched(
            || state.clone(),
            |mut s| integrator.clone().step(&mut s).unwrap(),
            criterion::BatchSize::SmallInput,
        )
    });
}

fn poisson(c: &mut Criterion) {
    let mut group = c.benchmark_group("grid");
    group.sample_size(10);
    let e = two_clusters(256);
    for n in [32, 64] {
        let spec = GridSpec {
            cells_per_axis: n,
            box_half_width: 8.0,
        };
        let solver = PoissonSolver::new(spec).unwrap();
        let (p, m) = grid_deposit(&e, &spec, 0.0).unwrap();
        let rho = charge_density(&p, &m);
        group.bench_with_input(BenchmarkId::new("deposit", n), &spec, |b, spec| {
            b.iter(|| grid_deposit(black_box(&e), spec, 0.0).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("poisson_solve", n), &rho, |b, rho| {
            b.iter(|| solver.solve(black_box(rho)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, pairwise, rk4_step, poisson);
criterion_main!(benches);
