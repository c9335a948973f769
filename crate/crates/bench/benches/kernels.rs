use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::DMatrix;
use satlab_core::lyapunov;
use satlab_core::oracles;
use satlab_core::sampling;
use satlab_core::systems::solve_mild;
use satlab_core::{Disturbance, FeedbackMap, GeneratorSpec, InputOperator, SolverOptions, State, SystemSpec};

fn bench_expm(c: &mut Criterion) {
    let mut group = c.benchmark_group("expm");
    for m in [4usize, 16, 64] {
        let a = sampling::random_hurwitz(&mut sampling::seeded_rng(1), m, 0.5);
        group.bench_with_input(BenchmarkId::from_parameter(m), &a, |b, a| {
            b.iter(|| satlab_core::linalg::expm(black_box(a)))
        });
    }
    group.finish();
}

fn bench_lyapunov(c: &mut Criterion) {
    let a = sampling::random_hurwitz(&mut sampling::seeded_rng(2), 12, 0.5);
    c.bench_function("solve_lyapunov_finite/12", |b| {
        b.iter(|| lyapunov::solve_lyapunov_finite(black_box(&a)).unwrap())
    });
}

fn bench_solve_mild(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_mild");
    for cells in [256usize, 1024] {
        let x0 = State::Grid(sampling::random_profile(&mut sampling::seeded_rng(3), cells, 4.0));
        let d = Disturbance::zero_like(&x0);
        let sys = SystemSpec::saturated_transport();
        group.bench_with_input(BenchmarkId::new("transport", cells), &x0, |b, x0| {
            b.iter(|| solve_mild(&sys, x0, &d, 1.0, 1.0 / cells as f64, &SolverOptions::default()).unwrap())
        });
    }
    let a = DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, -2.0, -1.0]);
    let sys = SystemSpec::new(
        GeneratorSpec::Matrix(a),
        InputOperator::Scalar(1.0),
        FeedbackMap::SatPointwise,
    );
    let x0 = State::Vector(sampling::random_gaussian_vector(&mut sampling::seeded_rng(4), 2));
    let d = Disturbance::zero_like(&x0);
    group.bench_function("matrix-2x2", |b| {
        b.iter(|| solve_mild(&sys, black_box(&x0), &d, 5.0, 0.01, &SolverOptions::default()).unwrap())
    });
    group.finish();
}

fn bench_counterexample(c: &mut Criterion) {
    let ladder = oracles::default_ladder();
    c.bench_function("norm_lower_bound/ladder", |b| {
        b.iter(|| {
            ladder
                .iter()
                .map(|&n| oracles::norm_lower_bound(n, black_box(1.0)).unwrap())
                .sum::<f64>()
        })
    });
    let mut group = c.benchmark_group("counterexample_norm_sq");
    for n in [4u64, 1 << 10, 1 << 20] {
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| oracles::counterexample_norm_sq(n, black_box(1.0)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    bench_expm,
    bench_lyapunov,
    bench_solve_mild,
    bench_counterexample
);
criterion_main!(benches);
