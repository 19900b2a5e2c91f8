use std::f64::consts::TAU;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use degenhyp_core::builtins::{gaussian_data, qi_operator, qi_spectral, random_block_system, second_order_data};
use degenhyp_core::linalg::CMatrix;
use degenhyp_core::reduction::{cross_validate, delta_bound_scalar};
use degenhyp_core::solver::{solve_cauchy, PeriodicGrid};
use degenhyp_core::systems::{sphere_samples, sylvester_block_offdiag};
use degenhyp_core::weights::DegeneracySpec;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn x_grid(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| vec![TAU * i as f64 / n as f64]).collect()
}

fn delta_bounds(c: &mut Criterion) {
    let op = qi_operator(1.0);
    let xis = sphere_samples(1);
    let mut group = c.benchmark_group("delta_bound");
    for n in [16, 128] {
        let xs = x_grid(n);
        group.bench_with_input(BenchmarkId::new("closed_form", n), &xs, |b, xs| {
            b.iter(|| delta_bound_scalar(black_box(&op), xs, &xis, 1e-6).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("cross_validate", n), &xs, |b, xs| {
            b.iter(|| cross_validate(black_box(&op), xs, &xis, 1e-6).unwrap())
        });
    }
    group.finish();
}

fn sylvester(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let blocks = [(-1.0, 2), (0.0, 2), (1.0, 1)];
    let b1 = CMatrix::from_fn(5, 5, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    c.bench_function("sylvester_221", |b| {
        b.iter(|| sylvester_block_offdiag(black_box(&blocks), black_box(&b1)).unwrap())
    });
    c.bench_function("random_block_system", |b| {
        b.iter(|| random_block_system(&mut rng))
    });
}

fn spectral_solve(c: &mut Criterion) {
    let spec = DegeneracySpec::new(1, 1.0).unwrap();
    let mut group = c.benchmark_group("qi_solve");
    group.sample_size(10);
    for n in [128, 512] {
        let grid = PeriodicGrid::new(n).unwrap();
        let sys = qi_spectral(1.0, &grid);
        let u0 = second_order_data(&spec, &grid, &gaussian_data(&grid, 8.0, 24.0));
        group.bench_function(BenchmarkId::from_parameter(n), |b| {
            b.iter(|| solve_cauchy(&sys, black_box(&u0), None, 0.0, &[1.0], 1e-8).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, delta_bounds, sylvester, spectral_solve);
criterion_main!(benches);
