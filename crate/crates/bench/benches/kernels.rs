use baxter_bench::{fractional_noise_gamma, test_vector};
use baxter_core::predictor::finite_predictor_multi;
use baxter_core::toeplitz::{levinson_solve, quad_form};
use baxter_core::{ProcessSpec, SeriesExpansion};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn levinson(c: &mut Criterion) {
    let mut g = c.benchmark_group("levinson_solve");
    for n in [256, 1024, 4096] {
        let gamma = fractional_noise_gamma(n);
        let rhs = vec![test_vector(n)];
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| levinson_solve(black_box(&gamma.gamma), black_box(&rhs)).unwrap())
        });
    }
    g.finish();
}

fn predictors(c: &mut Criterion) {
    let mut g = c.benchmark_group("finite_predictor_multi");
    let ms = [1, 2, 4, 8, 16];
    for n in [256, 1024] {
        let gamma = fractional_noise_gamma(n + 16);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| finite_predictor_multi(black_box(&gamma), &ms, n).unwrap())
        });
    }
    g.finish();
}

fn quadratic_form(c: &mut Criterion) {
    let mut g = c.benchmark_group("quad_form");
    for n in [1024, 4096, 16384] {
        let gamma = fractional_noise_gamma(n);
        let x = test_vector(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| quad_form(black_box(&gamma.gamma), black_box(&x)))
        });
    }
    g.finish();
}

fn series(c: &mut Criterion) {
    let mut g = c.benchmark_group("series_predictors");
    g.sample_size(10);
    let exp = SeriesExpansion::new(&ProcessSpec::fractional_noise(0.2), 256).unwrap();
    for n in [16, 64] {
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| exp.predictors(black_box(n), 5, 400, 1e-12).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, levinson, predictors, quadratic_form, series);
criterion_main!(benches);
