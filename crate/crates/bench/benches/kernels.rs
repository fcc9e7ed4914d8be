use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use smoothconf_bench::{design, params, sites};
use smoothconf_core::{
    build_cov_matrix, build_cov_matrix_unfactorized, gls_estimate, lowess, matern_cov, simulate_gp, LowessConfig,
};

fn kernel_eval(c: &mut Criterion) {
    let p = params();
    c.bench_function("matern_cov", |b| b.iter(|| matern_cov(black_box(0.37), &p).unwrap()));
}

fn covariance(c: &mut Criterion) {
    let mut group = c.benchmark_group("covariance");
    group.sample_size(10);
    for n in [100, 300, 620] {
        let locs = sites(n);
        group.bench_with_input(BenchmarkId::new("build", n), &locs, |b, l| {
            b.iter(|| build_cov_matrix_unfactorized(l, &params()).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("build_and_factor", n), &locs, |b, l| {
            b.iter(|| build_cov_matrix(l, &params()).unwrap())
        });
    }
    group.finish();
}

fn gls(c: &mut Criterion) {
    let mut group = c.benchmark_group("gls");
    group.sample_size(20);
    for n in [100, 620] {
        let locs = sites(n);
        let sigma = build_cov_matrix(&locs, &params()).unwrap();
        let x = design(&locs);
        let y = simulate_gp(&locs, &params(), 5).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| gls_estimate(&x, &sigma, &y).unwrap())
        });
    }
    group.finish();
}

fn smoother(c: &mut Criterion) {
    let n = 1024;
    let xs: Vec<f64> = (0..n).map(|i| 10.0 * i as f64 / (n - 1) as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|x| x.sin() + 0.1 * (7.0 * x).cos()).collect();
    let config = LowessConfig::new(0.2).unwrap();
    c.bench_function("lowess_1024", |b| b.iter(|| lowess(&xs, black_box(&ys), &config).unwrap()));
}

criterion_group!(benches, kernel_eval, covariance, gls, smoother);
criterion_main!(benches);
