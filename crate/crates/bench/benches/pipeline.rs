use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use wsi_bench::logistic_fixture;
use wsi_core::onestep::{build_working_data, coordinate_descent};
use wsi_core::sim::{run_monte_carlo, DgpConfig, SimOptions};
use wsi_core::{fit_mle, select_lambda, selection_profile, TuningOptions};

fn mle(c: &mut Criterion) {
    let mut g = c.benchmark_group("mle");
    for &(n, p) in &[(350, 25), (2000, 50)] {
        let (data, _) = logistic_fixture(n, p, 1);
        g.bench_with_input(BenchmarkId::from_parameter(format!("{n}x{p}")), &data, |b, d| {
            b.iter(|| fit_mle(&wsi_core::GlmFamily::Logistic, black_box(d)).unwrap())
        });
    }
    g.finish();
}

fn lasso(c: &mut Criterion) {
    let (data, mle) = logistic_fixture(350, 25, 2);
    let wd = build_working_data(&mle, &data);
    let lambda = 0.01 * wd.lambda_max();
    c.bench_function("coordinate_descent/350x25", |b| b.iter(|| coordinate_descent(black_box(&wd), lambda).unwrap()));
    c.bench_function("working_data/350x25", |b| b.iter(|| build_working_data(black_box(&mle), &data)));
}

fn tuning(c: &mut Criterion) {
    let (data, mle) = logistic_fixture(350, 25, 3);
    let opts = TuningOptions { seed: 4, ..TuningOptions::default() };
    c.bench_function("select_lambda/350x25", |b| b.iter(|| select_lambda(black_box(&mle), &data, &opts).unwrap()));
    c.bench_function("selection_profile/350x25", |b| b.iter(|| selection_profile(black_box(&mle), &data, 0.01).unwrap()));
}

fn replications(c: &mut Criterion) {
    let cfg = DgpConfig::new(350, 25, 0.0, 0.4, 5);
    let opts = SimOptions { reps: 8, ..SimOptions::default() };
    let mut g = c.benchmark_group("simulation");
    g.sample_size(10);
    g.bench_function("8_reps/350x25", |b| b.iter(|| run_monte_carlo(black_box(&cfg), &opts).unwrap()));
    g.finish();
}

criterion_group!(benches, mle, lasso, tuning, replications);
criterion_main!(benches);
