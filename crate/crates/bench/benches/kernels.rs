use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use quantfolio_bench::{conditioned_sigma, dp_instance, equilibrium, return_panel};
use quantfolio_core::black_litterman::{build_views, posterior};
use quantfolio_core::econometrics::{covariance_of, ols_with_intercept, spearman};
use quantfolio_core::rebalancing::dp_rebalance;
use quantfolio_core::tca::{calibrate_impact, synthetic_orders, CalibrationOptions, ImpactParams};

fn bench_black_litterman(c: &mut Criterion) {
    let (eq, universe, views) = equilibrium(50);
    let sigma_c = conditioned_sigma(&eq);
    c.bench_function("bl_posterior_n50_k2", |b| {
        b.iter(|| {
            let set = build_views(black_box(&views), &universe, 0.05, &sigma_c).unwrap();
            posterior(&set, black_box(&eq)).unwrap()
        })
    });
}

fn bench_covariance(c: &mut Criterion) {
    let panel = return_panel(50, 260, 3);
    c.bench_function("covariance_260x50", |b| {
        b.iter(|| covariance_of(black_box(panel.returns())).unwrap())
    });
}

fn bench_regression(c: &mut Criterion) {
    let panel = return_panel(6, 500, 5);
    let y = nalgebra::DVector::from_fn(500, |t, _| panel.returns()[(t, 0)]);
    let x = nalgebra::DMatrix::from_fn(500, 5, |t, j| panel.returns()[(t, j + 1)]);
    c.bench_function("ols_500x5", |b| {
        b.iter(|| ols_with_intercept(black_box(&x), black_box(&y)).unwrap())
    });
}

fn bench_spearman(c: &mut Criterion) {
    let a: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64).collect();
    let d: Vec<f64> = (0..1000).map(|i| ((i * 53) % 97) as f64).collect();
    c.bench_function("spearman_n1000_ties", |b| {
        b.iter(|| spearman(black_box(&a), black_box(&d)).unwrap())
    });
}

fn bench_dp(c: &mut Criterion) {
    let (config, model) = dp_instance();
    c.bench_function("dp_value_iteration_2x11", |b| {
        b.iter(|| dp_rebalance(black_box(&config), black_box(&model)).unwrap())
    });
}

fn bench_impact_calibration(c: &mut Criterion) {
    let truth = ImpactParams { alpha: 1.0, beta: 0.6, gamma: 0.3, eta: 0.1, delta: 0.25 };
    let orders = synthetic_orders(&truth, 1000, 0.05, 5).unwrap();
    c.bench_function("impact_calibration_1k_orders", |b| {
        b.iter(|| calibrate_impact(black_box(&orders), &CalibrationOptions::default()).unwrap())
    });
}

criterion_group!(
    benches,
    bench_black_litterman,
    bench_covariance,
    bench_regression,
    bench_spearman,
    bench_dp,
    bench_impact_calibration
);
criterion_main!(benches);
