//! Hot-path benchmarks: per-mode propagator evaluation, the two time
//! steppers, and the spectral transforms they lean on.

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use skwave_bench::{bench_coefficients, bench_covariance, bench_domain};
use skwave_core::noise::standard_gaussians;
use skwave_core::semigroup::mode_propagator;
use skwave_core::solver::{HeatStepper, WaveStepper};
use skwave_core::PhasePoint;

fn bench_mode_propagator(c: &mut Criterion) {
    let mut group = c.benchmark_group("mode_propagator");
    for &(label, mu) in &[("overdamped", 1e-4), ("critical", 0.25), ("oscillatory", 0.9)] {
        group.bench_function(label, |b| {
            b.iter(|| {
                let mut acc = 0.0;
                for k in 1..=64u32 {
                    let alpha = (k * k) as f64;
                    let p = mode_propagator(black_box(mu), black_box(alpha), black_box(0.37));
                    acc += p.val_u + p.val_v + p.deriv_u + p.deriv_v;
                }
                acc
            })
        });
    }
    group.finish();
}

fn bench_steppers(c: &mut Criterion) {
    let domain = bench_domain();
    let cov = bench_covariance(&domain);
    let coeffs = bench_coefficients();
    let k = domain.truncation();
    let dt = 1.0 / 256.0;
    let gaussians = standard_gaussians(1, 0, 0, k);

    let wave = WaveStepper::new(&domain, 0.05, dt);
    c.bench_function("wave_step", |b| {
        let mut z = PhasePoint { u_coeffs: vec![0.1; k], v_coeffs: vec![0.0; k] };
        b.iter(|| wave.step(&domain, &coeffs, &cov, 0.0, &mut z, &gaussians).unwrap())
    });

    let heat = HeatStepper::new(&domain, dt);
    c.bench_function("heat_step", |b| {
        let mut u = vec![0.1; k];
        b.iter(|| heat.step(&domain, &coeffs, &cov, 0.0, &mut u, &gaussians).unwrap())
    });
}

fn bench_transforms(c: &mut Criterion) {
    let domain = bench_domain();
    let coeffs: Vec<f64> = (1..=domain.truncation()).map(|k| 1.0 / k as f64).collect();
    c.bench_function("synthesize", |b| b.iter(|| domain.synthesize(black_box(&coeffs))));
    let field = domain.synthesize(&coeffs);
    c.bench_function("analyze", |b| b.iter(|| domain.analyze(black_box(&field))));
}

criterion_group!(kernels, bench_mode_propagator, bench_steppers, bench_transforms);
criterion_main!(kernels);
