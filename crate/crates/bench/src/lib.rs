//! Shared fixtures for the criterion benches.

use skwave_core::spectrum::build_domain;
use skwave_core::{CoefficientPreset, Coefficients, CovarianceQ, SpectralDomain};

pub const BENCH_TRUNCATION: usize = 64;
pub const BENCH_GRID: usize = 128;

pub fn bench_domain() -> SpectralDomain {
    build_domain(&[std::f64::consts::PI], BENCH_TRUNCATION, BENCH_GRID)
        .expect("bench domain is valid")
}

pub fn bench_covariance(domain: &SpectralDomain) -> CovarianceQ {
    skwave_core::noise::build_covariance(
        domain,
        skwave_core::DecayLaw::PowerIndex { scale: 1.0, rate: 1.0 },
        None,
    )
    .expect("bench covariance is admissible")
}

pub fn bench_coefficients() -> Coefficients {
    CoefficientPreset::SineDriftSaturating { amplitude: 0.5, c0: 0.5, c1: 0.5 }.build()
}
