//! Phase-space states, weighted Sobolev norms, and the pointwise
//! (Nemytskii) composition operators for drift and diffusion coefficients.
//!
//! A scalar field with mode coefficients `c_k` has `|c|²_{H^δ} = Σ α_k^δ c_k²`;
//! the wave phase space pairs a position in `H⁰` with a velocity in `H⁻¹`.
//! Drift enters as `B(t,u)(x) = b(t, x, u(x))` and diffusion acts on a field
//! `h` by `[G(t,u)h](x) = g(t, x, u(x)) · h(x)` — multiplication operators,
//! hence self-adjoint, with `L(L^∞, H)` norm `(∫ g(t,x,u(x))² dx)^{1/2}`.

use crate::spectrum::{GridField, SpectralDomain};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Mode-coefficient state of the wave pair (position, velocity).
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub u_coeffs: Vec<f64>,
    pub v_coeffs: Vec<f64>,
}

impl PhasePoint {
    pub fn zeros(k: usize) -> Self {
        PhasePoint { u_coeffs: vec![0.0; k], v_coeffs: vec![0.0; k] }
    }

    pub fn is_finite(&self) -> bool {
        self.u_coeffs.iter().chain(&self.v_coeffs).all(|x| x.is_finite())
    }
}

/// `(Σ α_k^δ c_k²)^{1/2}`.
pub fn h_delta_norm(domain: &SpectralDomain, coeffs: &[f64], delta: f64) -> f64 {
    assert_eq!(coeffs.len(), domain.truncation());
    coeffs
        .iter()
        .zip(domain.eigenvalues())
        .map(|(&c, &a)| a.powf(delta) * c * c)
        .sum::<f64>()
        .sqrt()
}

/// Norm of `(u, v)` in `H⁰ × H⁻¹`: `(Σ u_k² + Σ α_k⁻¹ v_k²)^{1/2}`.
pub fn pair_norm(domain: &SpectralDomain, z: &PhasePoint) -> f64 {
    assert_eq!(z.u_coeffs.len(), domain.truncation());
    assert_eq!(z.v_coeffs.len(), domain.truncation());
    let mut s = 0.0;
    for ((&u, &v), &a) in z.u_coeffs.iter().zip(&z.v_coeffs).zip(domain.eigenvalues()) {
        s += u * u + v * v / a;
    }
    s.sqrt()
}

pub type ScalarMap = Arc<dyn Fn(f64, &[f64], f64) -> f64 + Send + Sync>;

/// Reaction and noise-amplitude coefficients `b(t, x, u)` and `g(t, x, u)`
/// with their declared Lipschitz-in-`u` and linear-growth constants.
/// `drift = None` means `b ≡ 0` (solvers skip the drift composition).
#[derive(Clone)]
pub struct Coefficients {
    pub drift: Option<ScalarMap>,
    pub diffusion: ScalarMap,
    pub lipschitz: f64,
    pub linear_growth: f64,
    pub label: String,
}

impl std::fmt::Debug for Coefficients {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Coefficients")
            .field("label", &self.label)
            .field("drift", &self.drift.as_ref().map(|_| "<fn>"))
            .field("lipschitz", &self.lipschitz)
            .field("linear_growth", &self.linear_growth)
            .finish()
    }
}

/// Serializable coefficient choices for configs and report echoes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientPreset {
    /// `b = 0`, `g = 0`: the deterministic linear pair.
    Zero,
    /// `b = 0`, `g = 1`: additive noise.
    Additive,
    /// `b = 0`, `g(u) = c0 + c1 / sqrt(1 + u²)`: bounded multiplicative noise.
    SaturatingDiffusion { c0: f64, c1: f64 },
    /// `b(u) = amplitude · sin(u)`, `g = 1`.
    SineDrift { amplitude: f64 },
    /// `b(u) = amplitude · sin(u)`, `g(u) = c0 + c1 / sqrt(1 + u²)`.
    SineDriftSaturating { amplitude: f64, c0: f64, c1: f64 },
    /// `b(u) = -rate · u`, `g = 1`.
    LinearDrift { rate: f64 },
}

impl CoefficientPreset {
    pub fn build(&self) -> Coefficients {
        // d/du (1 + u²)^{-1/2} peaks at u = 1/√2 with value 2/(3√3).
        const SATURATING_SLOPE: f64 = 0.384_900_179_459_750_5;
        match *self {
            CoefficientPreset::Zero => Coefficients {
                drift: None,
                diffusion: Arc::new(|_, _, _| 0.0),
                lipschitz: 0.0,
                linear_growth: 0.0,
                label: "zero".into(),
            },
            CoefficientPreset::Additive => Coefficients {
                drift: None,
                diffusion: Arc::new(|_, _, _| 1.0),
                lipschitz: 0.0,
                linear_growth: 1.0,
                label: "additive".into(),
            },
            CoefficientPreset::SaturatingDiffusion { c0, c1 } => Coefficients {
                drift: None,
                diffusion: Arc::new(move |_, _, u| c0 + c1 / (1.0 + u * u).sqrt()),
                lipschitz: c1.abs() * SATURATING_SLOPE,
                linear_growth: c0.abs() + c1.abs(),
                label: format!("saturating_diffusion(c0={c0},c1={c1})"),
            },
            CoefficientPreset::SineDrift { amplitude } => Coefficients {
                drift: Some(Arc::new(move |_, _, u| amplitude * u.sin())),
                diffusion: Arc::new(|_, _, _| 1.0),
                lipschitz: amplitude.abs(),
                linear_growth: amplitude.abs().max(1.0),
                label: format!("sine_drift(a={amplitude})"),
            },
            CoefficientPreset::SineDriftSaturating { amplitude, c0, c1 } => Coefficients {
                drift: Some(Arc::new(move |_, _, u| amplitude * u.sin())),
                diffusion: Arc::new(move |_, _, u| c0 + c1 / (1.0 + u * u).sqrt()),
                lipschitz: amplitude.abs().max(c1.abs() * SATURATING_SLOPE),
                linear_growth: amplitude.abs().max(c0.abs() + c1.abs()),
                label: format!("sine_drift_saturating(a={amplitude},c0={c0},c1={c1})"),
            },
            CoefficientPreset::LinearDrift { rate } => Coefficients {
                drift: Some(Arc::new(move |_, _, u| -rate * u)),
                diffusion: Arc::new(|_, _, _| 1.0),
                lipschitz: rate.abs(),
                linear_growth: rate.abs().max(1.0),
                label: format!("linear_drift(rate={rate})"),
            },
        }
    }
}

/// Samples `b(t, x_p, u(x_p))` on the grid; `None` when the drift is zero.
pub fn compose_drift(domain: &SpectralDomain, coeffs: &Coefficients, t: f64, u: &GridField) -> Option<GridField> {
    let b = coeffs.drift.as_ref()?;
    assert_eq!(u.len(), domain.n_grid());
    let values = u
        .values
        .iter()
        .enumerate()
        .map(|(p, &up)| b(t, domain.grid_coord(p), up))
        .collect();
    Some(GridField { values })
}

/// Samples the multiplier `g(t, x_p, u(x_p))` on the grid.
pub fn diffusion_factor(domain: &SpectralDomain, coeffs: &Coefficients, t: f64, u: &GridField) -> GridField {
    assert_eq!(u.len(), domain.n_grid());
    let g = &coeffs.diffusion;
    let values = u
        .values
        .iter()
        .enumerate()
        .map(|(p, &up)| g(t, domain.grid_coord(p), up))
        .collect();
    GridField { values }
}

/// `[G(t, u) h](x) = g(t, x, u(x)) h(x)` on the grid.
pub fn apply_diffusion(
    domain: &SpectralDomain,
    coeffs: &Coefficients,
    t: f64,
    u: &GridField,
    h: &GridField,
) -> GridField {
    let factor = diffusion_factor(domain, coeffs, t, u);
    let values = factor.values.iter().zip(&h.values).map(|(&g, &h)| g * h).collect();
    GridField { values }
}

/// `‖G(t, u)‖_{L(L^∞, H)} = (∫ g(t, x, u(x))² dx)^{1/2}` by midpoint quadrature.
pub fn op_norm_linf_to_h(domain: &SpectralDomain, coeffs: &Coefficients, t: f64, u: &GridField) -> f64 {
    let factor = diffusion_factor(domain, coeffs, t, u);
    let sq: f64 = factor.values.iter().map(|&g| g * g).sum();
    (domain.quad_weight() * sq).sqrt()
}

/// Largest sampled difference quotient of `b` and `g` in the state variable,
/// probed on an `n_states`-point grid of `u ∈ [-range, range]` at the first
/// few spatial points. A cheap certificate that the declared Lipschitz
/// constant is honest.
pub fn probe_lipschitz(domain: &SpectralDomain, coeffs: &Coefficients, t: f64, range: f64, n_states: usize) -> f64 {
    assert!(n_states >= 2);
    let mut worst: f64 = 0.0;
    let n_points = domain.n_grid().min(7);
    for p in 0..n_points {
        let x = domain.grid_coord(p);
        let mut prev_u = -range;
        let mut prev_b = coeffs.drift.as_ref().map(|b| b(t, x, prev_u));
        let mut prev_g = (coeffs.diffusion)(t, x, prev_u);
        for i in 1..n_states {
            let u = -range + 2.0 * range * i as f64 / (n_states - 1) as f64;
            let du = u - prev_u;
            if let (Some(b), Some(pb)) = (coeffs.drift.as_ref(), prev_b) {
                let cur = b(t, x, u);
                worst = worst.max(((cur - pb) / du).abs());
                prev_b = Some(cur);
            }
            let g = (coeffs.diffusion)(t, x, u);
            worst = worst.max(((g - prev_g) / du).abs());
            prev_g = g;
            prev_u = u;
        }
    }
    worst
}
