//! Exponential Euler integrators for the spectral heat and damped wave
//! systems, plus a Picard iteration on the discrete mild equation.
//!
//! Both schemes freeze the nonlinear coefficients at the left endpoint
//! (Itô convention) and propagate one step with the *exact* linear flow:
//!
//! ```text
//! heat:  u_k ← e^{-α_k dt} (u_k + dt·B_k + (G QΔw)_k)
//! wave:  (u_k, v_k) ← M_k(dt)(u_k, v_k) + (f_k(dt;0,1/μ), f_k'(dt;0,1/μ)) · F_k
//!        F_k = dt·B_k + (G QΔw)_k
//! ```
//!
//! where `M_k` is the per-mode fundamental matrix and the forcing enters the
//! wave pair through the velocity slot scaled by `1/μ`. An explicit scheme
//! would need `dt ~ μ` to survive the `-1/μ` velocity eigenvalue; the exact
//! propagator keeps one `dt` usable across the whole mass sweep, and as
//! `μ → 0` the forced-increment weights converge to the heat weights, so the
//! coupled difference measures the physics rather than the discretization.
//!
//! `B_k` and `(G QΔw)_k` are assembled pseudo-spectrally: synthesize the
//! state and the noise field on the grid, compose pointwise, project back.

use crate::error::{Error, Result};
use crate::fields::{compose_drift, diffusion_factor, pair_norm, PhasePoint};
use crate::noise::{standard_gaussians, CovarianceQ};
use crate::semigroup::{heat_mode, mode_propagator, ModePropagator};
use crate::spectrum::{GridField, SpectralDomain};
use crate::fields::Coefficients;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Equation {
    Heat,
    Wave,
}

/// One solver run: which equation, mass, horizon, resolution, data, seed.
#[derive(Debug, Clone, Serialize)]
pub struct SimConfig {
    pub equation: Equation,
    /// Mass μ; ignored by the heat equation.
    pub mu: f64,
    pub t_final: f64,
    pub n_steps: usize,
    pub seed: u64,
    pub u0: Vec<f64>,
    /// Initial velocity modes; must be empty or length K for heat runs too
    /// (they are simply unused there).
    pub v0: Vec<f64>,
    /// Keep every `save_stride`-th state (the endpoint is always kept).
    pub save_stride: usize,
}

impl SimConfig {
    pub fn dt(&self) -> f64 {
        self.t_final / self.n_steps as f64
    }

    pub fn validate(&self, domain: &SpectralDomain) -> Result<()> {
        let k = domain.truncation();
        if self.equation == Equation::Wave && !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::Config(format!("wave runs need μ > 0, got {}", self.mu)));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::Config(format!("t_final must be positive, got {}", self.t_final)));
        }
        if self.n_steps == 0 {
            return Err(Error::Config("n_steps must be at least 1".into()));
        }
        if self.save_stride == 0 {
            return Err(Error::Config("save_stride must be at least 1".into()));
        }
        if self.u0.len() != k {
            return Err(Error::Config(format!("u0 has {} modes, domain has {k}", self.u0.len())));
        }
        if !self.v0.is_empty() && self.v0.len() != k {
            return Err(Error::Config(format!("v0 has {} modes, domain has {k}", self.v0.len())));
        }
        if self.u0.iter().chain(&self.v0).any(|x| !x.is_finite()) {
            return Err(Error::Config("initial data must be finite".into()));
        }
        Ok(())
    }
}

/// Saved states of one run on the save grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub equation: Equation,
    pub times: Vec<f64>,
    pub states: Vec<PhasePoint>,
}

impl Trajectory {
    pub fn endpoint(&self) -> &PhasePoint {
        self.states.last().expect("trajectory has at least the initial state")
    }

    /// Running max of the position norm `|u(t)|_H` over the saved snapshots
    /// (the full running max when `save_stride = 1`).
    pub fn sup_h_norm(&self) -> f64 {
        self.states
            .iter()
            .map(|z| z.u_coeffs.iter().map(|&x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

/// Drift and noise forcing modes for one step, coefficients frozen at the
/// left endpoint: `dt·B_k + <g(t,·,u)·(QΔw), e_k>`.
pub fn forcing_modes(
    domain: &SpectralDomain,
    coeffs: &Coefficients,
    cov: &CovarianceQ,
    t: f64,
    dt: f64,
    u_coeffs: &[f64],
    gaussians: &[f64],
) -> Vec<f64> {
    let u_field = domain.synthesize(u_coeffs);

    let sdt = dt.sqrt();
    let noise_coeffs: Vec<f64> = gaussians
        .iter()
        .zip(cov.eigenvalues())
        .map(|(&xi, &l)| l * sdt * xi)
        .collect();
    let noise_field = domain.synthesize(&noise_coeffs);
    let factor = diffusion_factor(domain, coeffs, t, &u_field);
    let modulated = GridField {
        values: factor.values.iter().zip(&noise_field.values).map(|(&g, &n)| g * n).collect(),
    };
    let mut forcing = domain.analyze(&modulated);

    if let Some(drift_field) = compose_drift(domain, coeffs, t, &u_field) {
        let drift_modes = domain.analyze(&drift_field);
        for (f, b) in forcing.iter_mut().zip(&drift_modes) {
            *f += dt * b;
        }
    }
    forcing
}

/// Heat step tables: per-mode decay over one `dt`.
pub struct HeatStepper {
    decay: Vec<f64>,
    dt: f64,
}

impl HeatStepper {
    pub fn new(domain: &SpectralDomain, dt: f64) -> Self {
        let decay = domain.eigenvalues().iter().map(|&a| heat_mode(a, dt)).collect();
        HeatStepper { decay, dt }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advances position modes in place; aborts if any mode leaves the
    /// finite range.
    pub fn step(
        &self,
        domain: &SpectralDomain,
        coeffs: &Coefficients,
        cov: &CovarianceQ,
        t: f64,
        u: &mut [f64],
        gaussians: &[f64],
    ) -> Result<()> {
        let forcing = forcing_modes(domain, coeffs, cov, t, self.dt, u, gaussians);
        for (k, uk) in u.iter_mut().enumerate() {
            *uk = self.decay[k] * (*uk + forcing[k]);
        }
        if u.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("non-finite position mode at t = {t:.6}")));
        }
        Ok(())
    }
}

/// Wave step tables: per-mode fundamental matrix over one `dt` and the
/// forced-increment weights `(f_k(dt;0,1/μ), f_k'(dt;0,1/μ))`.
pub struct WaveStepper {
    props: Vec<ModePropagator>,
    forced_u: Vec<f64>,
    forced_v: Vec<f64>,
    dt: f64,
}

impl WaveStepper {
    pub fn new(domain: &SpectralDomain, mu: f64, dt: f64) -> Self {
        assert!(mu > 0.0);
        let props: Vec<ModePropagator> =
            domain.eigenvalues().iter().map(|&a| mode_propagator(mu, a, dt)).collect();
        let forced_u = props.iter().map(|p| p.val_v / mu).collect();
        let forced_v = props.iter().map(|p| p.deriv_v / mu).collect();
        WaveStepper { props, forced_u, forced_v, dt }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Weights multiplying the forcing in the position and velocity slots.
    pub fn forced_weights(&self, k: usize) -> (f64, f64) {
        (self.forced_u[k], self.forced_v[k])
    }

    /// Advances one phase point in place; aborts if any mode leaves the
    /// finite range.
    pub fn step(
        &self,
        domain: &SpectralDomain,
        coeffs: &Coefficients,
        cov: &CovarianceQ,
        t: f64,
        z: &mut PhasePoint,
        gaussians: &[f64],
    ) -> Result<()> {
        let forcing = forcing_modes(domain, coeffs, cov, t, self.dt, &z.u_coeffs, gaussians);
        for k in 0..z.u_coeffs.len() {
            let p = &self.props[k];
            let (u, v) = (z.u_coeffs[k], z.v_coeffs[k]);
            z.u_coeffs[k] = p.val_u * u + p.val_v * v + self.forced_u[k] * forcing[k];
            z.v_coeffs[k] = p.deriv_u * u + p.deriv_v * v + self.forced_v[k] * forcing[k];
        }
        if z.u_coeffs.iter().chain(&z.v_coeffs).any(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("non-finite phase mode at t = {t:.6}")));
        }
        Ok(())
    }
}

/// Simulates one path with counter-based increments keyed by
/// `(config.seed, path_id, step)`.
pub fn run_path(
    domain: &SpectralDomain,
    coeffs: &Coefficients,
    cov: &CovarianceQ,
    config: &SimConfig,
    path_id: u64,
) -> Result<Trajectory> {
    config.validate(domain)?;
    let k = domain.truncation();
    let dt = config.dt();
    let n = config.n_steps;

    let mut z = PhasePoint {
        u_coeffs: config.u0.clone(),
        v_coeffs: if config.v0.is_empty() { vec![0.0; k] } else { config.v0.clone() },
    };

    let mut times = Vec::new();
    let mut states = Vec::new();
    let save = |i: usize, z: &PhasePoint, times: &mut Vec<f64>, states: &mut Vec<PhasePoint>| {
        times.push(i as f64 * dt);
        states.push(z.clone());
    };
    save(0, &z, &mut times, &mut states);

    match config.equation {
        Equation::Heat => {
            let stepper = HeatStepper::new(domain, dt);
            for i in 0..n {
                let gaussians = standard_gaussians(config.seed, path_id, i as u64, k);
                let t = i as f64 * dt;
                stepper
                    .step(domain, coeffs, cov, t, &mut z.u_coeffs, &gaussians)
                    .map_err(|e| match e {
                        Error::Domain(m) => Error::Domain(format!("step {}: {m}", i + 1)),
                        other => other,
                    })?;
                if (i + 1) % config.save_stride == 0 || i + 1 == n {
                    save(i + 1, &z, &mut times, &mut states);
                }
            }
        }
        Equation::Wave => {
            let stepper = WaveStepper::new(domain, config.mu, dt);
            for i in 0..n {
                let gaussians = standard_gaussians(config.seed, path_id, i as u64, k);
                let t = i as f64 * dt;
                stepper
                    .step(domain, coeffs, cov, t, &mut z, &gaussians)
                    .map_err(|e| match e {
                        Error::Domain(m) => Error::Domain(format!("step {}: {m}", i + 1)),
                        other => other,
                    })?;
                if (i + 1) % config.save_stride == 0 || i + 1 == n {
                    save(i + 1, &z, &mut times, &mut states);
                }
            }
        }
    }

    Ok(Trajectory { equation: config.equation, times, states })
}

/// Successive-approximation record for the discrete mild equation.
#[derive(Debug, Clone, Serialize)]
pub struct PicardReport {
    pub iterations: usize,
    /// `sup_i ‖φ^{m+1}(t_i) - φ^m(t_i)‖` per iteration.
    pub sup_diffs: Vec<f64>,
    /// Consecutive ratios of `sup_diffs`.
    pub ratios: Vec<f64>,
    pub converged: bool,
}

/// Iterates the discrete mild map
/// `φ(t_i) = Hom(t_i) z₀ + Σ_{j<i} Ker(t_i - t_j) F_j(φ(t_j))`
/// on a frozen noise path until successive iterates stop moving (sup-norm
/// `tol`) or `max_iters` is hit. The kernel applies the exact linear flow of
/// the configured equation to each left-endpoint forcing, so the fixed point
/// coincides with the time-stepped solution of [`run_path`] up to rounding.
/// Returns the report and the final iterate on the full step grid.
pub fn picard_solve(
    domain: &SpectralDomain,
    coeffs: &Coefficients,
    cov: &CovarianceQ,
    config: &SimConfig,
    path_id: u64,
    max_iters: usize,
    tol: f64,
) -> Result<(PicardReport, Trajectory)> {
    config.validate(domain)?;
    if max_iters == 0 {
        return Err(Error::Config("need at least one iteration".into()));
    }
    let k = domain.truncation();
    let n = config.n_steps;
    let dt = config.dt();
    let is_wave = config.equation == Equation::Wave;

    // Exact flow over every gap g·dt, g = 1..n.
    let heat_ker: Vec<Vec<f64>> = if is_wave {
        Vec::new()
    } else {
        (1..=n)
            .map(|g| domain.eigenvalues().iter().map(|&a| heat_mode(a, g as f64 * dt)).collect())
            .collect()
    };
    let wave_ker: Vec<Vec<ModePropagator>> = if is_wave {
        (1..=n)
            .map(|g| {
                domain
                    .eigenvalues()
                    .iter()
                    .map(|&a| mode_propagator(config.mu, a, g as f64 * dt))
                    .collect()
            })
            .collect()
    } else {
        Vec::new()
    };

    let z0 = PhasePoint {
        u_coeffs: config.u0.clone(),
        v_coeffs: if config.v0.is_empty() { vec![0.0; k] } else { config.v0.clone() },
    };

    // Homogeneous part once.
    let hom: Vec<PhasePoint> = (0..=n)
        .map(|i| {
            if i == 0 {
                z0.clone()
            } else if is_wave {
                let props = &wave_ker[i - 1];
                let mut z = PhasePoint::zeros(k);
                for m in 0..k {
                    z.u_coeffs[m] = props[m].val_u * z0.u_coeffs[m] + props[m].val_v * z0.v_coeffs[m];
                    z.v_coeffs[m] = props[m].deriv_u * z0.u_coeffs[m] + props[m].deriv_v * z0.v_coeffs[m];
                }
                z
            } else {
                let decay = &heat_ker[i - 1];
                PhasePoint {
                    u_coeffs: (0..k).map(|m| decay[m] * z0.u_coeffs[m]).collect(),
                    v_coeffs: vec![0.0; k],
                }
            }
        })
        .collect();

    let increments: Vec<Vec<f64>> =
        (0..n as u64).map(|s| standard_gaussians(config.seed, path_id, s, k)).collect();

    let mut phi = hom.clone();
    let mut sup_diffs = Vec::new();
    let mut ratios = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..max_iters {
        iterations += 1;
        let forcings: Vec<Vec<f64>> = (0..n)
            .map(|j| {
                forcing_modes(domain, coeffs, cov, j as f64 * dt, dt, &phi[j].u_coeffs, &increments[j])
            })
            .collect();

        let mut next = hom.clone();
        for i in 1..=n {
            for j in 0..i {
                let g = i - j - 1; // kernel gap index for (i-j)·dt
                let f = &forcings[j];
                if is_wave {
                    let props = &wave_ker[g];
                    for m in 0..k {
                        next[i].u_coeffs[m] += props[m].val_v / config.mu * f[m];
                        next[i].v_coeffs[m] += props[m].deriv_v / config.mu * f[m];
                    }
                } else {
                    let decay = &heat_ker[g];
                    for m in 0..k {
                        next[i].u_coeffs[m] += decay[m] * f[m];
                    }
                }
            }
        }

        let mut sup = 0.0f64;
        for i in 0..=n {
            let diff = PhasePoint {
                u_coeffs: (0..k).map(|m| next[i].u_coeffs[m] - phi[i].u_coeffs[m]).collect(),
                v_coeffs: if is_wave {
                    (0..k).map(|m| next[i].v_coeffs[m] - phi[i].v_coeffs[m]).collect()
                } else {
                    vec![0.0; k]
                },
            };
            sup = sup.max(pair_norm(domain, &diff));
        }
        if let Some(&prev) = sup_diffs.last() {
            if prev > 0.0 {
                ratios.push(sup / prev);
            }
        }
        sup_diffs.push(sup);
        phi = next;
        if sup <= tol {
            converged = true;
            break;
        }
    }

    let times: Vec<f64> = (0..=n).map(|i| i as f64 * dt).collect();
    let report = PicardReport { iterations, sup_diffs, ratios, converged };
    Ok((report, Trajectory { equation: config.equation, times, states: phi }))
}
