//! Coupled small-mass experiments: wave and heat runs driven by identical
//! noise, the five-term decomposition of their pathwise difference, and the
//! Monte Carlo sweeps that watch the difference drain as μ → 0.
//!
//! Both discrete solutions unroll to explicit convolution sums over the step
//! grid. Writing `E(τ)` for the heat kernel and `fin(τ) = f(τ; 0, 1/μ)` for
//! the wave forced-response kernel, the position gap at `t_i` splits exactly
//! (to rounding) into
//!
//! ```text
//! u(t_i) - u^μ(t_i) = J₁ + J₂ + J₃ + J₄ + J₅
//! J₁ = E(t_i)u₀ - Π₁M(t_i)(u₀, v₀)            initial-data gap
//! J₂ = Σ_j [E - fin](t_i - t_j) dt B^h_j       drift kernel gap
//! J₃ = Σ_j fin(t_i - t_j) dt (B^h_j - B^w_j)   drift coefficient gap
//! J₄ = Σ_j [E - fin](t_i - t_j) N^h_j          noise kernel gap
//! J₅ = Σ_j fin(t_i - t_j) (N^h_j - N^w_j)      noise coefficient gap
//! ```
//!
//! so the triangle inequality `|u - u^μ| ≤ Σ |J_r|` is checkable pathwise.
//! Paths are independent given `(seed, path_id)`; aggregation uses ordered
//! pairwise summation so reports are byte-identical for any worker count.

use crate::analysis::{log_log_slope, mean_and_se, pairwise_sum};
use crate::error::{Error, Result};
use crate::fields::{compose_drift, diffusion_factor, CoefficientPreset, Coefficients};
use crate::noise::{standard_gaussians, CovarianceQ};
use crate::semigroup::{heat_mode, mode_propagator, ModePropagator};
use crate::solver::{Equation, SimConfig};
use crate::spectrum::{GridField, SpectralDomain};
use rayon::prelude::*;
use serde::Serialize;

/// One μ-sweep: grid, path count, moment order, and the shared run skeleton
/// (`base.mu` and `base.equation` are overridden per level).
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    /// Strictly decreasing masses in (0, 1).
    pub mu_grid: Vec<f64>,
    pub n_paths: usize,
    /// Moment order `p ≥ 2` applied to the running sup of the gap.
    pub p_moment: f64,
    /// The smallest-μ estimate must fall below this fraction of the largest.
    pub ratio_threshold: f64,
    pub base: SimConfig,
}

impl ExperimentConfig {
    pub fn validate(&self, domain: &SpectralDomain) -> Result<()> {
        if self.mu_grid.is_empty() {
            return Err(Error::Config("mass grid must not be empty".into()));
        }
        if !self.mu_grid.iter().all(|&m| m > 0.0 && m < 1.0 && m.is_finite()) {
            return Err(Error::Config(format!("masses must lie in (0,1): {:?}", self.mu_grid)));
        }
        if !self.mu_grid.windows(2).all(|w| w[1] < w[0]) {
            return Err(Error::Config(format!(
                "mass grid must be strictly decreasing: {:?}",
                self.mu_grid
            )));
        }
        if self.n_paths == 0 {
            return Err(Error::Config("need at least one path".into()));
        }
        if !(self.p_moment >= 2.0) {
            return Err(Error::Config(format!("moment order must be >= 2, got {}", self.p_moment)));
        }
        if !(self.ratio_threshold > 0.0 && self.ratio_threshold <= 1.0) {
            return Err(Error::Config(format!(
                "ratio threshold must lie in (0,1], got {}",
                self.ratio_threshold
            )));
        }
        let probe = SimConfig { equation: Equation::Wave, mu: self.mu_grid[0], ..self.base.clone() };
        probe.validate(domain)
    }
}

/// Sup-norms of the five gap terms along one path.
#[derive(Debug, Clone, Serialize)]
pub struct JDecomposition {
    pub sups: [f64; 5],
    /// Running sup of the actual position gap.
    pub total_sup: f64,
    /// Triangle-inequality domination `|gap|(t) ≤ Σ_r |J_r|(t)` at every
    /// grid time, up to rounding slack.
    pub dominated: bool,
}

/// Everything harvested from one coupled (wave, heat) path.
#[derive(Debug, Clone)]
pub struct CoupledSample {
    /// `sup_t |u^μ(t) - u(t)|_H` over the step grid.
    pub sup_gap: f64,
    pub j: JDecomposition,
    /// Per-mode position gap at the final time.
    pub endpoint_gap: Vec<f64>,
}

/// Per-level kernel tables shared by every path of a μ level.
struct LevelTables {
    /// `M(g·dt)` flattened: entry `(g-1)*k + m` for gaps `g = 1..=n`.
    props: Vec<ModePropagator>,
    /// `e^{-α_m g dt}` with the same layout.
    heat: Vec<f64>,
    mu: f64,
    dt: f64,
    n: usize,
    k: usize,
}

impl LevelTables {
    fn new(domain: &SpectralDomain, mu: f64, dt: f64, n: usize) -> Self {
        let k = domain.truncation();
        let mut props = Vec::with_capacity(n * k);
        let mut heat = Vec::with_capacity(n * k);
        for g in 1..=n {
            let tau = g as f64 * dt;
            for &a in domain.eigenvalues() {
                props.push(mode_propagator(mu, a, tau));
                heat.push(heat_mode(a, tau));
            }
        }
        LevelTables { props, heat, mu, dt, n, k }
    }

    fn fin(&self, g: usize, m: usize) -> f64 {
        self.props[(g - 1) * self.k + m].val_v / self.mu
    }

    fn heat_at(&self, g: usize, m: usize) -> f64 {
        self.heat[(g - 1) * self.k + m]
    }
}

const DOMINATION_SLACK: f64 = 1e-9;

fn coupled_path(
    tables: &LevelTables,
    domain: &SpectralDomain,
    coeffs: &Coefficients,
    cov: &CovarianceQ,
    base: &SimConfig,
    path_id: u64,
) -> Result<CoupledSample> {
    let k = tables.k;
    let n = tables.n;
    let dt = tables.dt;
    let mu = tables.mu;
    let sdt = dt.sqrt();
    let has_drift = compose_drift(domain, coeffs, 0.0, &GridField::zeros(domain.n_grid())).is_some();

    let u0 = base.u0.clone();
    let v0 = if base.v0.is_empty() { vec![0.0; k] } else { base.v0.clone() };
    let mut u_h = u0.clone();
    let mut u_w = u0.clone();
    let mut v_w = v0.clone();

    // Forcing snapshots for the decomposition.
    let mut b_h = vec![0.0; n * k];
    let mut b_w = vec![0.0; n * k];
    let mut n_h = vec![0.0; n * k];
    let mut n_w = vec![0.0; n * k];
    let mut gap_norm = vec![0.0; n + 1];

    for j in 0..n {
        let t = j as f64 * dt;
        let gauss = standard_gaussians(base.seed, path_id, j as u64, k);
        let noise_coeffs: Vec<f64> =
            gauss.iter().zip(cov.eigenvalues()).map(|(&x, &l)| l * sdt * x).collect();
        let noise_field = domain.synthesize(&noise_coeffs);

        // Heat side.
        let field_h = domain.synthesize(&u_h);
        if let Some(drift) = compose_drift(domain, coeffs, t, &field_h) {
            let modes = domain.analyze(&drift);
            b_h[j * k..(j + 1) * k].copy_from_slice(&modes);
        }
        let factor = diffusion_factor(domain, coeffs, t, &field_h);
        let modulated = GridField {
            values: factor.values.iter().zip(&noise_field.values).map(|(&g, &w)| g * w).collect(),
        };
        let noise_modes = domain.analyze(&modulated);
        n_h[j * k..(j + 1) * k].copy_from_slice(&noise_modes);

        // Wave side, same increments.
        let field_w = domain.synthesize(&u_w);
        if let Some(drift) = compose_drift(domain, coeffs, t, &field_w) {
            let modes = domain.analyze(&drift);
            b_w[j * k..(j + 1) * k].copy_from_slice(&modes);
        }
        let factor = diffusion_factor(domain, coeffs, t, &field_w);
        let modulated = GridField {
            values: factor.values.iter().zip(&noise_field.values).map(|(&g, &w)| g * w).collect(),
        };
        let noise_modes = domain.analyze(&modulated);
        n_w[j * k..(j + 1) * k].copy_from_slice(&noise_modes);

        // Advance one exact-propagator step each.
        let mut gap_sq = 0.0;
        for m in 0..k {
            let fh = dt * b_h[j * k + m] + n_h[j * k + m];
            u_h[m] = tables.heat_at(1, m) * (u_h[m] + fh);

            let fw = dt * b_w[j * k + m] + n_w[j * k + m];
            let p = &tables.props[m]; // g = 1 row
            let (u, v) = (u_w[m], v_w[m]);
            u_w[m] = p.val_u * u + p.val_v * v + p.val_v / mu * fw;
            v_w[m] = p.deriv_u * u + p.deriv_v * v + p.deriv_v / mu * fw;

            let d = u_h[m] - u_w[m];
            gap_sq += d * d;
        }
        gap_norm[j + 1] = gap_sq.sqrt();
        if !gap_norm[j + 1].is_finite()
            || u_h.iter().any(|x| !x.is_finite())
            || v_w.iter().any(|x| !x.is_finite())
        {
            return Err(Error::Domain(format!(
                "non-finite state at step {} (t = {:.6}) on path {path_id}",
                j + 1,
                t + dt
            )));
        }
    }

    let sup_gap = gap_norm.iter().fold(0.0f64, |a, &b| a.max(b));
    let endpoint_gap: Vec<f64> = (0..k).map(|m| u_h[m] - u_w[m]).collect();

    // Decomposition sups.
    let mut sups = [0.0f64; 5];
    let mut dominated = true;
    let mut term = vec![[0.0f64; 5]; k];
    for i in 1..=n {
        for row in term.iter_mut() {
            *row = [0.0; 5];
        }
        for m in 0..k {
            let e = tables.heat_at(i, m);
            let p = &tables.props[(i - 1) * k + m];
            term[m][0] = e * u0[m] - (p.val_u * u0[m] + p.val_v * v0[m]);
        }
        for g in 1..=i {
            let j = i - g;
            for m in 0..k {
                let e = tables.heat_at(g, m);
                let fin = tables.fin(g, m);
                let bh = b_h[j * k + m];
                if has_drift {
                    term[m][1] += (e - fin) * dt * bh;
                    term[m][2] += fin * dt * (bh - b_w[j * k + m]);
                }
                let nh = n_h[j * k + m];
                term[m][3] += (e - fin) * nh;
                term[m][4] += fin * (nh - n_w[j * k + m]);
            }
        }
        let mut norms = [0.0f64; 5];
        for m in 0..k {
            for r in 0..5 {
                norms[r] += term[m][r] * term[m][r];
            }
        }
        let mut bound = 0.0;
        for r in 0..5 {
            norms[r] = norms[r].sqrt();
            sups[r] = sups[r].max(norms[r]);
            bound += norms[r];
        }
        if gap_norm[i] > bound + DOMINATION_SLACK * (1.0 + bound) {
            dominated = false;
        }
    }

    Ok(CoupledSample {
        sup_gap,
        j: JDecomposition { sups, total_sup: sup_gap, dominated },
        endpoint_gap,
    })
}

/// Simulates the wave and heat systems on identical increments and returns
/// the gap functional plus its five-term decomposition.
pub fn run_coupled_path(
    domain: &SpectralDomain,
    coeffs: &Coefficients,
    cov: &CovarianceQ,
    base: &SimConfig,
    mu: f64,
    path_id: u64,
) -> Result<CoupledSample> {
    let probe = SimConfig { equation: Equation::Wave, mu, ..base.clone() };
    probe.validate(domain)?;
    let tables = LevelTables::new(domain, mu, base.t_final / base.n_steps as f64, base.n_steps);
    coupled_path(&tables, domain, coeffs, cov, base, path_id)
}

/// The decomposition alone, for term-wise diagnostics.
pub fn j_decomposition(
    domain: &SpectralDomain,
    coeffs: &Coefficients,
    cov: &CovarianceQ,
    base: &SimConfig,
    mu: f64,
    path_id: u64,
) -> Result<JDecomposition> {
    run_coupled_path(domain, coeffs, cov, base, mu, path_id).map(|s| s.j)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub mu: f64,
    /// Monte Carlo mean of `sup_t |u^μ - u|_H^p`.
    pub estimate: f64,
    pub std_error: f64,
    /// Path means of the five decomposition sups.
    pub j_sup_means: [f64; 5],
    pub n_paths: usize,
    pub aborted: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub rows: Vec<SweepRow>,
    /// Log-log slope of the estimate against μ.
    pub trend: f64,
    /// Strict decrease with at least one standard error between levels.
    pub separation_ok: bool,
    /// Smallest-μ estimate below `ratio_threshold` × largest.
    pub ratio_ok: bool,
    pub passed: bool,
}

/// The small-mass convergence experiment: for every μ in the grid, average
/// the coupled gap functional over paths and demand a clean decrease.
pub fn run_sk_sweep(
    domain: &SpectralDomain,
    coeffs: &Coefficients,
    cov: &CovarianceQ,
    config: &ExperimentConfig,
) -> Result<ConvergenceReport> {
    config.validate(domain)?;
    let base = &config.base;
    let p = config.p_moment;
    let dt = base.t_final / base.n_steps as f64;
    let mut rows = Vec::with_capacity(config.mu_grid.len());

    for &mu in &config.mu_grid {
        let tables = LevelTables::new(domain, mu, dt, base.n_steps);
        let samples: Vec<Result<CoupledSample>> = (0..config.n_paths as u64)
            .into_par_iter()
            .map(|pid| coupled_path(&tables, domain, coeffs, cov, base, pid))
            .collect();
        let aborted = samples.iter().filter(|s| s.is_err()).count();
        let ok: Vec<&CoupledSample> = samples.iter().filter_map(|s| s.as_ref().ok()).collect();
        if ok.is_empty() {
            return Err(Error::Domain(format!("every path aborted at mass {mu}")));
        }
        let powered: Vec<f64> = ok
            .iter()
            .map(|s| if p == 2.0 { s.sup_gap * s.sup_gap } else { s.sup_gap.powf(p) })
            .collect();
        let (estimate, std_error) = mean_and_se(&powered);
        let mut j_sup_means = [0.0f64; 5];
        for (r, jm) in j_sup_means.iter_mut().enumerate() {
            let vals: Vec<f64> = ok.iter().map(|s| s.j.sups[r]).collect();
            *jm = pairwise_sum(&vals) / vals.len() as f64;
        }
        let dominated = ok.iter().all(|s| s.j.dominated);
        let abort_ok = aborted * 100 <= config.n_paths;
        rows.push(SweepRow {
            mu,
            estimate,
            std_error,
            j_sup_means,
            n_paths: ok.len(),
            aborted,
            passed: dominated && abort_ok,
        });
    }

    let mus: Vec<f64> = rows.iter().map(|r| r.mu).collect();
    let ests: Vec<f64> = rows.iter().map(|r| r.estimate).collect();
    let trend = log_log_slope(&mus, &ests);
    let separation_ok = rows
        .windows(2)
        .all(|w| w[0].estimate - w[1].estimate >= w[0].std_error.max(w[1].std_error));
    let ratio_ok = match (rows.first(), rows.last()) {
        (Some(first), Some(last)) => last.estimate < config.ratio_threshold * first.estimate,
        _ => false,
    };
    let passed = rows.iter().all(|r| r.passed) && separation_ok && ratio_ok;
    Ok(ConvergenceReport { rows, trend, separation_ok, ratio_ok, passed })
}

#[derive(Debug, Clone, Serialize)]
pub struct GammaGapRow {
    pub mu: f64,
    /// Mean of `sup_t |Π₁Γ^μ - Γ|_H²`.
    pub estimate: f64,
    pub std_error: f64,
    /// Per-mode mean square gap at the final time (Itô isometry target).
    pub endpoint_second_moment: Vec<f64>,
    pub endpoint_std_error: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GammaGapReport {
    pub rows: Vec<GammaGapRow>,
    pub decreasing: bool,
    pub passed: bool,
}

/// Gap between the wave and heat stochastic convolutions under additive
/// noise: requires zero initial data so the coupled difference is exactly
/// the convolution gap. Decreasing trend across the μ grid with one
/// standard error of slack.
pub fn gamma_gap_check(
    domain: &SpectralDomain,
    cov: &CovarianceQ,
    base: &SimConfig,
    mu_grid: &[f64],
    n_paths: usize,
) -> Result<GammaGapReport> {
    if base.u0.iter().any(|&x| x != 0.0) || base.v0.iter().any(|&x| x != 0.0) {
        return Err(Error::Config("convolution-gap check needs zero initial data".into()));
    }
    if mu_grid.is_empty() || !mu_grid.windows(2).all(|w| w[1] < w[0]) {
        return Err(Error::Config("mass grid must be nonempty and strictly decreasing".into()));
    }
    if n_paths == 0 {
        return Err(Error::Config("need at least one path".into()));
    }
    let coeffs = CoefficientPreset::Additive.build();
    let k = domain.truncation();
    let dt = base.t_final / base.n_steps as f64;
    let mut rows = Vec::with_capacity(mu_grid.len());
    for &mu in mu_grid {
        let tables = LevelTables::new(domain, mu, dt, base.n_steps);
        let samples: Vec<Result<CoupledSample>> = (0..n_paths as u64)
            .into_par_iter()
            .map(|pid| coupled_path(&tables, domain, &coeffs, cov, base, pid))
            .collect();
        let ok: Vec<&CoupledSample> = samples.iter().filter_map(|s| s.as_ref().ok()).collect();
        if ok.len() < n_paths {
            return Err(Error::Domain(format!("{} paths aborted at mass {mu}", n_paths - ok.len())));
        }
        let sq: Vec<f64> = ok.iter().map(|s| s.sup_gap * s.sup_gap).collect();
        let (estimate, std_error) = mean_and_se(&sq);
        let mut endpoint_second_moment = vec![0.0; k];
        let mut endpoint_std_error = vec![0.0; k];
        for m in 0..k {
            let vals: Vec<f64> = ok.iter().map(|s| s.endpoint_gap[m] * s.endpoint_gap[m]).collect();
            let (mean, se) = mean_and_se(&vals);
            endpoint_second_moment[m] = mean;
            endpoint_std_error[m] = se;
        }
        rows.push(GammaGapRow { mu, estimate, std_error, endpoint_second_moment, endpoint_std_error });
    }
    let decreasing = rows.windows(2).all(|w| {
        let slack = (w[0].std_error * w[0].std_error + w[1].std_error * w[1].std_error).sqrt();
        w[1].estimate < w[0].estimate + slack
    });
    let passed = decreasing;
    Ok(GammaGapReport { rows, decreasing, passed })
}

#[derive(Debug, Clone, Serialize)]
pub struct LebesgueGapReport {
    /// `sup_i |∫₀^{t_i} (S - Π₁S_μI_μ)(t_i - s) φ(s) ds|_H` on the grid.
    pub sup_gap: f64,
    /// `∫₀^T |φ(s)|_H ds`.
    pub phi_integral: f64,
    /// Envelope constant: the kernel gap has operator norm at most 5.
    pub bound: f64,
    pub passed: bool,
}

/// Deterministic convolution gap for a stored H-valued path `φ`, evaluated
/// with midpoint sub-quadrature, plus the uniform envelope
/// `sup_gap ≤ 5 ∫ |φ|`.
pub fn lebesgue_convolution_gap(
    domain: &SpectralDomain,
    mu: f64,
    times: &[f64],
    phi_modes: &[Vec<f64>],
    n_sub: usize,
) -> Result<LebesgueGapReport> {
    let k = domain.truncation();
    if times.len() < 2 || times.len() != phi_modes.len() {
        return Err(Error::Config("need matching time and value grids with at least two points".into()));
    }
    if phi_modes.iter().any(|v| v.len() != k) {
        return Err(Error::Config("every φ snapshot must carry one value per mode".into()));
    }
    if !(mu > 0.0) || n_sub == 0 {
        return Err(Error::Config("need positive mass and at least one subcell".into()));
    }
    let evs = domain.eigenvalues();
    let interp = |s: f64, out: &mut [f64]| {
        let n = times.len();
        let hi = times.partition_point(|&t| t <= s).clamp(1, n - 1);
        let lo = hi - 1;
        let w = ((s - times[lo]) / (times[hi] - times[lo])).clamp(0.0, 1.0);
        for (m, o) in out.iter_mut().enumerate() {
            *o = (1.0 - w) * phi_modes[lo][m] + w * phi_modes[hi][m];
        }
    };

    let mut sup_gap = 0.0f64;
    let mut phi_buf = vec![0.0; k];
    for (i, &ti) in times.iter().enumerate().skip(1) {
        let mut acc = vec![0.0; k];
        for j in 0..i {
            let (a, b) = (times[j], times[j + 1]);
            let h = (b - a) / n_sub as f64;
            for l in 0..n_sub {
                let s = a + (l as f64 + 0.5) * h;
                interp(s, &mut phi_buf);
                let tau = ti - s;
                for m in 0..k {
                    let gap = heat_mode(evs[m], tau) - mode_propagator(mu, evs[m], tau).val_v / mu;
                    acc[m] += h * gap * phi_buf[m];
                }
            }
        }
        let norm = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
        sup_gap = sup_gap.max(norm);
    }

    let mut phi_integral = 0.0;
    for j in 0..times.len() - 1 {
        let (a, b) = (times[j], times[j + 1]);
        let h = (b - a) / n_sub as f64;
        for l in 0..n_sub {
            let s = a + (l as f64 + 0.5) * h;
            interp(s, &mut phi_buf);
            phi_integral += h * phi_buf.iter().map(|x| x * x).sum::<f64>().sqrt();
        }
    }
    let bound = 5.0 * phi_integral;
    let passed = sup_gap <= bound * (1.0 + 1e-12) + 1e-12;
    Ok(LebesgueGapReport { sup_gap, phi_integral, bound, passed })
}
