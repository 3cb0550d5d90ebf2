//! Second-moment functionals of the stochastic convolutions.
//!
//! For a multiplication-operator path `Φ(s)` (the diffusion coefficient
//! frozen along a stored trajectory) and a diagonal covariance `Q`, the Itô
//! isometry turns every moment question about a kernel convolution into a
//! deterministic singular integral
//!
//! ```text
//! Λ(t) = ∫₀ᵗ τ^{-2a} Σ_k κ_k(τ)² c_k(t-τ) dτ,
//! c_k(s) = Σ_j λ_j² ⟨Φ(s) e_j, e_k⟩²,   τ = t - s,
//! ```
//!
//! where `κ_k` is a per-mode response kernel (heat decay, wave position, or
//! wave velocity) and `a ∈ (0, 1/2)` is the factorization exponent. The
//! integrable singularity at `τ = 0` is handled by product integration on a
//! mesh graded toward the singular end: `τ^{-2a}` is integrated exactly over
//! each cell, the smooth factor is sampled at the cell midpoint. The grading
//! also resolves the `O(μ)` boundary layer of the wave kernels.

use crate::error::{Error, Result};
use crate::fields::{diffusion_factor, op_norm_linf_to_h, Coefficients};
use crate::noise::CovarianceQ;
use crate::semigroup::{heat_mode, mode_propagator, n_mu};
use crate::solver::{run_path, Equation, SimConfig, Trajectory};
use crate::spectrum::SpectralDomain;
use crate::noise::standard_gaussians;
use serde::Serialize;

/// Exponents steering the factorization machinery.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AnalysisConfig {
    /// Factorization exponent `a ∈ (0, 1/2)`.
    pub alpha: f64,
    /// Summability exponent of the covariance, `q ≥ 2`.
    pub q_exponent: f64,
    /// Moment order, `p ≥ 2` and `p > 1/a`.
    pub p_moment: f64,
}

impl AnalysisConfig {
    /// Upper limit for `2a` in dimension `dim`: `1 - d(q-2)/(2q)`.
    pub fn window_limit(dim: usize, q: f64) -> f64 {
        1.0 - dim as f64 * (q - 2.0) / (2.0 * q)
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(Error::Admissibility(format!(
                "factorization exponent must lie in (0, 1/2), got {}",
                self.alpha
            )));
        }
        if !(self.q_exponent >= 2.0) {
            return Err(Error::Admissibility(format!(
                "q exponent must be at least 2, got {}",
                self.q_exponent
            )));
        }
        let limit = Self::window_limit(dim, self.q_exponent);
        if !(2.0 * self.alpha < limit) {
            return Err(Error::Admissibility(format!(
                "need 2a < 1 - d(q-2)/(2q) = {limit:.6}, got 2a = {}",
                2.0 * self.alpha
            )));
        }
        if !(self.p_moment >= 2.0) {
            return Err(Error::Admissibility(format!(
                "moment order must be at least 2, got {}",
                self.p_moment
            )));
        }
        if !(self.p_moment > 1.0 / self.alpha) {
            return Err(Error::Admissibility(format!(
                "moment order must exceed 1/a = {}, got {}",
                1.0 / self.alpha,
                self.p_moment
            )));
        }
        Ok(())
    }
}

/// Matrix elements `⟨Φ(s) e_j, e_k⟩` of the frozen diffusion coefficient on
/// a time grid, plus its `L(L^∞, H)` operator norms.
#[derive(Debug, Clone)]
pub struct PhiPath {
    times: Vec<f64>,
    /// Row-major K×K per time index: `mats[i][k*K + j] = ⟨Φ(s_i)e_j, e_k⟩`.
    mats: Vec<Vec<f64>>,
    op_norms: Vec<f64>,
    k: usize,
}

impl PhiPath {
    /// Freezes the diffusion coefficient along the saved states of a run.
    pub fn from_trajectory(
        domain: &SpectralDomain,
        coeffs: &Coefficients,
        traj: &Trajectory,
    ) -> Self {
        let k = domain.truncation();
        let n_grid = domain.n_grid();
        let mut mats = Vec::with_capacity(traj.times.len());
        let mut op_norms = Vec::with_capacity(traj.times.len());
        let mut modulated = vec![0.0; n_grid];
        for (state, &t) in traj.states.iter().zip(&traj.times) {
            let u_field = domain.synthesize(&state.u_coeffs);
            let factor = diffusion_factor(domain, coeffs, t, &u_field);
            op_norms.push(op_norm_linf_to_h(domain, coeffs, t, &u_field));
            let mut mat = vec![0.0; k * k];
            for j in 0..k {
                let col = domain.basis_row(j);
                for (m, (&g, &e)) in factor.values.iter().zip(col).enumerate() {
                    modulated[m] = g * e;
                }
                let proj = domain.analyze(&crate::spectrum::GridField { values: modulated.clone() });
                for (row, &p) in proj.iter().enumerate() {
                    mat[row * k + j] = p;
                }
            }
            mats.push(mat);
        }
        PhiPath { times: traj.times.clone(), mats, op_norms, k }
    }

    /// The identity operator (`g ≡ 1`) held constant on `[0, t_final]`.
    pub fn additive(domain: &SpectralDomain, t_final: f64) -> Self {
        let k = domain.truncation();
        let mut mat = vec![0.0; k * k];
        for j in 0..k {
            mat[j * k + j] = 1.0;
        }
        let norm = domain.volume().sqrt();
        PhiPath {
            times: vec![0.0, t_final],
            mats: vec![mat.clone(), mat],
            op_norms: vec![norm, norm],
            k,
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn n_modes(&self) -> usize {
        self.k
    }

    pub fn matrix(&self, i: usize) -> &[f64] {
        &self.mats[i]
    }

    pub fn sup_op_norm(&self) -> f64 {
        self.op_norms.iter().fold(0.0f64, |m, &v| m.max(v))
    }

    /// Pointwise scaling of Φ, for homogeneity checks.
    pub fn scale(&mut self, c: f64) {
        for mat in &mut self.mats {
            for v in mat.iter_mut() {
                *v *= c;
            }
        }
        for n in &mut self.op_norms {
            *n *= c.abs();
        }
    }

    /// `c_k(s_i) = Σ_j λ_j² Φ_{kj}(s_i)²` per stored time.
    fn mode_energies(&self, cov: &CovarianceQ) -> Vec<Vec<f64>> {
        let k = self.k;
        self.mats
            .iter()
            .map(|mat| {
                (0..k)
                    .map(|row| {
                        (0..k)
                            .map(|j| {
                                let l = cov.eigenvalue(j);
                                let phi = mat[row * k + j];
                                l * l * phi * phi
                            })
                            .sum()
                    })
                    .collect()
            })
            .collect()
    }

    /// Linear interpolation of the `c_k` table at time `s` into `out`.
    fn interp_energies(&self, table: &[Vec<f64>], s: f64, out: &mut [f64]) {
        let times = &self.times;
        let n = times.len();
        if n == 1 || s <= times[0] {
            out.copy_from_slice(&table[0]);
            return;
        }
        if s >= times[n - 1] {
            out.copy_from_slice(&table[n - 1]);
            return;
        }
        let hi = times.partition_point(|&t| t <= s).min(n - 1);
        let lo = hi - 1;
        let w = (s - times[lo]) / (times[hi] - times[lo]);
        for (m, o) in out.iter_mut().enumerate() {
            *o = (1.0 - w) * table[lo][m] + w * table[hi][m];
        }
    }
}

pub const DEFAULT_QUAD_CELLS: usize = 2400;
/// Mesh grading exponent: cell edges at `t(l/n)^grade`, clustered at τ = 0.
pub const MESH_GRADE: f64 = 3.0;

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::Admissibility(format!(
            "factorization exponent must lie in (0, 1/2), got {alpha}"
        )));
    }
    Ok(())
}

/// Product integration of `∫₀ᵗ τ^{-2a} Σ_k kernel_sq(k, τ) c_k(t-τ) dτ`.
fn singular_quadrature(
    phi: &PhiPath,
    energies: &[Vec<f64>],
    alpha: f64,
    t: f64,
    n_cells: usize,
    kernel_sq: &mut dyn FnMut(usize, f64) -> f64,
) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let k = phi.n_modes();
    let power = 1.0 - 2.0 * alpha;
    let mut c = vec![0.0; k];
    let mut total = 0.0;
    let n = n_cells as f64;
    let mut edge_prev = 0.0;
    let mut pow_prev = 0.0; // edge_prev^power at edge 0
    for l in 0..n_cells {
        let frac = (l + 1) as f64 / n;
        let edge = t * frac.powf(MESH_GRADE);
        let pow_next = edge.powf(power);
        let weight = (pow_next - pow_prev) / power;
        let tau = 0.5 * (edge_prev + edge);
        phi.interp_energies(energies, t - tau, &mut c);
        let mut f = 0.0;
        for (m, &cm) in c.iter().enumerate() {
            let ker = kernel_sq(m, tau);
            if ker != 0.0 {
                f += ker * cm;
            }
        }
        total += weight * f;
        edge_prev = edge;
        pow_prev = pow_next;
    }
    total
}

fn common_checks(
    domain: &SpectralDomain,
    cov: &CovarianceQ,
    phi: &PhiPath,
    alpha: f64,
    t: f64,
) -> Result<()> {
    check_alpha(alpha)?;
    if phi.n_modes() != domain.truncation() || cov.eigenvalues().len() != domain.truncation() {
        return Err(Error::Config("mode counts of domain, covariance and Φ path disagree".into()));
    }
    if !(t >= 0.0) || t > phi.times.last().copied().unwrap_or(0.0) + 1e-12 {
        return Err(Error::Config(format!("time {t} outside the stored Φ range")));
    }
    Ok(())
}

/// Position-component quadratic variation of the damped-wave convolution:
/// kernel `f_k(τ; 0, 1/μ)`.
pub fn position_variation_wave(
    domain: &SpectralDomain,
    cov: &CovarianceQ,
    mu: f64,
    alpha: f64,
    t: f64,
    phi: &PhiPath,
    n_cells: usize,
) -> Result<f64> {
    common_checks(domain, cov, phi, alpha, t)?;
    if !(mu > 0.0) {
        return Err(Error::Config(format!("mass must be positive, got {mu}")));
    }
    let energies = phi.mode_energies(cov);
    let evs = domain.eigenvalues().to_vec();
    let mut kernel = |k: usize, tau: f64| {
        let b = mode_propagator(mu, evs[k], tau).val_v / mu;
        b * b
    };
    Ok(singular_quadrature(phi, &energies, alpha, t, n_cells, &mut kernel))
}

/// Heat-convolution quadratic variation with the first `drop_first` modes
/// removed: kernel `e^{-α_k τ}` on modes `k ≥ drop_first`. With
/// `drop_first = 0` this is the full second moment of the factorized heat
/// convolution at time `t`.
pub fn position_variation_heat(
    domain: &SpectralDomain,
    cov: &CovarianceQ,
    alpha: f64,
    t: f64,
    phi: &PhiPath,
    n_cells: usize,
    drop_first: usize,
) -> Result<f64> {
    common_checks(domain, cov, phi, alpha, t)?;
    let energies = phi.mode_energies(cov);
    let evs = domain.eigenvalues().to_vec();
    let mut kernel = |k: usize, tau: f64| {
        if k < drop_first {
            return 0.0;
        }
        let e = heat_mode(evs[k], tau);
        e * e
    };
    Ok(singular_quadrature(phi, &energies, alpha, t, n_cells, &mut kernel))
}

/// Velocity-component quadratic variations split at the overdamped count
/// `N_μ`: the low block uses the plain `H` weight, the high block carries
/// the `H^{-1}` weight `1/α_k`. Kernel `f_k'(τ; 0, 1/μ)` throughout.
pub fn velocity_variations_split(
    domain: &SpectralDomain,
    cov: &CovarianceQ,
    mu: f64,
    alpha: f64,
    t: f64,
    phi: &PhiPath,
    n_cells: usize,
) -> Result<(f64, f64)> {
    common_checks(domain, cov, phi, alpha, t)?;
    if !(mu > 0.0) {
        return Err(Error::Config(format!("mass must be positive, got {mu}")));
    }
    let split = n_mu(domain, mu);
    let energies = phi.mode_energies(cov);
    let evs = domain.eigenvalues().to_vec();
    let mut low_kernel = |k: usize, tau: f64| {
        if k >= split {
            return 0.0;
        }
        let d = mode_propagator(mu, evs[k], tau).deriv_v / mu;
        d * d
    };
    let low = singular_quadrature(phi, &energies, alpha, t, n_cells, &mut low_kernel);
    let mut high_kernel = |k: usize, tau: f64| {
        if k < split {
            return 0.0;
        }
        let d = mode_propagator(mu, evs[k], tau).deriv_v / mu;
        d * d / evs[k]
    };
    let high = singular_quadrature(phi, &energies, alpha, t, n_cells, &mut high_kernel);
    Ok((low, high))
}

/// Least-squares slope of `ln y` against `ln x` over the pairs with `y > 0`.
/// Returns 0 when fewer than two usable pairs remain.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(&x, &y)| x > 0.0 && y > 0.0)
        .map(|(&x, &y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in pts {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MuUniformityRow {
    pub mu: f64,
    pub variation: f64,
    /// Variation divided by `sup_s ‖Φ(s)‖²`.
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MuUniformityReport {
    pub rows: Vec<MuUniformityRow>,
    /// Slope of `ln ratio` vs `ln μ`; near zero means μ-uniform.
    pub slope: f64,
    pub slope_tolerance: f64,
    pub passed: bool,
}

/// Confirms that the position quadratic variation, normalized by
/// `sup ‖Φ‖²`, stays μ-uniform: the log-log slope across the grid must
/// vanish within `slope_tolerance`.
pub fn position_uniformity_check(
    domain: &SpectralDomain,
    cov: &CovarianceQ,
    config: &AnalysisConfig,
    t: f64,
    phi: &PhiPath,
    mu_grid: &[f64],
    n_cells: usize,
    slope_tolerance: f64,
) -> Result<MuUniformityReport> {
    config.validate(domain.dim())?;
    let sup = phi.sup_op_norm();
    let denom = sup * sup;
    let mut rows = Vec::with_capacity(mu_grid.len());
    for &mu in mu_grid {
        let variation = position_variation_wave(domain, cov, mu, config.alpha, t, phi, n_cells)?;
        let ratio = if denom > 0.0 { variation / denom } else { 0.0 };
        rows.push(MuUniformityRow { mu, variation, ratio });
    }
    let slope = log_log_slope(
        &rows.iter().map(|r| r.mu).collect::<Vec<_>>(),
        &rows.iter().map(|r| r.ratio).collect::<Vec<_>>(),
    );
    let passed = rows.iter().all(|r| r.ratio.is_finite()) && slope.abs() <= slope_tolerance;
    Ok(MuUniformityReport { rows, slope, slope_tolerance, passed })
}

#[derive(Debug, Clone, Serialize)]
pub struct VelocityScalingRow {
    pub mu: f64,
    /// `μ² Λ₁`: must stay bounded and drain to zero as μ does.
    pub low_scaled: f64,
    /// `μ^{1-ε} Λ₂`: must stay bounded.
    pub high_scaled: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VelocityScalingReport {
    pub rows: Vec<VelocityScalingRow>,
    pub low_slope: f64,
    pub high_slope: f64,
    pub low_bounded: bool,
    pub low_vanishing: bool,
    pub high_bounded: bool,
    pub passed: bool,
}

/// Scaling checks for the velocity component of the wave convolution:
/// `μ²Λ₁` bounded and vanishing along the μ-grid, `μ^{1-ε}Λ₂` bounded.
/// Boundedness is asserted as "no growth while μ decreases": the log-log
/// slope must not be meaningfully negative.
pub fn velocity_scaling_check(
    domain: &SpectralDomain,
    cov: &CovarianceQ,
    config: &AnalysisConfig,
    t: f64,
    phi: &PhiPath,
    mu_grid: &[f64],
    epsilon: f64,
    n_cells: usize,
) -> Result<VelocityScalingReport> {
    config.validate(domain.dim())?;
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::Config(format!("slack exponent must lie in [0,1), got {epsilon}")));
    }
    let mut rows = Vec::with_capacity(mu_grid.len());
    for &mu in mu_grid {
        let (l1, l2) = velocity_variations_split(domain, cov, mu, config.alpha, t, phi, n_cells)?;
        rows.push(VelocityScalingRow {
            mu,
            low_scaled: mu * mu * l1,
            high_scaled: mu.powf(1.0 - epsilon) * l2,
        });
    }
    let mus: Vec<f64> = rows.iter().map(|r| r.mu).collect();
    let low: Vec<f64> = rows.iter().map(|r| r.low_scaled).collect();
    let high: Vec<f64> = rows.iter().map(|r| r.high_scaled).collect();
    let low_slope = log_log_slope(&mus, &low);
    let high_slope = log_log_slope(&mus, &high);
    const GROWTH_SLACK: f64 = 0.05;
    let all_zero = |v: &[f64]| v.iter().all(|&x| x == 0.0);
    let low_bounded = all_zero(&low) || low_slope >= -GROWTH_SLACK;
    let high_bounded = all_zero(&high) || high_slope >= -GROWTH_SLACK;
    let low_vanishing = all_zero(&low)
        || (low.last().unwrap() < low.first().unwrap()
            && low.windows(2).all(|w| w[1] <= w[0] * 1.10));
    let passed = low_bounded && low_vanishing && high_bounded;
    Ok(VelocityScalingReport {
        rows,
        low_slope,
        high_slope,
        low_bounded,
        low_vanishing,
        high_bounded,
        passed,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SupMomentReport {
    /// Monte Carlo estimate of `E sup_t |Γ(t)|_H^p`.
    pub estimate: f64,
    pub std_error: f64,
    /// Mean of `sup_s ‖Φ(s)‖^p` over the same paths.
    pub sup_phi_moment: f64,
    /// Empirical constant `estimate / sup_phi_moment`.
    pub ratio: f64,
    pub n_paths: usize,
    pub passed: bool,
}

/// Pairwise (tree) summation: deterministic and accurate regardless of how
/// the inputs were produced.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = pairwise_sum(xs) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = xs.iter().map(|&x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Monte Carlo estimate of the running-sup moment of a drift-free heat run
/// (the stochastic convolution when `u₀ = 0`), with the matching Φ moment.
pub fn heat_sup_moment(
    domain: &SpectralDomain,
    coeffs: &Coefficients,
    cov: &CovarianceQ,
    sim: &SimConfig,
    n_paths: usize,
    p: f64,
) -> Result<SupMomentReport> {
    if sim.equation != Equation::Heat {
        return Err(Error::Config("sup-moment check runs on the heat equation".into()));
    }
    if n_paths == 0 {
        return Err(Error::Config("need at least one path".into()));
    }
    let mut sups = Vec::with_capacity(n_paths);
    let mut phi_sups = Vec::with_capacity(n_paths);
    for path in 0..n_paths {
        let traj = run_path(domain, coeffs, cov, sim, path as u64)?;
        let mut sup = 0.0f64;
        let mut phi_sup = 0.0f64;
        for (state, &t) in traj.states.iter().zip(&traj.times) {
            let norm_sq: f64 = state.u_coeffs.iter().map(|c| c * c).sum();
            sup = sup.max(norm_sq.sqrt());
            let u_field = domain.synthesize(&state.u_coeffs);
            phi_sup = phi_sup.max(op_norm_linf_to_h(domain, coeffs, t, &u_field));
        }
        sups.push(sup.powf(p));
        phi_sups.push(phi_sup.powf(p));
    }
    let (estimate, std_error) = mean_and_se(&sups);
    let (sup_phi_moment, _) = mean_and_se(&phi_sups);
    let ratio = if sup_phi_moment > 0.0 { estimate / sup_phi_moment } else { 0.0 };
    let passed = estimate.is_finite() && std_error.is_finite();
    Ok(SupMomentReport { estimate, std_error, sup_phi_moment, ratio, n_paths, passed })
}

#[derive(Debug, Clone, Serialize)]
pub struct TailRow {
    /// Number of leading modes projected away.
    pub dropped: usize,
    pub second_moment: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TailReport {
    pub rows: Vec<TailRow>,
    pub threshold: f64,
    pub passed: bool,
}

/// Second moment of the spectral tail of the factorized heat convolution:
/// must decrease monotonically in the number of dropped modes and fall
/// below `threshold` at the last entry (it vanishes exactly once the whole
/// truncated basis is dropped).
pub fn spectral_tail_check(
    domain: &SpectralDomain,
    cov: &CovarianceQ,
    alpha: f64,
    t: f64,
    phi: &PhiPath,
    drops: &[usize],
    n_cells: usize,
    threshold: f64,
) -> Result<TailReport> {
    let mut rows = Vec::with_capacity(drops.len());
    for &d in drops {
        let m = position_variation_heat(domain, cov, alpha, t, phi, n_cells, d)?;
        rows.push(TailRow { dropped: d, second_moment: m });
    }
    let monotone = rows.windows(2).all(|w| {
        w[1].second_moment < w[0].second_moment
            || (w[1].second_moment == 0.0 && w[0].second_moment == 0.0)
    });
    let passed =
        monotone && rows.last().map(|r| r.second_moment <= threshold).unwrap_or(false);
    Ok(TailReport { rows, threshold, passed })
}

#[derive(Debug, Clone, Serialize)]
pub struct FactorizationReport {
    /// H-norm of the direct convolution at the checkpoint.
    pub direct_norm: f64,
    /// H-norm of (reconstruction - direct).
    pub gap_norm: f64,
    pub rel_error: f64,
}

/// Consistency of the factorization representation: drives a wave
/// convolution with `n_increments` point-mass noise kicks, evaluates the
/// auxiliary singular convolution exactly at quadrature nodes, reassembles
/// the position component through
/// `(sin πa / π) ∫₀ᵗ (t-s)^{a-1} S_μ(t-s) Γ_a(s) ds`,
/// and compares with the directly summed convolution at `t = t_final`.
/// For point-mass driving noise the identity is exact in the continuum
/// (beta-function identity plus the semigroup property), so the reported
/// error is purely quadrature error.
pub fn factorization_check(
    domain: &SpectralDomain,
    cov: &CovarianceQ,
    mu: f64,
    alpha: f64,
    t_final: f64,
    n_increments: usize,
    seed: u64,
    path_id: u64,
    cells: usize,
) -> Result<FactorizationReport> {
    check_alpha(alpha)?;
    if !(mu > 0.0 && t_final > 0.0) || n_increments == 0 || cells == 0 {
        return Err(Error::Config("factorization check needs positive mass, horizon, increments and cells".into()));
    }
    let k = domain.truncation();
    let dt = t_final / n_increments as f64;
    let sdt = dt.sqrt();
    let xi: Vec<Vec<f64>> = (0..n_increments as u64)
        .map(|s| standard_gaussians(seed, path_id, s, k))
        .collect();
    // Mode-m kick at t_j: λ_m √dt ξ.
    let kick = |j: usize, m: usize| cov.eigenvalue(m) * sdt * xi[j][m];
    let evs = domain.eigenvalues();

    // Direct convolution at t_final: Σ_j f_m(t-t_j; 0, kick/μ).
    let mut direct = vec![0.0; k];
    for j in 0..n_increments {
        let gap = t_final - j as f64 * dt;
        for m in 0..k {
            let b = mode_propagator(mu, evs[m], gap).val_v / mu;
            direct[m] += b * kick(j, m);
        }
    }

    // Auxiliary pair Γ_a(s) per mode, exact at any s.
    let gamma_pair = |m: usize, s: f64| -> (f64, f64) {
        let mut pos = 0.0;
        let mut vel = 0.0;
        let mut j = 0;
        while (j as f64) * dt < s - 1e-15 && j < n_increments {
            let gap = s - j as f64 * dt;
            let p = mode_propagator(mu, evs[m], gap);
            let w = gap.powf(-alpha) * kick(j, m) / mu;
            pos += p.val_v * w;
            vel += p.deriv_v * w;
            j += 1;
        }
        (pos, vel)
    };
    // Smooth factor of the reconstruction integrand at s (all modes).
    let smooth_all = |s: f64, out: &mut [f64]| {
        for m in 0..k {
            let (gp, gv) = gamma_pair(m, s);
            let prop = mode_propagator(mu, evs[m], t_final - s);
            out[m] = prop.val_u * gp + prop.val_v * gv;
        }
    };

    // Reconstruction: composite product integration per noise interval.
    // Each interval [t_j, t_{j+1}] is split in half: the left half treats the
    // newest kick's (s - t_j)^{-a} factor exactly, the right half is either
    // smooth or (in the final interval) treats (t - s)^{a-1} exactly.
    let mut recon = vec![0.0; k];
    let mut buf = vec![0.0; k];
    let grade = MESH_GRADE;
    for j in 0..n_increments {
        let lo = j as f64 * dt;
        let hi = ((j + 1) as f64 * dt).min(t_final);
        if hi <= lo {
            break;
        }
        let mid = 0.5 * (lo + hi);
        // Left half: weight (s-lo)^{-a}; smooth factor excludes the newest
        // kick's singular power but keeps its propagator part.
        {
            let half = mid - lo;
            let power = 1.0 - alpha;
            let mut prev_edge = 0.0;
            let mut prev_pow = 0.0;
            for l in 0..cells {
                let frac = (l + 1) as f64 / cells as f64;
                let edge = half * frac.powf(grade);
                let pw = edge.powf(power);
                let weight = (pw - prev_pow) / power;
                let s = lo + 0.5 * (prev_edge + edge);
                // Older kicks keep their own (s - t_i)^{-a} factor; the
                // newest kick contributes its smooth part only.
                for m in 0..k {
                    let mut pos = 0.0;
                    let mut vel = 0.0;
                    for i in 0..j {
                        let gap = s - i as f64 * dt;
                        let p = mode_propagator(mu, evs[m], gap);
                        let w = gap.powf(-alpha) * kick(i, m) / mu;
                        pos += p.val_v * w;
                        vel += p.deriv_v * w;
                    }
                    let prop = mode_propagator(mu, evs[m], t_final - s);
                    let older = prop.val_u * pos + prop.val_v * vel;
                    let pj = mode_propagator(mu, evs[m], s - lo);
                    let wj = kick(j, m) / mu;
                    let newest = prop.val_u * (pj.val_v * wj) + prop.val_v * (pj.deriv_v * wj);
                    // older enters with plain ds weighting of this cell,
                    // newest with the exact singular weight.
                    recon[m] += (edge - prev_edge) * (t_final - s).powf(alpha - 1.0) * older
                        + weight * (t_final - s).powf(alpha - 1.0) * newest;
                }
                prev_edge = edge;
                prev_pow = pw;
            }
        }
        // Right half.
        let final_interval = (hi - t_final).abs() < 1e-15;
        if !final_interval {
            // Entirely smooth: uniform midpoint cells.
            let h = (hi - mid) / cells as f64;
            for l in 0..cells {
                let s = mid + (l as f64 + 0.5) * h;
                smooth_all(s, &mut buf);
                let w = h * (t_final - s).powf(alpha - 1.0);
                for m in 0..k {
                    recon[m] += w * buf[m];
                }
            }
        } else {
            // Weight (t-s)^{a-1} exact, graded toward s = t.
            let half = hi - mid;
            let mut prev_edge = 0.0; // distance from t
            let mut prev_pow = 0.0;
            for l in 0..cells {
                let frac = (l + 1) as f64 / cells as f64;
                let edge = half * frac.powf(grade);
                let pw = edge.powf(alpha);
                let weight = (pw - prev_pow) / alpha;
                let s = t_final - 0.5 * (prev_edge + edge);
                smooth_all(s, &mut buf);
                for m in 0..k {
                    recon[m] += weight * buf[m];
                }
                prev_edge = edge;
                prev_pow = pw;
            }
        }
    }
    let scale = (std::f64::consts::PI * alpha).sin() / std::f64::consts::PI;
    for r in recon.iter_mut() {
        *r *= scale;
    }

    let direct_norm = direct.iter().map(|x| x * x).sum::<f64>().sqrt();
    let gap_norm = direct
        .iter()
        .zip(&recon)
        .map(|(d, r)| (d - r) * (d - r))
        .sum::<f64>()
        .sqrt();
    let rel_error = if direct_norm > 0.0 { gap_norm / direct_norm } else { gap_norm };
    Ok(FactorizationReport { direct_norm, gap_norm, rel_error })
}
