//! Oracles shared by the integration suites.
//!
//! Everything in this module is deliberately independent of the library
//! internals: the oscillator oracle integrates the mode ODE numerically
//! instead of using the closed-form propagator, and the quadrature helpers
//! are generic. Agreement between the two routes is then meaningful.

#![allow(dead_code)]

/// Right-hand side of `μ f'' + f' + α f = 0` as a first-order system.
fn mode_deriv(mu: f64, alpha: f64, y: [f64; 2]) -> [f64; 2] {
    [y[1], -(y[1] + alpha * y[0]) / mu]
}

fn rk4_step(mu: f64, alpha: f64, y: [f64; 2], h: f64) -> [f64; 2] {
    let k1 = mode_deriv(mu, alpha, y);
    let k2 = mode_deriv(mu, alpha, [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
    let k3 = mode_deriv(mu, alpha, [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
    let k4 = mode_deriv(mu, alpha, [y[0] + h * k3[0], y[1] + h * k3[1]]);
    [
        y[0] + h / 6.0 * (k1[0] + 2.0 * (k2[0] + k3[0]) + k4[0]),
        y[1] + h / 6.0 * (k1[1] + 2.0 * (k2[1] + k3[1]) + k4[1]),
    ]
}

/// Integrates `μ f'' + f' + α f = 0` from `(f, f')(0) = y0` and returns
/// `(f, f')` at each target time (targets must be sorted, nonnegative).
///
/// Classic adaptive RK4 with step doubling: one full step is compared
/// against two half steps; the step is accepted when the component-wise
/// scaled discrepancy is below the tolerance and the accepted value takes
/// the Richardson-extrapolated combination. The step size is additionally
/// capped by the explicit-stability envelope of the stiff root, so the
/// integrator stays stable long after the fast transient has decayed.
pub fn rk4_mode_eval(mu: f64, alpha: f64, y0: [f64; 2], targets: &[f64]) -> Vec<[f64; 2]> {
    let tol = 1e-12;
    // Fast-root magnitude (overdamped) plus angular frequency (oscillatory);
    // whichever is active dominates the sum.
    let lam = (1.0 + (1.0 - 4.0 * mu * alpha).abs().sqrt()) / (2.0 * mu) + (alpha / mu).sqrt();
    let h_cap = 2.0 / lam;

    let mut t = 0.0f64;
    let mut y = y0;
    let mut h = h_cap;
    let mut out = Vec::with_capacity(targets.len());
    for &target in targets {
        assert!(target >= t, "targets must be sorted and nonnegative");
        while t < target {
            let h_try = h.min(h_cap).min(target - t);
            let full = rk4_step(mu, alpha, y, h_try);
            let half = rk4_step(mu, alpha, y, 0.5 * h_try);
            let two = rk4_step(mu, alpha, half, 0.5 * h_try);
            // Component scales: current/next magnitude plus the swing of the
            // step, so zero crossings do not stall the controller.
            let d0 = mode_deriv(mu, alpha, y);
            let s0 = y[0].abs().max(two[0].abs()) + h_try * d0[0].abs() + 1e-290;
            let s1 = y[1].abs().max(two[1].abs()) + h_try * d0[1].abs() + 1e-290;
            let err = ((full[0] - two[0]).abs() / s0).max((full[1] - two[1]).abs() / s1);
            // Steps at rounding scale (the final sliver before a target)
            // are accepted unconditionally.
            if err <= tol || h_try <= 1e-14 * target.max(1.0) {
                y = [
                    two[0] + (two[0] - full[0]) / 15.0,
                    two[1] + (two[1] - full[1]) / 15.0,
                ];
                t += h_try;
                h = h_try * (0.9 * (tol / err.max(1e-300)).powf(0.2)).clamp(0.5, 4.0);
            } else {
                h = h_try * (0.9 * (tol / err).powf(0.25)).clamp(0.05, 1.0);
            }
        }
        out.push(y);
    }
    out
}

/// Fundamental solution matrix of one damped mode at time `t`, column by
/// column from the numerical integrator: `[[f_a, f_b], [f_a', f_b']]` with
/// `f_a` from data `(1, 0)` and `f_b` from `(0, 1)`.
pub fn rk4_fundamental(mu: f64, alpha: f64, t: f64) -> [[f64; 2]; 2] {
    let a = rk4_mode_eval(mu, alpha, [1.0, 0.0], &[t])[0];
    let b = rk4_mode_eval(mu, alpha, [0.0, 1.0], &[t])[0];
    [[a[0], b[0]], [a[1], b[1]]]
}

fn simpson_rule(fa: f64, fm: f64, fb: f64, width: f64) -> f64 {
    width / 6.0 * (fa + 4.0 * fm + fb)
}

fn simpson_recurse(
    f: &mut dyn FnMut(f64) -> f64,
    a: f64,
    m: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> f64 {
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson_rule(fa, flm, fm, m - a);
    let right = simpson_rule(fm, frm, fb, b - m);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_recurse(f, a, lm, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_recurse(f, m, rm, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Adaptive Simpson quadrature with Richardson acceptance.
pub fn adaptive_simpson(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    assert!(b > a);
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = simpson_rule(fa, fm, fb, b - a);
    simpson_recurse(f, a, m, b, fa, fm, fb, whole, tol, 48)
}

/// Composite Simpson rule for precomputed values on a uniform grid
/// (odd number of nodes).
pub fn composite_simpson(values: &[f64], h: f64) -> f64 {
    assert!(values.len() >= 3 && values.len() % 2 == 1, "need an odd node count");
    let mut sum = values[0] + values[values.len() - 1];
    for (i, &v) in values.iter().enumerate().skip(1).take(values.len() - 2) {
        sum += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    sum * h / 3.0
}

/// `n` logarithmically spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && lo > 0.0 && hi > lo);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// `n` linearly spaced points from `lo` to `hi` inclusive.
pub fn lin_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Deterministic 64-bit mixer for seeding small reproducible samples.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform draw in `(0, 1)` from the mixer.
pub fn uniform01(state: &mut u64) -> f64 {
    ((splitmix64(state) >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}
