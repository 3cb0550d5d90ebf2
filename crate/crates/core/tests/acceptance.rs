//! End-to-end acceptance suite.
//!
//! Every quantitative contract of the library is exercised here at its
//! stated tolerance: closed-form mode responses against an independent
//! integrator, decay envelopes, operator-norm ceilings, exactness of the
//! linear flow in the steppers, stationary covariances against closed
//! forms, the coupled small-mass sweep, the convolution-gap isometry, the
//! Picard fixed point, and mass-uniformity of the singular quadratic
//! variation. The criteria run sequentially in one test so each printed
//! line carries an honest wall-clock time; run with `--nocapture` to see
//! the lines as they appear.

mod common;

use std::sync::Arc;
use std::time::Instant;

use common::*;
use skwave_core::analysis::{mean_and_se, position_uniformity_check, DEFAULT_QUAD_CELLS};
use skwave_core::experiments::{gamma_gap_check, run_sk_sweep};
use skwave_core::fields::pair_norm;
use skwave_core::noise::build_covariance;
use skwave_core::semigroup::{
    classify, heat_mode, mode_response, n_mu, op_norm_family, op_norm_pi1_smu_imu,
    verify_decay_bounds, verify_mode_convergence, wave_propagator_apply, ModeConvergenceCheck,
    ModeParams, OperatorFamily, Regime, BOUND_TOL,
};
use skwave_core::solver::{picard_solve, run_path};
use skwave_core::spectrum::build_domain;
use skwave_core::{
    AnalysisConfig, CoefficientPreset, Coefficients, DecayLaw, Equation, ExperimentConfig,
    PhasePoint, PhiPath, SimConfig,
};

const PI: f64 = std::f64::consts::PI;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)*) => {
        if !$cond {
            return Err(format!($($msg)*));
        }
    };
}

fn es<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn rel_gap(ours: f64, oracle: f64) -> f64 {
    (ours - oracle).abs() / oracle.abs().max(1e-30)
}

// ---------------------------------------------------------------------------
// 01: closed-form mode responses vs adaptive step-doubling integration.
// ---------------------------------------------------------------------------

fn c01_mode_response_matches_integrator() -> Result<String, String> {
    let start = Instant::now();
    let mus = log_grid(1e-4, 1.0, 10);
    let alphas_shared = log_grid(0.25, 256.0, 8);
    let ts = log_grid(1e-3, 10.0, 20);

    let mut worst = 0.0f64;
    let mut worst_at = String::new();
    let mut seen = [false; 3]; // overdamped, critical, oscillatory
    let mut near_critical = 0usize;
    let mut responses = 0usize;

    for &mu in &mus {
        let mut alphas = alphas_shared.clone();
        // Two near-critical stiffnesses per mass: |1 - 4μα| = 1e-7.
        let ac = 0.25 / mu;
        alphas.push(ac * (1.0 - 1e-7));
        alphas.push(ac * (1.0 + 1e-7));
        for &alpha in &alphas {
            match classify(mu, alpha) {
                Regime::Overdamped => seen[0] = true,
                Regime::Critical => seen[1] = true,
                Regime::Oscillatory => seen[2] = true,
            }
            if (1.0 - 4.0 * mu * alpha).abs() <= 1e-6 {
                near_critical += 1;
            }
            for &(u, v) in &[(1.0, 0.0), (0.0, 1.0)] {
                let oracle = rk4_mode_eval(mu, alpha, [u, v], &ts);
                for (i, &t) in ts.iter().enumerate() {
                    let r = mode_response(ModeParams { mu, alpha }, u, v, t);
                    let e = rel_gap(r.value, oracle[i][0]).max(rel_gap(r.derivative, oracle[i][1]));
                    responses += 1;
                    if e > worst {
                        worst = e;
                        worst_at = format!("mu={mu:.3e} alpha={alpha:.3e} t={t:.3e} data=({u},{v})");
                    }
                }
            }
        }
    }

    ensure!(seen.iter().all(|&s| s), "not all three damping regimes were visited");
    ensure!(near_critical >= 20, "expected ≥ 20 near-critical pairs, saw {near_critical}");
    ensure!(
        worst <= 1e-8,
        "worst relative gap {worst:.3e} > 1e-8 at {worst_at}"
    );
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 10.0, "runtime {secs:.1}s exceeded the 10s budget");
    Ok(format!("worst relative gap {worst:.2e} over {responses} responses"))
}

// ---------------------------------------------------------------------------
// 02: per-mode decay inequalities with 1e-12 slack.
// ---------------------------------------------------------------------------

fn c02_decay_bounds_hold() -> Result<String, String> {
    let start = Instant::now();
    let mus = log_grid(1e-4, 1.0, 20);
    let ts = lin_grid(0.0, 10.0, 200);

    let mut worst = f64::NEG_INFINITY;
    let mut reports = 0usize;
    let mut swapped_violations = 0usize;
    for &mu in &mus {
        for k in 1..=128u32 {
            let alpha = (k as f64).powi(2);
            for &v in &[1.0, -2.5] {
                let rep = verify_decay_bounds(ModeParams { mu, alpha }, v, &ts).map_err(es)?;
                reports += 1;
                for c in &rep.checks {
                    if c.gating {
                        worst = worst.max(c.max_violation);
                        ensure!(
                            c.passed,
                            "bound `{}` violated by {:.3e} at mu={mu:.3e} k={k} v={v}",
                            c.name,
                            c.max_violation
                        );
                    } else if c.max_violation > BOUND_TOL {
                        swapped_violations += 1;
                    }
                }
                ensure!(rep.passed, "report not passed at mu={mu:.3e} k={k}");
            }
        }
    }
    // The weight-swapped energy variant is recorded non-gating precisely
    // because it is false; confirm the suite actually observes that.
    ensure!(
        swapped_violations > reports / 2,
        "weight-swapped energy variant was expected to fail broadly, {swapped_violations}/{reports}"
    );
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 30.0, "runtime {secs:.1}s exceeded the 30s budget");
    Ok(format!(
        "worst gating margin {worst:.2e} over {reports} mode reports; swapped variant rejected in {swapped_violations}"
    ))
}

// ---------------------------------------------------------------------------
// 03: truncated operator norms against their analytic ceilings.
// ---------------------------------------------------------------------------

fn c03_operator_norms_within_envelopes() -> Result<String, String> {
    let domain = build_domain(&[PI], 128, 256).map_err(es)?;
    let mus = log_grid(1e-4, 1.0, 20);
    let ts = lin_grid(0.0, 10.0, 200);
    let families = [
        OperatorFamily::Position,
        OperatorFamily::VelocityLow,
        OperatorFamily::VelocityHigh,
        OperatorFamily::PairH,
    ];

    let mut max_ratio = 0.0f64;
    for &mu in &mus {
        for &t in &ts {
            let n = op_norm_pi1_smu_imu(&domain, mu, t);
            ensure!(
                n.value <= n.bound + 1e-12,
                "velocity-input norm {:.6e} exceeds bound {:.1} at mu={mu:.3e} t={t:.3}",
                n.value,
                n.bound
            );
            max_ratio = max_ratio.max(n.value / n.bound);
            for &fam in &families {
                let n = op_norm_family(&domain, mu, t, fam);
                ensure!(
                    n.value <= n.bound + 1e-12,
                    "{fam:?} norm {:.6e} exceeds bound {:.6e} at mu={mu:.3e} t={t:.3}",
                    n.value,
                    n.bound
                );
                max_ratio = max_ratio.max(n.value / n.bound);
            }
        }
    }
    Ok(format!("largest norm/bound ratio {max_ratio:.6} over 20x200 sweep, 128 modes"))
}

// ---------------------------------------------------------------------------
// 04: single-mode responses approach the heat mode as the mass vanishes.
// ---------------------------------------------------------------------------

fn c04_mode_convergence_in_vanishing_mass() -> Result<String, String> {
    let mu_seq = vec![1e-1, 1e-2, 1e-3, 1e-4];
    let mut finals = Vec::new();
    for k in [1u32, 2, 5] {
        let alpha = (k as f64).powi(2);
        let check = ModeConvergenceCheck::new(alpha, mu_seq.clone()).map_err(es)?;
        let rep = verify_mode_convergence(&check).map_err(es)?;
        for (name, seq) in [
            ("position", &rep.position_sup),
            ("velocity", &rep.velocity_sup),
            ("derivative", &rep.derivative_abs),
        ] {
            ensure!(
                seq.windows(2).all(|w| w[1] < w[0]),
                "{name} discrepancies not strictly decreasing for k={k}: {seq:?}"
            );
        }
        ensure!(rep.passed, "convergence report failed for k={k}");
        finals.push(format!(
            "k={k}: pos {:.2e}, vel {:.2e}",
            rep.position_sup.last().unwrap(),
            rep.velocity_sup.last().unwrap()
        ));
    }
    Ok(finals.join("; "))
}

// ---------------------------------------------------------------------------
// 05: overdamped mode count matches the closed form.
// ---------------------------------------------------------------------------

fn c05_overdamped_count_closed_form() -> Result<String, String> {
    let domain = build_domain(&[PI], 2048, 2304).map_err(es)?;
    let mut state = 0xC0FFEE_u64;
    for i in 0..50 {
        let mu = 1e-6 + (1.0 - 2e-6) * uniform01(&mut state);
        let expected = (0.5 / mu.sqrt()).floor() as usize;
        let got = n_mu(&domain, mu);
        ensure!(
            got == expected,
            "draw {i}: n_mu({mu:.12e}) = {got}, expected floor(1/(2 sqrt mu)) = {expected}"
        );
    }
    Ok("50 random masses in (1e-6, 1), all counts exact".into())
}

// ---------------------------------------------------------------------------
// 06: zero-coefficient paths reproduce the exact linear flows.
// ---------------------------------------------------------------------------

fn c06_linear_flow_exactness() -> Result<String, String> {
    let domain = build_domain(&[PI], 16, 32).map_err(es)?;
    let cov = build_covariance(&domain, DecayLaw::Flat { level: 1.0 }, None).map_err(es)?;
    let coeffs = CoefficientPreset::Zero.build();
    let k = 16;
    let u0: Vec<f64> = (0..k).map(|i| 0.3 * ((i + 1) as f64).sin()).collect();
    let v0: Vec<f64> = (0..k).map(|i| 0.2 * (i as f64).cos()).collect();
    let t_final = 1.0;

    let mut worst = 0.0f64;
    for &n_steps in &[10usize, 1000] {
        // Wave with a mass that mixes regimes across the retained modes.
        let mu = 0.37;
        let sim = SimConfig {
            equation: Equation::Wave,
            mu,
            t_final,
            n_steps,
            seed: 11,
            u0: u0.clone(),
            v0: v0.clone(),
            save_stride: n_steps,
        };
        let tr = run_path(&domain, &coeffs, &cov, &sim, 0).map_err(es)?;
        let end = tr.endpoint();
        let exact = wave_propagator_apply(&domain, mu, t_final, &PhasePoint { u_coeffs: u0.clone(), v_coeffs: v0.clone() });
        for m in 0..k {
            worst = worst.max((end.u_coeffs[m] - exact.u_coeffs[m]).abs() / (1.0 + exact.u_coeffs[m].abs()));
            worst = worst.max((end.v_coeffs[m] - exact.v_coeffs[m]).abs() / (1.0 + exact.v_coeffs[m].abs()));
        }

        let sim_h = SimConfig { equation: Equation::Heat, mu: 1.0, v0: vec![], ..sim.clone() };
        let tr = run_path(&domain, &coeffs, &cov, &sim_h, 0).map_err(es)?;
        let end = tr.endpoint();
        for m in 0..k {
            let exact = u0[m] * heat_mode(domain.eigenvalue(m), t_final);
            worst = worst.max((end.u_coeffs[m] - exact).abs() / (1.0 + exact.abs()));
        }
    }
    ensure!(worst <= 1e-12, "worst flow discrepancy {worst:.3e} > 1e-12");
    Ok(format!("worst discrepancy {worst:.2e} for 10 and 1000 steps, both equations"))
}

// ---------------------------------------------------------------------------
// 07: additive stationary covariances match closed forms within 3 SE.
// ---------------------------------------------------------------------------

fn c07_stationary_covariance_monte_carlo() -> Result<String, String> {
    let start = Instant::now();
    let domain = build_domain(&[PI], 4, 8).map_err(es)?;
    let cov = build_covariance(&domain, DecayLaw::Flat { level: 1.0 }, None).map_err(es)?;
    let coeffs = CoefficientPreset::Additive.build();
    let k = 4;
    let t_final = 1.0;
    let n_steps = 4096;
    let m_paths = 10_000usize;
    let mut worst_z = 0.0f64;

    // Heat: Var u_k(T) = (1 - e^{-2 alpha T}) / (2 alpha).
    let sim = SimConfig {
        equation: Equation::Heat,
        mu: 1.0,
        t_final,
        n_steps,
        seed: 0x5EED_0007,
        u0: vec![0.0; k],
        v0: vec![],
        save_stride: n_steps,
    };
    let mut usq = vec![Vec::with_capacity(m_paths); k];
    for pid in 0..m_paths {
        let tr = run_path(&domain, &coeffs, &cov, &sim, pid as u64).map_err(es)?;
        let end = tr.endpoint();
        for m in 0..k {
            usq[m].push(end.u_coeffs[m] * end.u_coeffs[m]);
        }
    }
    for m in 0..k {
        let alpha = domain.eigenvalue(m);
        let target = (1.0 - (-2.0 * alpha * t_final).exp()) / (2.0 * alpha);
        let (mean, se) = mean_and_se(&usq[m]);
        let z = (mean - target).abs() / se;
        worst_z = worst_z.max(z);
        ensure!(
            z <= 3.0,
            "heat mode {m}: variance {mean:.5e} vs {target:.5e} is {z:.2} SEs away"
        );
    }

    // Wave: Cov(T) = S - M(T) S M(T)^T with S = diag(1/(2 alpha), 1/(2 mu)),
    // M(T) from the independent integrator.
    let mu = 0.2;
    let sim = SimConfig { equation: Equation::Wave, mu, seed: 0x5EED_0008, ..sim.clone() };
    let mut uu = vec![Vec::with_capacity(m_paths); k];
    let mut vv = vec![Vec::with_capacity(m_paths); k];
    let mut uv = vec![Vec::with_capacity(m_paths); k];
    for pid in 0..m_paths {
        let tr = run_path(&domain, &coeffs, &cov, &sim, pid as u64).map_err(es)?;
        let end = tr.endpoint();
        for m in 0..k {
            uu[m].push(end.u_coeffs[m] * end.u_coeffs[m]);
            vv[m].push(end.v_coeffs[m] * end.v_coeffs[m]);
            uv[m].push(end.u_coeffs[m] * end.v_coeffs[m]);
        }
    }
    for m in 0..k {
        let alpha = domain.eigenvalue(m);
        let fm = rk4_fundamental(mu, alpha, t_final);
        let (suu, svv) = (1.0 / (2.0 * alpha), 1.0 / (2.0 * mu));
        let t_uu = suu - (fm[0][0] * fm[0][0] * suu + fm[0][1] * fm[0][1] * svv);
        let t_uv = -(fm[0][0] * fm[1][0] * suu + fm[0][1] * fm[1][1] * svv);
        let t_vv = svv - (fm[1][0] * fm[1][0] * suu + fm[1][1] * fm[1][1] * svv);
        for (name, samples, target) in
            [("uu", &uu[m], t_uu), ("uv", &uv[m], t_uv), ("vv", &vv[m], t_vv)]
        {
            let (mean, se) = mean_and_se(samples);
            let z = (mean - target).abs() / se;
            worst_z = worst_z.max(z);
            ensure!(
                z <= 3.0,
                "wave mode {m} {name}: {mean:.5e} vs {target:.5e} is {z:.2} SEs away"
            );
        }
    }

    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 120.0, "runtime {secs:.1}s exceeded the 2 min budget");
    Ok(format!("16 covariance entries within 3 SE (worst {worst_z:.2} SE), 10^4 paths each"))
}

// ---------------------------------------------------------------------------
// 08: coupled small-mass sweep decreases, dominated by its decomposition.
// ---------------------------------------------------------------------------

fn c08_coupled_sweep_decreases() -> Result<String, String> {
    let start = Instant::now();
    let domain = build_domain(&[PI], 32, 64).map_err(es)?;
    let cov = build_covariance(&domain, DecayLaw::Flat { level: 0.5 }, None).map_err(es)?;
    let mut u0 = vec![0.0; 32];
    u0[0] = 1.0;
    u0[1] = 0.5;
    let config = ExperimentConfig {
        mu_grid: vec![1e-1, 1e-2, 1e-3],
        n_paths: 64,
        p_moment: 2.0,
        ratio_threshold: 0.1,
        base: SimConfig {
            equation: Equation::Wave,
            mu: 1e-1,
            t_final: 1.0,
            n_steps: 256,
            seed: 0x5EED_0088,
            u0,
            v0: vec![],
            save_stride: 1,
        },
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(es)?;

    let mut lines = Vec::new();
    for (label, coeffs) in [
        ("additive", CoefficientPreset::Additive.build()),
        (
            "multiplicative",
            CoefficientPreset::SineDriftSaturating { amplitude: 0.5, c0: 0.5, c1: 0.5 }.build(),
        ),
    ] {
        let rep = pool
            .install(|| run_sk_sweep(&domain, &coeffs, &cov, &config))
            .map_err(es)?;
        for row in &rep.rows {
            ensure!(
                row.passed,
                "{label}: row at mu={:.1e} failed (aborted {} of {}, domination)",
                row.mu,
                row.aborted,
                row.n_paths
            );
        }
        ensure!(
            rep.separation_ok,
            "{label}: estimates not separated by one SE: {:?}",
            rep.rows.iter().map(|r| (r.estimate, r.std_error)).collect::<Vec<_>>()
        );
        ensure!(
            rep.ratio_ok,
            "{label}: final estimate not below 0.1x the first: {:?}",
            rep.rows.iter().map(|r| r.estimate).collect::<Vec<_>>()
        );
        ensure!(rep.passed, "{label}: sweep report failed");
        lines.push(format!(
            "{label}: {:.3e} -> {:.3e} -> {:.3e} (slope {:.2})",
            rep.rows[0].estimate, rep.rows[1].estimate, rep.rows[2].estimate, rep.trend
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 600.0, "single-threaded runtime {secs:.1}s exceeded the 10 min budget");
    Ok(lines.join("; "))
}

// ---------------------------------------------------------------------------
// 09: convolution-gap variance matches the isometry integral.
// ---------------------------------------------------------------------------

fn c09_convolution_gap_isometry() -> Result<String, String> {
    // Single retained mode: the mean-square position gap at the final time
    // has the closed quadrature form  ∫ (e^{-α τ} - f(τ; 0, 1/μ))² dτ, with
    // the kernel synthesized by the independent integrator.
    let domain = build_domain(&[PI], 1, 4).map_err(es)?;
    let cov = build_covariance(&domain, DecayLaw::Flat { level: 1.0 }, None).map_err(es)?;
    let t_final = 1.0;
    let n_steps = 4096;
    let base = SimConfig {
        equation: Equation::Wave,
        mu: 0.2,
        t_final,
        n_steps,
        seed: 0x5EED_0009,
        u0: vec![0.0],
        v0: vec![],
        save_stride: 1,
    };
    let mu_grid = [0.2, 0.1, 0.05];
    let rep = gamma_gap_check(&domain, &cov, &base, &mu_grid, 4000).map_err(es)?;
    let alpha = domain.eigenvalue(0);

    let mut worst_z = 0.0f64;
    for row in &rep.rows {
        let nodes = 16_385usize;
        let taus = lin_grid(0.0, t_final, nodes);
        let kernel = rk4_mode_eval(row.mu, alpha, [0.0, 1.0], &taus);
        let vals: Vec<f64> = taus
            .iter()
            .zip(&kernel)
            .map(|(&tau, k)| {
                let diff = (-alpha * tau).exp() - k[0] / row.mu;
                diff * diff
            })
            .collect();
        let oracle = composite_simpson(&vals, t_final / (nodes - 1) as f64);
        let got = row.endpoint_second_moment[0];
        let se = row.endpoint_std_error[0];
        let z = (got - oracle).abs() / se;
        worst_z = worst_z.max(z);
        ensure!(
            z <= 3.0,
            "mu={:.2}: mean-square gap {got:.5e} vs isometry {oracle:.5e} is {z:.2} SEs away",
            row.mu
        );
    }

    // Several retained modes: the sup-gap second moment decreases in mass.
    let domain8 = build_domain(&[PI], 8, 16).map_err(es)?;
    let cov8 = build_covariance(&domain8, DecayLaw::Flat { level: 1.0 }, None).map_err(es)?;
    let base8 = SimConfig { u0: vec![0.0; 8], n_steps: 512, ..base.clone() };
    let rep8 = gamma_gap_check(&domain8, &cov8, &base8, &[1e-1, 1e-2, 1e-3], 1000).map_err(es)?;
    ensure!(
        rep8.decreasing && rep8.passed,
        "multi-mode gap not decreasing: {:?}",
        rep8.rows.iter().map(|r| r.estimate).collect::<Vec<_>>()
    );

    Ok(format!(
        "isometry within 3 SE at 3 masses (worst {worst_z:.2} SE); multi-mode trend {:.3e} -> {:.3e}",
        rep8.rows[0].estimate,
        rep8.rows.last().unwrap().estimate
    ))
}

// ---------------------------------------------------------------------------
// 10: Picard iteration contracts onto the time-stepped path.
// ---------------------------------------------------------------------------

fn c10_picard_contraction() -> Result<String, String> {
    let domain = build_domain(&[PI], 4, 8).map_err(es)?;
    let cov = build_covariance(&domain, DecayLaw::Flat { level: 1.0 }, None).map_err(es)?;
    // Lipschitz reaction term, no noise amplitude: the comparison is then
    // fully deterministic.
    let coeffs = Coefficients {
        drift: Some(Arc::new(|_, _, u: f64| u.sin())),
        diffusion: Arc::new(|_, _, _| 0.0),
        lipschitz: 1.0,
        linear_growth: 1.0,
        label: "sine_drift_noiseless".into(),
    };
    let mut lines = Vec::new();
    for (label, equation, mu) in [("wave", Equation::Wave, 0.05), ("heat", Equation::Heat, 1.0)] {
        let sim = SimConfig {
            equation,
            mu,
            t_final: 0.05,
            n_steps: 64,
            seed: 3,
            u0: vec![0.6, -0.4, 0.2, 0.1],
            v0: vec![],
            save_stride: 1,
        };
        let (rep, fixed) = picard_solve(&domain, &coeffs, &cov, &sim, 0, 40, 1e-14).map_err(es)?;
        ensure!(rep.converged, "{label}: iteration did not converge: {:?}", rep.sup_diffs);
        let mut max_ratio = 0.0f64;
        for (i, &r) in rep.ratios.iter().enumerate() {
            if rep.sup_diffs[i + 1] > 1e-13 {
                max_ratio = max_ratio.max(r);
                ensure!(r < 0.5, "{label}: contraction ratio {r:.3} ≥ 1/2 at iterate {i}");
            }
        }

        let stepped = run_path(&domain, &coeffs, &cov, &sim, 0).map_err(es)?;
        let sim_half = SimConfig { n_steps: 128, ..sim.clone() };
        let halved = run_path(&domain, &coeffs, &cov, &sim_half, 0).map_err(es)?;
        let mut truncation = 0.0f64;
        let mut deviation = 0.0f64;
        for i in 0..stepped.states.len() {
            let a = &stepped.states[i];
            let h = &halved.states[2 * i];
            let f = &fixed.states[i];
            let d_t = PhasePoint {
                u_coeffs: a.u_coeffs.iter().zip(&h.u_coeffs).map(|(x, y)| x - y).collect(),
                v_coeffs: a.v_coeffs.iter().zip(&h.v_coeffs).map(|(x, y)| x - y).collect(),
            };
            let d_f = PhasePoint {
                u_coeffs: a.u_coeffs.iter().zip(&f.u_coeffs).map(|(x, y)| x - y).collect(),
                v_coeffs: a.v_coeffs.iter().zip(&f.v_coeffs).map(|(x, y)| x - y).collect(),
            };
            truncation = truncation.max(pair_norm(&domain, &d_t));
            deviation = deviation.max(pair_norm(&domain, &d_f));
        }
        ensure!(
            deviation <= 5.0 * truncation,
            "{label}: fixed point is {deviation:.3e} from the stepped path, step-halving scale {truncation:.3e}"
        );
        lines.push(format!(
            "{label}: worst ratio {max_ratio:.3}, deviation {deviation:.1e} vs step-halving {truncation:.1e}"
        ));
    }
    Ok(lines.join("; "))
}

// ---------------------------------------------------------------------------
// 11: position quadratic variation is mass-uniform for additive noise.
// ---------------------------------------------------------------------------

fn c11_position_variation_mass_uniform() -> Result<String, String> {
    let domain = build_domain(&[PI], 16, 32).map_err(es)?;
    let cov = build_covariance(&domain, DecayLaw::PowerIndex { scale: 1.0, rate: 1.0 }, Some(4.0))
        .map_err(es)?;
    let config = AnalysisConfig { alpha: 0.2, q_exponent: 4.0, p_moment: 6.0 };
    let phi = PhiPath::additive(&domain, 1.0);
    let rep = position_uniformity_check(
        &domain,
        &cov,
        &config,
        1.0,
        &phi,
        &[1e-1, 1e-2, 1e-3, 1e-4],
        DEFAULT_QUAD_CELLS,
        0.1,
    )
    .map_err(es)?;
    ensure!(
        rep.passed,
        "uniformity check failed: slope {:.4}, ratios {:?}",
        rep.slope,
        rep.rows.iter().map(|r| r.ratio).collect::<Vec<_>>()
    );
    let ratios: Vec<f64> = rep.rows.iter().map(|r| r.ratio).collect();
    Ok(format!(
        "log-log slope {:.4} (|slope| ≤ 0.1), ratios {:.4}..{:.4} over mu 1e-1..1e-4",
        rep.slope,
        ratios.iter().cloned().fold(f64::INFINITY, f64::min),
        ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    ))
}

// ---------------------------------------------------------------------------

/// Writes through the raw stdout handle so the per-criterion lines survive
/// libtest's output capture and show up in a plain `cargo test` run.
fn announce(line: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout(), "{line}");
}

#[test]
fn acceptance_criteria() {
    let criteria: &[(&str, fn() -> Result<String, String>)] = &[
        ("01 mode response matches adaptive step-doubling integration", c01_mode_response_matches_integrator),
        ("02 per-mode decay bounds hold with 1e-12 slack", c02_decay_bounds_hold),
        ("03 truncated operator norms stay within analytic envelopes", c03_operator_norms_within_envelopes),
        ("04 single-mode responses approach the heat mode as mass vanishes", c04_mode_convergence_in_vanishing_mass),
        ("05 overdamped mode count matches the closed form", c05_overdamped_count_closed_form),
        ("06 zero-coefficient paths reproduce the exact flows", c06_linear_flow_exactness),
        ("07 additive stationary covariances match closed forms", c07_stationary_covariance_monte_carlo),
        ("08 coupled small-mass sweep decreases and is dominated", c08_coupled_sweep_decreases),
        ("09 convolution-gap variance matches the isometry integral", c09_convolution_gap_isometry),
        ("10 picard iteration contracts to the time-stepped path", c10_picard_contraction),
        ("11 position variation is mass-uniform for additive noise", c11_position_variation_mass_uniform),
    ];

    announce("");
    let mut failed = Vec::new();
    for (name, run) in criteria {
        let start = Instant::now();
        match run() {
            Ok(detail) => {
                announce(&format!("[PASS] {name} ({:.1}s) — {detail}", start.elapsed().as_secs_f64()));
            }
            Err(msg) => {
                announce(&format!("[FAIL] {name} ({:.1}s) — {msg}", start.elapsed().as_secs_f64()));
                failed.push(*name);
            }
        }
    }
    assert!(failed.is_empty(), "acceptance criteria failed: {failed:#?}");
}
