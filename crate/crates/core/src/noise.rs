//! Diagonal covariance `Q e_j = λ_j e_j` and reproducible cylindrical
//! Wiener increments.
//!
//! Increments are generated *counter-based*: the standard-normal draws for
//! `(seed, path, step)` are a pure function of those indices, obtained by
//! seeking a ChaCha12 stream to an absolute word position and applying a
//! fixed-consumption Box–Muller transform (two 64-bit words per draw, no
//! rejection). Consequences that the solvers rely on:
//!
//! * wave and heat runs with the same `(seed, path)` consume bitwise-equal
//!   Brownian increments — the coupling that makes pathwise differences
//!   meaningful;
//! * steps can be generated in any order, by any number of parallel
//!   workers, without changing a single draw.

use crate::error::{Error, Result};
use crate::spectrum::SpectralDomain;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

/// How the covariance eigenvalues `λ_j` are generated (in sorted mode order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DecayLaw {
    /// `λ_j = level` for every mode. Trace-type sums diverge, so this is
    /// only admissible on one-dimensional domains (bounded-noise case).
    Flat { level: f64 },
    /// `λ_j = scale · j^{-rate}` with `j` the 1-based sorted mode rank.
    PowerIndex { scale: f64, rate: f64 },
    /// `λ_j = scale · α_j^{-rate}`.
    PowerEigenvalue { scale: f64, rate: f64 },
    /// Explicit per-mode values (truncated description; no tail claim).
    Explicit { values: Vec<f64> },
}

/// Covariance restricted to the retained modes, with summability diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct CovarianceQ {
    eigenvalues: Vec<f64>,
    law: DecayLaw,
    /// Summability exponent `q`; `None` is the bounded case (d = 1 only).
    q_exponent: Option<f64>,
    /// `(Σ_{j ≤ K} λ_j^q)^{1/q}`, or `sup λ_j` in the bounded case.
    norm_q: f64,
    /// Analytic bound on the neglected tail `Σ_{j > K} λ_j^q` when the decay
    /// law admits one.
    tail_bound: Option<f64>,
}

/// Upper end of the admissible `q` window: `2d/(d-2)` for `d ≥ 3`, else ∞.
pub fn q_upper_limit(dim: usize) -> f64 {
    if dim >= 3 {
        2.0 * dim as f64 / (dim as f64 - 2.0)
    } else {
        f64::INFINITY
    }
}

/// Instantiates `λ_j` aligned to the domain's sorted modes and validates the
/// dimension-dependent admissibility window: for `d ≥ 2` a finite
/// `q ∈ (2, 2d/(d-2))` is required and the decay law must make `Σ λ_j^q`
/// summable (checked analytically from the law, not from the finite prefix).
pub fn build_covariance(domain: &SpectralDomain, law: DecayLaw, q_exponent: Option<f64>) -> Result<CovarianceQ> {
    let k = domain.truncation();
    let d = domain.dim();

    let eigenvalues: Vec<f64> = match &law {
        DecayLaw::Flat { level } => vec![*level; k],
        DecayLaw::PowerIndex { scale, rate } => {
            (1..=k).map(|j| scale * (j as f64).powf(-rate)).collect()
        }
        DecayLaw::PowerEigenvalue { scale, rate } => {
            domain.eigenvalues().iter().map(|&a| scale * a.powf(-rate)).collect()
        }
        DecayLaw::Explicit { values } => {
            if values.len() != k {
                return Err(Error::Config(format!(
                    "explicit covariance needs {k} eigenvalues, got {}",
                    values.len()
                )));
            }
            values.clone()
        }
    };
    if eigenvalues.iter().any(|l| !l.is_finite() || *l < 0.0) {
        return Err(Error::Admissibility("covariance eigenvalues must be finite and nonnegative".into()));
    }

    if let Some(q) = q_exponent {
        if !(q > 2.0 && q < q_upper_limit(d)) {
            return Err(Error::Admissibility(format!(
                "q = {q} outside the admissible window (2, {}) for d = {d}",
                q_upper_limit(d)
            )));
        }
    }

    // Tail summability is a property of the law, not of the retained prefix.
    let tail_bound = match (&law, q_exponent) {
        (DecayLaw::Flat { level }, Some(q)) => {
            if *level > 0.0 {
                return Err(Error::Admissibility(
                    "flat eigenvalues are not q-summable for any q; use a decaying law".into(),
                ));
            }
            let _ = q;
            Some(0.0)
        }
        (DecayLaw::PowerIndex { scale, rate }, Some(q)) => {
            if rate * q <= 1.0 && *scale != 0.0 {
                return Err(Error::Admissibility(format!(
                    "Σ j^(-rate·q) needs rate·q > 1; got rate·q = {}",
                    rate * q
                )));
            }
            // Σ_{j>K} (scale j^{-rate})^q ≤ scale^q ∫_K^∞ x^{-rate q} dx.
            Some(scale.abs().powf(q) * (k as f64).powf(1.0 - rate * q) / (rate * q - 1.0))
        }
        (DecayLaw::PowerEigenvalue { scale, rate }, Some(q)) => {
            // α_j grows like j^(2/d), so λ_j^q decays like j^(-2 rate q / d).
            let decay = 2.0 * rate * q / d as f64;
            if decay <= 1.0 && *scale != 0.0 {
                return Err(Error::Admissibility(format!(
                    "eigenvalue-power law needs 2·rate·q/d > 1; got {decay}"
                )));
            }
            let last = *eigenvalues.last().unwrap();
            Some(last.powf(q) * k as f64 / (decay - 1.0))
        }
        (DecayLaw::Explicit { .. }, _) => None,
        (_, None) => None,
    };

    if d >= 2 && q_exponent.is_none() {
        return Err(Error::Admissibility(format!(
            "d = {d} requires a summability exponent q in (2, {})",
            q_upper_limit(d)
        )));
    }
    if d >= 2 && q_exponent.is_some() && tail_bound.is_none() && !matches!(law, DecayLaw::Explicit { .. }) {
        return Err(Error::Admissibility("decay law does not certify q-summability".into()));
    }

    let norm_q = match q_exponent {
        Some(q) => eigenvalues.iter().map(|l| l.powf(q)).sum::<f64>().powf(1.0 / q),
        None => eigenvalues.iter().cloned().fold(0.0, f64::max),
    };

    Ok(CovarianceQ { eigenvalues, law, q_exponent, norm_q, tail_bound })
}

impl CovarianceQ {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvalue(&self, j: usize) -> f64 {
        self.eigenvalues[j]
    }

    pub fn law(&self) -> &DecayLaw {
        &self.law
    }

    pub fn q_exponent(&self) -> Option<f64> {
        self.q_exponent
    }

    /// `‖Q‖_q` over retained modes (`sup λ_j` in the bounded case).
    pub fn norm_q(&self) -> f64 {
        self.norm_q
    }

    pub fn tail_bound(&self) -> Option<f64> {
        self.tail_bound
    }
}

/// One step's standard-normal draws for every retained mode.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseIncrement {
    pub gaussians: Vec<f64>,
    pub dt: f64,
    pub path_id: u64,
    pub step: u64,
}

impl NoiseIncrement {
    /// Mode coefficients of `Q Δw`: `λ_j √dt ξ_j`.
    pub fn scaled_coeffs(&self, cov: &CovarianceQ) -> Vec<f64> {
        let sdt = self.dt.sqrt();
        self.gaussians
            .iter()
            .zip(cov.eigenvalues())
            .map(|(&xi, &l)| l * sdt * xi)
            .collect()
    }
}

const WORDS_PER_GAUSSIAN: u128 = 4; // two u64 draws = four 32-bit ChaCha words

fn counter_rng(seed: u64, path_id: u64) -> ChaCha12Rng {
    // Spread the 64-bit seed over the 256-bit key so nearby seeds do not
    // share key bytes; stream id separates paths.
    let mut key = [0u8; 32];
    let mut s = seed;
    for chunk in key.chunks_mut(8) {
        s = s.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0xD1B5_4A32_D192_ED03);
        let mixed = splitmix64(s);
        chunk.copy_from_slice(&mixed.to_le_bytes());
    }
    let mut rng = ChaCha12Rng::from_seed(key);
    rng.set_stream(path_id);
    rng
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn box_muller(r1: u64, r2: u64) -> f64 {
    const SCALE: f64 = 1.0 / 9_007_199_254_740_992.0; // 2^-53
    let u1 = ((r1 >> 11) as f64 + 0.5) * SCALE; // strictly inside (0, 1)
    let u2 = ((r2 >> 11) as f64 + 0.5) * SCALE;
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Standard-normal draws for `(seed, path, step)`, one per mode, as a pure
/// function of the indices.
pub fn standard_gaussians(seed: u64, path_id: u64, step: u64, n_modes: usize) -> Vec<f64> {
    let mut rng = counter_rng(seed, path_id);
    rng.set_word_pos(step as u128 * WORDS_PER_GAUSSIAN * n_modes as u128);
    (0..n_modes)
        .map(|_| {
            let a = rng.next_u64();
            let b = rng.next_u64();
            box_muller(a, b)
        })
        .collect()
}

/// The increment consumed at one step of one path.
pub fn increment(cov: &CovarianceQ, seed: u64, path_id: u64, step: u64, dt: f64) -> Result<NoiseIncrement> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Config(format!("dt must be positive and finite, got {dt}")));
    }
    Ok(NoiseIncrement {
        gaussians: standard_gaussians(seed, path_id, step, cov.eigenvalues().len()),
        dt,
        path_id,
        step,
    })
}

/// All increments of one path, in step order.
pub fn sample_increments(cov: &CovarianceQ, dt: f64, n_steps: usize, seed: u64, path_id: u64) -> Result<Vec<NoiseIncrement>> {
    (0..n_steps as u64).map(|s| increment(cov, seed, path_id, s, dt)).collect()
}
