//! Sine eigenbasis of the Dirichlet Laplacian on a generalized rectangle.
//!
//! The domain is `D = (0, L_1) x ... x (0, L_d)`. The eigenfunctions and
//! eigenvalues of `-Δ` with zero boundary conditions are
//!
//! ```text
//! e_k(x) = prod_i sqrt(2 / L_i) * sin(k_i * pi * x_i / L_i),
//! α_k    = sum_i (k_i * pi / L_i)^2,          k in {1, 2, ...}^d.
//! ```
//!
//! A [`SpectralDomain`] retains the `K` smallest eigenvalues, sorted in
//! ascending order with a lexicographic tie-break on the multi-index, so a
//! truncation never splits an eigenvalue cluster arbitrarily between runs.
//! Eigenvalue growth follows the Weyl law `α_k ~ c k^(2/d)`, which
//! [`SpectralDomain::weyl_slope`] exposes as a sanity diagnostic.
//!
//! Function values live on a tensor midpoint grid with `M` cells per axis
//! (`x_j = (j + 1/2) L / M`). The composite midpoint rule on that grid
//! integrates products `sin(j π x / L) sin(k π x / L)` *exactly* as long as
//! every retained per-axis index is at most `M - 1`; [`build_domain`] rejects
//! resolutions below that threshold, so `analyze . synthesize = id` holds to
//! rounding and the discrete `analyze` is a genuine `L^2` projection.

use crate::error::{Error, Result};

/// Scalar samples on the tensor midpoint grid of a [`SpectralDomain`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub values: Vec<f64>,
}

impl GridField {
    pub fn zeros(n: usize) -> Self {
        GridField { values: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Truncated sine basis: the `K` lowest Dirichlet modes plus the quadrature
/// grid used to evaluate Nemytskii compositions.
#[derive(Debug, Clone)]
pub struct SpectralDomain {
    side_lengths: Vec<f64>,
    grid_res: usize,
    /// Multi-indices (1-based), one per retained mode, ascending eigenvalue.
    modes: Vec<Vec<u32>>,
    /// `α_k` matching `modes`, ascending.
    eigenvalues: Vec<f64>,
    /// Coordinates of the `M^d` midpoint grid points, flattened row-major
    /// (`point * d + axis`).
    grid_coords: Vec<f64>,
    /// Basis values `e_k(x_p)`, row-major `k * n_grid + p`.
    basis: Vec<f64>,
    /// Midpoint quadrature weight `prod_i (L_i / M)`.
    quad_weight: f64,
}

/// Builds the truncated basis. Fails if a side length is not positive and
/// finite, `truncation` is zero, or `grid_res` does not strictly exceed the
/// largest retained per-axis index (the exact-quadrature requirement).
pub fn build_domain(side_lengths: &[f64], truncation: usize, grid_res: usize) -> Result<SpectralDomain> {
    let d = side_lengths.len();
    if d == 0 {
        return Err(Error::Domain("need at least one side length".into()));
    }
    for (i, &l) in side_lengths.iter().enumerate() {
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::Domain(format!("side length {i} must be positive and finite, got {l}")));
        }
    }
    if truncation == 0 {
        return Err(Error::Domain("truncation must be at least 1".into()));
    }
    if grid_res == 0 {
        return Err(Error::Domain("grid resolution must be at least 1".into()));
    }

    let modes = select_modes(side_lengths, truncation);
    let eigenvalues: Vec<f64> = modes.iter().map(|k| eigenvalue_of(side_lengths, k)).collect();

    let max_index = modes.iter().flat_map(|k| k.iter().copied()).max().unwrap() as usize;
    if grid_res <= max_index {
        return Err(Error::Domain(format!(
            "grid resolution {grid_res} too coarse: largest per-axis mode index is {max_index}, \
             need at least {} points per axis for exact sine quadrature",
            max_index + 1
        )));
    }

    let n_grid = grid_res.pow(d as u32);
    let mut grid_coords = vec![0.0; n_grid * d];
    for p in 0..n_grid {
        let mut rem = p;
        for axis in (0..d).rev() {
            let j = rem % grid_res;
            rem /= grid_res;
            grid_coords[p * d + axis] = (j as f64 + 0.5) * side_lengths[axis] / grid_res as f64;
        }
    }

    // Per-axis sine tables sin(k * pi * (j + 1/2) / M); the basis factorizes.
    let mut sine: Vec<Vec<f64>> = Vec::with_capacity(max_index + 1);
    for k in 0..=max_index {
        let row: Vec<f64> = (0..grid_res)
            .map(|j| (k as f64 * std::f64::consts::PI * (j as f64 + 0.5) / grid_res as f64).sin())
            .collect();
        sine.push(row);
    }
    let amp: f64 = side_lengths.iter().map(|l| (2.0 / l).sqrt()).product();

    let mut basis = vec![0.0; truncation * n_grid];
    for (ki, k) in modes.iter().enumerate() {
        let row = &mut basis[ki * n_grid..(ki + 1) * n_grid];
        for (p, val) in row.iter_mut().enumerate() {
            let mut rem = p;
            let mut prod = amp;
            for axis in (0..d).rev() {
                let j = rem % grid_res;
                rem /= grid_res;
                prod *= sine[k[axis] as usize][j];
            }
            *val = prod;
        }
    }

    let quad_weight: f64 = side_lengths.iter().map(|l| l / grid_res as f64).product();

    Ok(SpectralDomain {
        side_lengths: side_lengths.to_vec(),
        grid_res,
        modes,
        eigenvalues,
        grid_coords,
        basis,
        quad_weight,
    })
}

fn eigenvalue_of(side_lengths: &[f64], k: &[u32]) -> f64 {
    k.iter()
        .zip(side_lengths)
        .map(|(&ki, &l)| {
            let r = ki as f64 * std::f64::consts::PI / l;
            r * r
        })
        .sum()
}

/// The `count` multi-indices with smallest eigenvalue, eigenvalue-ascending
/// with lexicographic tie-break. Grows the enumeration box until the cut-off
/// eigenvalue is provably below anything outside the box.
fn select_modes(side_lengths: &[f64], count: usize) -> Vec<Vec<u32>> {
    let d = side_lengths.len();
    let mut r: usize = 4;
    loop {
        let mut all: Vec<Vec<u32>> = Vec::new();
        let mut idx = vec![1u32; d];
        let mut exhausted = false;
        while !exhausted {
            all.push(idx.clone());
            // odometer increment over {1..r}^d
            let mut axis = d;
            loop {
                if axis == 0 {
                    exhausted = true;
                    break;
                }
                axis -= 1;
                if (idx[axis] as usize) < r {
                    idx[axis] += 1;
                    break;
                }
                idx[axis] = 1;
            }
        }
        all.sort_by(|a, b| {
            let ea = eigenvalue_of(side_lengths, a);
            let eb = eigenvalue_of(side_lengths, b);
            ea.partial_cmp(&eb).unwrap().then_with(|| a.cmp(b))
        });
        if all.len() >= count {
            // Any index outside the box has some k_i >= r + 1, hence an
            // eigenvalue of at least min_i ((r+1) pi / L_i)^2.
            let outside_floor = side_lengths
                .iter()
                .map(|l| {
                    let v = (r as f64 + 1.0) * std::f64::consts::PI / l;
                    v * v
                })
                .fold(f64::INFINITY, f64::min);
            let cutoff = eigenvalue_of(side_lengths, &all[count - 1]);
            if cutoff < outside_floor {
                all.truncate(count);
                return all;
            }
        }
        r *= 2;
    }
}

impl SpectralDomain {
    pub fn dim(&self) -> usize {
        self.side_lengths.len()
    }

    pub fn side_lengths(&self) -> &[f64] {
        &self.side_lengths
    }

    pub fn truncation(&self) -> usize {
        self.modes.len()
    }

    pub fn grid_res(&self) -> usize {
        self.grid_res
    }

    pub fn n_grid(&self) -> usize {
        self.basis.len() / self.modes.len()
    }

    pub fn volume(&self) -> f64 {
        self.side_lengths.iter().product()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvalue(&self, k: usize) -> f64 {
        self.eigenvalues[k]
    }

    pub fn mode_index(&self, k: usize) -> &[u32] {
        &self.modes[k]
    }

    /// Midpoint quadrature weight per grid cell.
    pub fn quad_weight(&self) -> f64 {
        self.quad_weight
    }

    /// Coordinates of grid point `p`.
    pub fn grid_coord(&self, p: usize) -> &[f64] {
        let d = self.dim();
        &self.grid_coords[p * d..(p + 1) * d]
    }

    /// `e_k` sampled on the grid.
    pub fn basis_row(&self, k: usize) -> &[f64] {
        let n = self.n_grid();
        &self.basis[k * n..(k + 1) * n]
    }

    /// Shared sup bound `prod_i sqrt(2 / L_i)` for every eigenfunction.
    pub fn basis_sup_norm(&self) -> f64 {
        self.side_lengths.iter().map(|l| (2.0 / l).sqrt()).product()
    }

    /// `sum_k coeffs[k] e_k` sampled on the grid.
    pub fn synthesize(&self, coeffs: &[f64]) -> GridField {
        assert_eq!(coeffs.len(), self.truncation(), "coefficient count must match truncation");
        let n = self.n_grid();
        let mut values = vec![0.0; n];
        for (k, &c) in coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let row = self.basis_row(k);
            for (v, &e) in values.iter_mut().zip(row) {
                *v += c * e;
            }
        }
        GridField { values }
    }

    /// Midpoint-rule projections `<field, e_k>` for every retained mode.
    pub fn analyze(&self, field: &GridField) -> Vec<f64> {
        assert_eq!(field.len(), self.n_grid(), "field length must match grid");
        let w = self.quad_weight;
        (0..self.truncation())
            .map(|k| {
                let row = self.basis_row(k);
                let dot: f64 = row.iter().zip(&field.values).map(|(&e, &f)| e * f).sum();
                w * dot
            })
            .collect()
    }

    /// Midpoint-rule integral of `field` over the domain.
    pub fn integrate(&self, field: &GridField) -> f64 {
        self.quad_weight * field.values.iter().sum::<f64>()
    }

    /// Least-squares slope of `log α_k` against `log k` (1-based rank).
    /// The Weyl law predicts `2 / d`.
    pub fn weyl_slope(&self) -> f64 {
        let n = self.truncation();
        assert!(n >= 2, "need at least two modes for a slope");
        let xs: Vec<f64> = (1..=n).map(|k| (k as f64).ln()).collect();
        let ys: Vec<f64> = self.eigenvalues.iter().map(|a| a.ln()).collect();
        let xm = xs.iter().sum::<f64>() / n as f64;
        let ym = ys.iter().sum::<f64>() / n as f64;
        let mut num = 0.0;
        let mut den = 0.0;
        for (x, y) in xs.iter().zip(&ys) {
            num += (x - xm) * (y - ym);
            den += (x - xm) * (x - xm);
        }
        num / den
    }
}
