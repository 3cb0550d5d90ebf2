//! Spectral Galerkin laboratory for the damped stochastic wave equation
//! `μ u'' = Δu - u' + b(u) + g(u) Q ẇ` on a box with Dirichlet boundary and
//! its small-mass heat limit `u' = Δu + b(u) + g(u) Q ẇ`.
//!
//! The crate is organized around one idea: after projecting onto the
//! Dirichlet eigenbasis, every linear question about the wave semigroup
//! reduces to a one-dimensional damped oscillator per mode, which we can
//! evaluate in closed form. Modules:
//!
//! - [`spectrum`]: eigenbasis, grid sampling, analyze/synthesize transforms
//! - [`semigroup`]: per-mode propagators, decay-bound checks, operator norms
//! - [`fields`]: phase-space states, norms, reaction/diffusion coefficients
//! - [`noise`]: covariance admissibility and counter-based Gaussian draws
//! - [`solver`]: exponential Euler steppers and a discrete Picard iteration
//! - [`analysis`]: quadratic-variation functionals and convergence windows
//! - [`experiments`]: coupled mass-sweep Monte Carlo and error decomposition

pub mod analysis;
pub mod error;
pub mod experiments;
pub mod fields;
pub mod noise;
pub mod semigroup;
pub mod solver;
pub mod spectrum;

pub use analysis::{AnalysisConfig, PhiPath};
pub use error::{Error, Result};
pub use experiments::{ConvergenceReport, ExperimentConfig};
pub use fields::{CoefficientPreset, Coefficients, PhasePoint};
pub use noise::{CovarianceQ, DecayLaw};
pub use semigroup::{ModePropagator, OperatorFamily};
pub use solver::{Equation, SimConfig, Trajectory};
pub use spectrum::{GridField, SpectralDomain};
