//! Finite location-scale mixtures as approximants and estimators of densities.
//!
//! The crate is organised around the objects that appear in approximation and
//! estimation rate statements for mixtures `Σ πⱼ ν^d φ(ν(x − μⱼ))`:
//!
//! - [`kernels`]: base densities φ, their dilations and analytic constants.
//! - [`targets`]: synthetic target densities with exact samplers and smoothness
//!   descriptors (translation modulus, Sobolev constants).
//! - [`analysis`]: quadrature, Lᵖ distances, convolution smoothing and
//!   empirical-measure operators.
//! - [`approx`]: rate exponents, optimal scale, Maurey sampling, greedy
//!   refinement and the approximation-rate experiment.
//! - [`estimate`]: Gram matrices, the least-squares criterion, the Frank–Wolfe
//!   ε-minimizer, the adaptive estimator and empirical-process diagnostics.
//! - [`harness`]: configuration, orchestration and report emission for the
//!   `mixrate` CLI.
//!
//! All stochastic operations take explicit seeds, and every reduction is done
//! with a fixed pairwise summation order, so results do not depend on the
//! number of worker threads.

pub mod analysis;
pub mod approx;
pub mod error;
pub mod estimate;
pub mod harness;
pub mod kernels;
pub mod points;
pub mod rng;
pub mod targets;

pub use error::{Error, Result};
pub use points::PointSet;
