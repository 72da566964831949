//! Numerical laboratory for stochastic differential equations driven by
//! fractional Brownian motion with Hurst parameter `H ∈ (1/2, 1)`.
//!
//! The crate is organised around the pipeline
//!
//! ```text
//! Wiener path ──K_H──▶ fBm path ──Euler──▶ SDE path ──K_H⁻¹──▶ Girsanov weight
//!                                   │
//!                                   └──one-step freeze──▶ conditional Gaussian
//! ```
//!
//! * [`fraccalc`] — discrete fractional calculus: Riemann–Liouville integrals,
//!   Weyl derivatives, Hölder seminorms, Young integrals.
//! * [`volterra`] — the square-integrable Volterra kernel `K_H`, the operators
//!   `K_H`, `K_H*`, `K_H⁻¹`, and the fBm covariance `R_H`.
//! * [`fbm`] — seeded path generators (kernel, Cholesky, circulant embedding).
//! * [`sde`] — pathwise Euler / Young–Picard solvers and moment studies.
//! * [`library`] — named coefficient sets and drift functionals used by the
//!   studies and the CLI.
//! * [`girsanov`] — the change-of-measure integrand, Radon–Nikodym weights and
//!   martingale diagnostics.
//! * [`density`] — one-step Gaussian approximation, finite-difference density
//!   probes, localization weights and kernel density estimates.
//!
//! Ensemble studies run data-parallel over replicas (rayon) when the default
//! `parallel` feature is enabled; replica streams are counter-based so results
//! are identical for any thread count.

pub mod density;
pub mod ensemble;
pub mod error;
pub mod fbm;
pub mod fraccalc;
pub mod girsanov;
pub mod grid;
pub mod library;
pub mod quad;
pub mod report;
pub mod sde;
pub mod stats;
pub mod volterra;

pub use error::{Error, Result};
pub use grid::GridFunction;
pub use report::{Estimate, MonteCarloReport};
pub use volterra::{HurstParam, KernelGrid};
