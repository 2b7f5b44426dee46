//! metricslab: a numerical laboratory for invariant metrics on unbounded
//! pseudoconvex model domains.
//!
//! The crate provides a domain catalog (graph domains over weighted-
//! homogeneous polynomials, the Kohn-Nirenberg and Fornaess domains, the
//! exponential graph, an egg-shaped finite-volume domain, balls, polydiscs
//! and truncations), Wirtinger calculus and Levi forms, deterministic
//! seeded quadrature, Bergman kernels and metrics (closed-form and
//! Gram-matrix numeric engines), Caratheodory lower and Kobayashi upper
//! bounds with comparison checks, and peak-function verification with the
//! cutoff/assembly combinators.

pub mod bergman;
pub mod calculus;
pub mod domains;
pub mod error;
pub mod expr;
pub mod metrics;
pub mod peaks;
pub mod poly;
pub mod quadrature;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Convenience constructor used throughout tests and binaries.
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}
