//! Partition sums of low-degree polynomials on the Boolean cube.
//!
//! The central object is `S(e^f) = Σ_{x ∈ {−1,1}^n} e^{f(x)}` for a polynomial
//! `f` with quadratic (and optionally cubic) terms. The crate provides:
//!
//! * sparse instances and row-sum hypothesis checks that guarantee `S(e^f) ≠ 0`
//!   ([`model`]),
//! * exact Gray-code enumeration oracles for `S`, faces of the cube, and the
//!   auxiliary univariate polynomial `p(z)` used by the approximation pipeline
//!   ([`exact`]),
//! * small-angle vector-sum inequalities underlying the zero-freeness proofs,
//!   plus the degree-4 obstruction construction ([`geometry`]),
//! * the combinatorial formula for the derivatives `p^{(k)}(0)` ([`taylor`]),
//! * truncated-series logarithm, disk-map certification, and the truncated
//!   Taylor approximation of `ln p(1)` ([`interpolate`]),
//! * end-to-end drivers: approximation pipelines, zero-free scans, instance
//!   generators, and benchmarks ([`driver`]).

pub mod driver;
pub mod error;
pub mod exact;
pub mod geometry;
pub mod interpolate;
pub mod model;
pub mod series;
pub mod taylor;

pub use error::{Error, Result};
pub use model::{CubePolynomial, HypothesisReport, SpinVector};
pub use series::TaylorSeries;
