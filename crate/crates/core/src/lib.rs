//! Numerical laboratory for the semilinear wave equation with a
//! Riemann–Liouville memory nonlinearity,
//!
//! ```text
//! u_tt − Δu = J^{1−γ}(|u|^p),   J^α f(t) = Γ(α)⁻¹ ∫₀ᵗ (t−s)^{α−1} f(s) ds.
//! ```
//!
//! The crate is organised bottom-up: [`fractional`] quadrature, [`exponents`]
//! arithmetic, the [`spectral`] periodic-box engine, the [`solver`] with its
//! blow-up diagnostics, and [`certificates`] computed from stored runs.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certificates;
pub mod error;
pub mod exponents;
pub mod fractional;
pub mod solver;
pub mod special;
pub mod spectral;

pub use error::{ConfigIssue, Error, Result};
pub use exponents::{ExponentReport, Flag, ProblemParams, StrichartzPair};
pub use fractional::{FractionalOrder, QuadratureWeights, SampledSignal, SoeKernel, TimeGrid};
pub use solver::{RunConfig, RunResult, SeriesRow, Verdict};
pub use spectral::{Field, SpatialGrid, WaveState};
