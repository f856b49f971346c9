//! Numerical laboratory for bubbling solutions of `-Δw = ε² h e^w` on planar
//! domains with zero Dirichlet data.
//!
//! The crate is layered bottom-up:
//!
//! * [`geometry`], [`green`], [`weight`]: domains, Dirichlet Green functions
//!   and the vortex weight `h`.
//! * [`liouville`]: entire solutions of `Δv + e^v = 0`, the linearized
//!   operator and its kernel, and the local bubble profile.
//! * [`hamiltonian`]: the m-vortex Hamiltonian, its critical points and the
//!   constants `l(q)`, `D(q)` entering the mass expansion.
//! * [`grid`], [`solver`]: Shortley–Weller discretization, damped Newton,
//!   peak-height continuation and uniqueness probes.
//! * [`diagnostics`]: asymptotic checks on solved or synthetic fields.

pub mod diagnostics;
pub mod error;
pub mod geometry;
pub mod green;
pub mod grid;
pub mod hamiltonian;
pub mod liouville;
pub mod quad;
pub mod solver;
pub mod sparse;
pub mod weight;

pub use error::{Error, Result};
pub use geometry::{Domain, Shape};
pub use green::{GreenBackend, GreenEvaluator, Jet};
pub use grid::{Discretization, GridSpec, ScalarField};
pub use hamiltonian::{BlowupConfiguration, CriticalPointRecord};
pub use liouville::{BubbleProfile, EntireBubble, KernelFunctions};
pub use solver::{Branch, BranchPoint};
pub use weight::{LogPoly, Vortex, WeightSpec};

/// Points and vectors in the plane.
pub type Vec2 = nalgebra::Vector2<f64>;
/// 2×2 real matrices (Hessian blocks, mixed derivatives).
pub type Mat2 = nalgebra::Matrix2<f64>;

pub(crate) const TWO_PI: f64 = 2.0 * std::f64::consts::PI;
pub(crate) const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;
pub(crate) const EIGHT_PI: f64 = 8.0 * std::f64::consts::PI;

#[inline]
pub fn vec2(x: f64, y: f64) -> Vec2 {
    Vec2::new(x, y)
}
