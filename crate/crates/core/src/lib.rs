//! Numerical laboratory for overdetermined Laplace eigenvalue problems on
//! planar domains bounded by Fourier curves.
//!
//! The pieces, bottom up:
//! - [`curve`]: Fourier curves, frames, reflection and symmetry predicates
//! - [`bessel`]: Bessel functions, their roots and exact disk spectra
//! - [`fem`]: P1 finite elements for −Δu = λu with boundary traces
//! - [`shape`]: shape derivatives, functionals and finite-difference checks
//! - [`riemann`]: metrics, gradients, covariant derivative and Hessian
//! - [`flow`]: area-preserving Riemannian gradient descent
//! - [`experiments`]: config-driven experiment runner behind the CLI

pub mod bessel;
pub mod curve;
pub mod error;
pub mod experiments;
pub mod fem;
pub mod flow;
pub mod numerics;
pub mod riemann;
pub mod shape;

pub use error::{Error, Result};
