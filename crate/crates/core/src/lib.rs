//! Heat content of compact domains on flat tori and the real line.
//!
//! Three independent routes compute `Ω_{S,f}(t) = ∫_S e^{tΔ}(f 1_S)`:
//! direct spectral propagation on a periodic grid, wave transmutation
//! (quadrature of the wave-deficit function against `k̂`), and exact
//! one-dimensional formulas. The short-time coefficients `β_0 … β_3` are
//! computed from boundary geometry and compared against fits of the curves.

// Negated float comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod error;
pub mod geometry;
pub mod heat_content;
pub mod kernel;
pub mod propagator;
pub mod quadrature;
pub mod special;
pub mod spline;
pub mod weight;

pub use error::{Error, Result};
