//! Numerical laboratory for harmonic maps with potential.
//!
//! Maps from flat Euclidean domains into constant-curvature targets
//! (presented in a single conformal chart) are relaxed by gradient flow
//! toward solutions of tau(phi) = -grad V(phi), and a diagnostics layer
//! checks the energy identities, monotonicity formulas, gradient bounds,
//! and Liouville-type statements that the continuum theory predicts.

pub mod diagnostics;
pub mod error;
pub mod field;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod linalg;
pub mod potential;

pub mod flow;
pub mod geodesic;
pub use error::{LabError, Result};
