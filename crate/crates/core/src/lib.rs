//! Best approximation of gradients by continuous piecewise polynomials on
//! two-dimensional newest-vertex bisection meshes.
//!
//! The crate compares the global best `H¹`-seminorm error of Lagrange finite
//! element spaces with the collection of elementwise best errors, builds the
//! quasi-interpolant that realizes the upper bound, and drives adaptive tree
//! approximation with the local errors as subadditive indicators.
//!
//! Module map:
//!
//! - [`mesh`]: bisection forest, completion, stars, shape metrics, text format
//! - [`quadrature`]: symmetric triangle rules, Gauss edge rules, graded rules
//! - [`polynomial`]: Lagrange bases, dual face bases, Scott–Zhang functionals
//! - [`local_approx`]: elementwise best fits, decoupled errors, constants
//! - [`global_approx`]: Lagrange spaces, Ritz projection, quasi-interpolation
//! - [`tree`]: threshold and budget tree algorithms, the `σ′` oracle
//! - [`registry`] and [`experiments`]: target functions and experiment recipes

pub mod experiments;
pub mod global_approx;
pub mod local_approx;
pub mod mesh;
pub mod polynomial;
pub mod quadrature;
pub mod registry;
pub mod sparse;
pub mod tree;

pub use global_approx::{BoundaryCondition, FeSpace, RitzResult};
pub use local_approx::{LocalBestFit, TargetFunction};
pub use mesh::{Mesh, Point};
