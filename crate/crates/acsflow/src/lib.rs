//! Energy-minimizing compatible almost complex structures on discretized
//! chart domains.
//!
//! The crate computes critical points of the Dirichlet-type energy
//! `E(J) = \int |\nabla J|^2 dv` over fields of almost complex structures
//! (`J^2 = -id`) compatible with a Riemannian metric, via an explicit
//! constrained heat flow with pointwise canonical reprojection, and evaluates
//! the analytic diagnostics attached to such fields: density profiles and
//! their monotonicity, homogeneity gaps, regularity scales, epsilon-regularity
//! scans, tubular volumes and the flat Bochner residual.
//!
//! Module map:
//! - [`matalg`]: pointwise matrix constructions (constraint checks, canonical
//!   compatible projection, Cayley chart, tangent projection, homotopy path).
//! - [`geometry`]: metric providers on chart domains (Euclidean,
//!   stereographic sphere chart, conformally flat) with Christoffel symbols.
//! - [`grid`] / [`field`]: uniform Cartesian grids and discrete tensor
//!   fields: covariant derivative, energies, rough Laplacian, residuals,
//!   dilation and cone constructions.
//! - [`flow`]: the constrained heat flow and a projected-gradient
//!   alternative.
//! - [`diagnostics`]: density, monotonicity, homogeneity, regularity scale,
//!   Bochner residual, the dim-4 sphere-map reduction and analytic fixtures.
//! - [`io`]: the `ACSFIELD v1` field-file format and CSV emission.
//! - [`config`]: flat `key=value` run configuration for the batch CLI.

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod field;
pub mod flow;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod matalg;

pub use error::{Error, Result};
