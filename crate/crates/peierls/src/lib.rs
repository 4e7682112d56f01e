//! Numerical toolkit for the Su–Schrieffer–Heeger (SSH) model of polyacetylene:
//! hopping-amplitude configurations, Peierls energy, spectral projectors
//! (by eigendecomposition and by Cauchy contour quadrature), self-consistent
//! solvers for dimerized and kink critical points, and the spectral / decay /
//! coercivity diagnostics that characterize them.

pub mod analysis;
pub mod contour;
pub mod energy;
pub mod error;
pub mod lattice;
mod linalg;
pub mod solvers;
pub mod spectral;

pub use error::Error;

/// Convenience result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
