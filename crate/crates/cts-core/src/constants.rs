//! Numerical tolerance constants shared across the crate.
//!
//! Every tolerance used by library invariant checks and the test suites is
//! pinned here so the conventions live in one place.

/// Standardized window rows must have |mean| and |sd - 1| below this.
pub const STANDARDIZATION_TOL: f64 = 1e-12;

/// Per-slice SVD reconstruction and orthonormality tolerance.
pub const RECONSTRUCTION_TOL: f64 = 1e-9;

/// Combined two-stage expansion must reconstruct materialized slices to this.
pub const EXPANSION_TOL: f64 = 1e-8;

/// Singular values beyond the window rank bound must sit below this.
pub const RANK_TOL: f64 = 1e-9;

/// Correlation entries may exceed [-1, 1] by at most this.
pub const ENTRY_RANGE_TOL: f64 = 1e-9;
