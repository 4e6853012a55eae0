//! Single-image localization of street-facing cameras.
//!
//! The crate recovers a camera's intrinsics and 6-DOF pose relative to an
//! annotated car from three orthogonal vanishing points plus one known car
//! dimension, lifts the relative position to latitude/longitude candidates
//! using pixel-to-GPS references or coarse map context, and exposes the
//! calibrated camera as a set of virtual sensors (ground length, building
//! height, vehicle speed).
//!
//! Everything here is pure computation over immutable values and builds
//! without `std`; file formats, the CLI and the HTTP service live in the
//! `camloc` crate.
//!
//! Coordinate conventions:
//!
//! - pixel: origin at the top-left image corner, `u` rightward, `v` downward;
//! - camera: `z` along the optical axis;
//! - world: origin at the annotated nearest bottom car corner, `x` along the
//!   car length, `z` up along the car height, right-handed.

#![no_std]
#![deny(rust_2018_idioms, unsafe_code)]
// `!(x > t)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod annotation;
pub mod context;
pub mod error;
pub mod extrinsics;
pub mod geodesy;
pub mod geometry;
pub mod math;
pub mod pipeline;
pub mod sensors;
pub mod stats;
pub mod synth;
pub mod vanishing;

pub use error::{Error, Result};
/// Re-exported because matrices appear in the public API.
pub use nalgebra;

/// Numeric tolerances shared by every estimator.
pub mod tol {
    /// Generic geometric tolerance (meters, pixels or unitless).
    pub const GEOMETRIC: f64 = 1e-9;
    /// Frobenius tolerance for `R·Rᵀ = I` and `det R = 1`.
    pub const SO3: f64 = 1e-9;
    /// Singular values below this are treated as zero.
    pub const SINGULAR: f64 = 1e-12;
    /// A unit homogeneous vanishing point with `|h₃|` below this is at infinity.
    pub const VP_FINITE: f64 = 1e-6;
}
