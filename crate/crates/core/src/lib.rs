//! Numerical laboratory for the boundary dynamics of unbounded Fatou
//! components of transcendental entire maps.
//!
//! Hyperbolic densities use the curvature −1 normalization
//! `ρ_𝔻(z) = 2/(1 − |z|²)` throughout.

// `!(x < t)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Oracle constants keep every digit they were computed with.
#![allow(clippy::excessive_precision)]
#![allow(clippy::needless_range_loop)]

pub mod boundary;
pub mod branches;
pub mod catalog;
pub mod harmonic;
pub mod hyperbolic;
pub mod inner;
pub mod lambert;
pub mod orbit;
pub mod raster;

pub use catalog::{EntireMap, MapDescriptor};
pub use num_complex::Complex64;
pub use orbit::{OrbitParams, OrbitVerdict, VerdictKind, Window};
