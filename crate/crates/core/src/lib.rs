//! Critical surface quasi-geostrophic transport outside a moving rigid disk.
//!
//! The unknown is the active scalar in the frame attached to the disk. Each
//! time step rebuilds the velocity from the scalar through a regularized
//! exterior Biot–Savart operator plus the stream function of the rigid
//! motion, and transports the scalar along backward characteristics. The
//! a priori quantities (plateau radius, boundary log-Lipschitz semi-norm,
//! Osgood bound, H² blow-up integral) are tracked as run diagnostics.

pub mod checkpoint;
pub mod config;
pub mod diagnostics;
pub mod field;
pub mod fraclap;
pub mod green;
pub mod kernels;
pub mod motion;
pub mod scheme;
pub mod sum;
pub mod transport;

pub type Vec2 = nalgebra::Vector2<f64>;

/// Counter-clockwise quarter turn, `(x₁, x₂) ↦ (-x₂, x₁)`.
#[inline]
pub fn perp(v: Vec2) -> Vec2 {
    Vec2::new(-v.y, v.x)
}
