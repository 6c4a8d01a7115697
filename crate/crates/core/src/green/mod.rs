//! Green function of the half Laplacian outside a disk, and the regularized
//! exterior operators built from it.
//!
//! For the disk of radius `ρ` centered at the origin, a Kelvin inversion of
//! the Riesz formula for the ball gives, with `d = |x − y|`,
//! `P = |x|² − ρ²`, `Q = |y|² − ρ²`:
//!
//! ```text
//! G_F(x, y) = atan(√(PQ) / (ρ d)) / (π² d)
//! H_F(x, y) = G(x − y) − G_F(x, y) = atan(d / A) / (π² d),   A = √(PQ) / ρ
//! ```
//!
//! The second form of `H_F` is regular on the diagonal (`1/(π² A)` at
//! `x = y`), which is what the quadrature needs.

mod operator;
pub mod oracle;

pub use operator::{
    apply_g_f_delta, apply_k_f_delta, BiotSavartOperator, OperatorError, PointQuadrature,
    Prefactor,
};

use crate::kernels::constant_c;
use crate::Vec2;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GreenError {
    #[error("obstacle radius must be positive and finite, got {0}")]
    BadRadius(f64),
    #[error("first argument must lie outside the obstacle (|x| = {norm}, radius = {radius})")]
    InsideObstacle { norm: f64, radius: f64 },
    #[error("Green function is singular on the diagonal")]
    Diagonal,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ObstacleGeometry {
    radius: f64,
}

impl ObstacleGeometry {
    pub fn new(radius: f64) -> Result<Self, GreenError> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(GreenError::BadRadius(radius));
        }
        Ok(Self { radius })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Distance to the disk, `|y| − ρ` (negative inside).
    #[inline]
    pub fn signed_distance(&self, y: Vec2) -> f64 {
        y.norm() - self.radius
    }

    /// Closest boundary point of a point outside the origin.
    #[inline]
    pub fn project(&self, y: Vec2) -> Vec2 {
        y * (self.radius / y.norm())
    }

    /// `|y|² − ρ²`, snapped to zero within a few ulps of the circle so that
    /// points constructed on the boundary count as boundary points.
    #[inline]
    fn excess(&self, y: Vec2) -> f64 {
        let r2 = self.radius * self.radius;
        let q = y.norm_squared() - r2;
        if q <= 8.0 * f64::EPSILON * r2 {
            0.0
        } else {
            q
        }
    }
}

/// `G_F = G − H_F` at one pair, with both parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenEvaluation {
    pub value: f64,
    pub whole_plane_part: f64,
    pub regular_part: f64,
}

/// `atan(d/A)/d`, continuous at `d = 0`.
#[inline]
fn atan_ratio(d: f64, a: f64) -> f64 {
    let z = d / a;
    if z < 0.05 {
        let z2 = z * z;
        (1.0 - z2 * (1.0 / 3.0 - z2 * (1.0 / 5.0 - z2 * (1.0 / 7.0 - z2 / 9.0)))) / a
    } else {
        z.atan() / d
    }
}

/// `(∂/∂d)(atan(d/A)/d) / d`, continuous at `d = 0`.
#[inline]
fn atan_ratio_slope_over_d(d: f64, a: f64) -> f64 {
    let z = d / a;
    if z < 0.05 {
        let z2 = z * z;
        let s = -2.0 / 3.0
            + z2 * (4.0 / 5.0 - z2 * (6.0 / 7.0 - z2 * (8.0 / 9.0 - z2 * 10.0 / 11.0)));
        s / (a * a * a)
    } else {
        let d2 = d * d;
        a / (d2 * (a * a + d2)) - z.atan() / (d2 * d)
    }
}

/// Regular part without argument checks. `x` must be outside the disk.
#[inline]
pub(crate) fn regular_part_unchecked(x: Vec2, y: Vec2, geom: &ObstacleGeometry) -> f64 {
    let q = geom.excess(y);
    let d = (x - y).norm();
    if q == 0.0 || y.norm_squared() < geom.radius * geom.radius {
        return constant_c() / d;
    }
    let p = geom.excess(x);
    let a = (p * q).sqrt() / geom.radius;
    atan_ratio(d, a) / (PI * PI)
}

/// `∇ₓH_F(x, y)` without argument checks. `x` must be strictly outside.
#[inline]
pub(crate) fn regular_part_grad_x_unchecked(x: Vec2, y: Vec2, geom: &ObstacleGeometry) -> Vec2 {
    let q = geom.excess(y);
    let diff = x - y;
    let d = diff.norm();
    if q == 0.0 || y.norm_squared() < geom.radius * geom.radius {
        return diff * (-constant_c() / (d * d * d));
    }
    let p = geom.excess(x);
    let a = (p * q).sqrt() / geom.radius;
    let g = atan_ratio_slope_over_d(d, a);
    let da = -1.0 / (a * a + d * d);
    (diff * g + x * (da * a / p)) / (PI * PI)
}

fn check_pair(x: Vec2, y: Vec2, geom: &ObstacleGeometry) -> Result<(), GreenError> {
    if geom.excess(x) <= 0.0 {
        return Err(GreenError::InsideObstacle { norm: x.norm(), radius: geom.radius });
    }
    if x == y {
        return Err(GreenError::Diagonal);
    }
    Ok(())
}

/// `G_F(x, y)` with its decomposition; zero when `y` is in the closed disk.
pub fn eval_g_exterior(x: Vec2, y: Vec2, geom: &ObstacleGeometry) -> Result<GreenEvaluation, GreenError> {
    check_pair(x, y, geom)?;
    let d = (x - y).norm();
    let whole = constant_c() / d;
    let q = geom.excess(y);
    if q == 0.0 || y.norm_squared() < geom.radius * geom.radius {
        return Ok(GreenEvaluation { value: 0.0, whole_plane_part: whole, regular_part: whole });
    }
    let regular = regular_part_unchecked(x, y, geom);
    let p = geom.excess(x);
    let value = ((p * q).sqrt() / (geom.radius * d)).atan() / (PI * PI * d);
    Ok(GreenEvaluation { value, whole_plane_part: whole, regular_part: regular })
}

/// `H_F(x, y)`; regular on the diagonal, so `x = y` is accepted.
pub fn eval_h(x: Vec2, y: Vec2, geom: &ObstacleGeometry) -> Result<f64, GreenError> {
    if geom.excess(x) <= 0.0 {
        return Err(GreenError::InsideObstacle { norm: x.norm(), radius: geom.radius });
    }
    if x == y && geom.excess(y) == 0.0 {
        return Err(GreenError::Diagonal);
    }
    Ok(regular_part_unchecked(x, y, geom))
}

/// `∇ₓH_F(x, y)`.
pub fn eval_grad_h(x: Vec2, y: Vec2, geom: &ObstacleGeometry) -> Result<Vec2, GreenError> {
    eval_h(x, y, geom)?;
    Ok(regular_part_grad_x_unchecked(x, y, geom))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom() -> ObstacleGeometry {
        ObstacleGeometry::new(1.0).unwrap()
    }

    #[test]
    fn decomposition_and_boundary() {
        let g = geom();
        let x = Vec2::new(1.7, 0.4);
        let y = Vec2::new(-0.3, 2.2);
        let e = eval_g_exterior(x, y, &g).unwrap();
        assert!((e.value - (e.whole_plane_part - e.regular_part)).abs() < 1e-15);
        assert!(e.value > 0.0 && e.regular_part > 0.0);
        for k in 0..64 {
            let a = k as f64 * 0.1;
            let yb = Vec2::new(a.cos(), a.sin());
            let e = eval_g_exterior(x, yb, &g).unwrap();
            assert!(e.value.abs() <= 1e-10 * e.whole_plane_part);
        }
    }

    #[test]
    fn symmetric() {
        let g = geom();
        let x = Vec2::new(1.3, -0.2);
        let y = Vec2::new(0.5, 1.9);
        let a = eval_g_exterior(x, y, &g).unwrap().value;
        let b = eval_g_exterior(y, x, &g).unwrap().value;
        assert!((a - b).abs() < 1e-15 * a);
    }

    #[test]
    fn regular_on_diagonal() {
        let g = geom();
        let x = Vec2::new(1.5, 0.5);
        let h0 = eval_h(x, x, &g).unwrap();
        let h1 = eval_h(x, x + Vec2::new(1e-7, 0.0), &g).unwrap();
        assert!((h0 - h1).abs() < 1e-6 * h0);
    }

    #[test]
    fn gradient_matches_differences() {
        let g = geom();
        let y = Vec2::new(0.4, -1.6);
        for x in [Vec2::new(1.2, 0.3), Vec2::new(-2.0, 1.5), Vec2::new(0.45, -1.62)] {
            let h = 1e-6;
            let fd = Vec2::new(
                (eval_h(x + Vec2::new(h, 0.0), y, &g).unwrap() - eval_h(x - Vec2::new(h, 0.0), y, &g).unwrap())
                    / (2.0 * h),
                (eval_h(x + Vec2::new(0.0, h), y, &g).unwrap() - eval_h(x - Vec2::new(0.0, h), y, &g).unwrap())
                    / (2.0 * h),
            );
            let an = eval_grad_h(x, y, &g).unwrap();
            assert!((fd - an).norm() < 1e-6 * an.norm().max(1.0), "{fd:?} vs {an:?}");
        }
    }

    #[test]
    fn domain_errors() {
        let g = geom();
        assert!(matches!(
            eval_g_exterior(Vec2::new(0.5, 0.0), Vec2::new(2.0, 0.0), &g),
            Err(GreenError::InsideObstacle { .. })
        ));
        let x = Vec2::new(2.0, 0.0);
        assert_eq!(eval_g_exterior(x, x, &g), Err(GreenError::Diagonal));
    }
}
