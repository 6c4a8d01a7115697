//! Prescribed rigid motion of the disk and the frame change it induces.
//!
//! A lab point `x` and its body-frame image `y` are related by
//! `x = R_θ y + h`. The rigid stream function in body coordinates is
//! `φ(y) = θ̇|y|²/2 − (R_θ y + h)·ḣ⊥`, and `ψ₂ = χ(|y| − ρ)·φ` localizes it
//! to a band of width `a` around the disk.

use crate::field::{interpolate, ScalarField};
use crate::green::ObstacleGeometry;
use crate::kernels::{cutoff_chi, cutoff_chi_derivative};
use crate::{perp, Vec2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MotionError {
    #[error("motion coefficients must be finite")]
    NonFinite,
    #[error("motion is evaluated for t >= 0 only, got {0}")]
    NegativeTime(f64),
}

/// One oscillatory term `s·sin(ωt) + c·cos(ωt)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub frequency: f64,
    #[serde(default)]
    pub sin: f64,
    #[serde(default)]
    pub cos: f64,
}

/// Scalar trajectory: polynomial of degree at most four plus oscillatory
/// modes, differentiated term by term.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    #[serde(default)]
    pub poly: [f64; 5],
    #[serde(default)]
    pub modes: Vec<Mode>,
}

impl Trajectory {
    pub fn constant_rate(rate: f64) -> Self {
        Self { poly: [0.0, rate, 0.0, 0.0, 0.0], modes: Vec::new() }
    }

    fn is_finite(&self) -> bool {
        self.poly.iter().all(|c| c.is_finite())
            && self.modes.iter().all(|m| m.frequency.is_finite() && m.sin.is_finite() && m.cos.is_finite())
    }

    pub fn value(&self, t: f64) -> f64 {
        let p = self.poly.iter().rev().fold(0.0, |acc, c| acc * t + c);
        p + self.modes.iter().map(|m| {
            let (s, c) = (m.frequency * t).sin_cos();
            m.sin * s + m.cos * c
        }).sum::<f64>()
    }

    pub fn rate(&self, t: f64) -> f64 {
        let p = (1..5).rev().fold(0.0, |acc, k| acc * t + k as f64 * self.poly[k]);
        p + self.modes.iter().map(|m| {
            let (s, c) = (m.frequency * t).sin_cos();
            m.frequency * (m.sin * c - m.cos * s)
        }).sum::<f64>()
    }

    /// True when the rate is the same at every time.
    pub fn has_constant_rate(&self) -> bool {
        self.poly[2..].iter().all(|&c| c == 0.0) && self.modes.iter().all(|m| m.sin == 0.0 && m.cos == 0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.poly.iter().all(|&c| c == 0.0) && self.modes.iter().all(|m| m.sin == 0.0 && m.cos == 0.0)
    }
}

/// Center trajectory `h(t)` and orientation `θ(t)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RigidMotionSpec {
    pub center_x: Trajectory,
    pub center_y: Trajectory,
    pub angle: Trajectory,
}

impl RigidMotionSpec {
    pub fn new(center_x: Trajectory, center_y: Trajectory, angle: Trajectory) -> Result<Self, MotionError> {
        let s = Self { center_x, center_y, angle };
        s.validate()?;
        Ok(s)
    }

    pub fn stationary() -> Self {
        Self::default()
    }

    /// Steady rotation about the origin.
    pub fn spin(rate: f64) -> Self {
        Self { angle: Trajectory::constant_rate(rate), ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), MotionError> {
        if [&self.center_x, &self.center_y, &self.angle].iter().all(|t| t.is_finite()) {
            Ok(())
        } else {
            Err(MotionError::NonFinite)
        }
    }

    /// Steady rotation about a fixed center at the origin.
    pub fn is_steady_spin(&self) -> bool {
        self.center_x.is_zero() && self.center_y.is_zero() && self.angle.has_constant_rate()
    }
}

/// Counter-clockwise rotation by an angle, stored as `(cos, sin)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    cos: f64,
    sin: f64,
}

impl Rotation {
    pub fn new(angle: f64) -> Self {
        let (sin, cos) = angle.sin_cos();
        Self { cos, sin }
    }
    #[inline]
    pub fn apply(&self, v: Vec2) -> Vec2 {
        Vec2::new(self.cos * v.x - self.sin * v.y, self.sin * v.x + self.cos * v.y)
    }
    #[inline]
    pub fn apply_inverse(&self, v: Vec2) -> Vec2 {
        Vec2::new(self.cos * v.x + self.sin * v.y, -self.sin * v.x + self.cos * v.y)
    }
    pub fn matrix(&self) -> [[f64; 2]; 2] {
        [[self.cos, -self.sin], [self.sin, self.cos]]
    }
}

/// Motion state at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameSnapshot {
    pub t: f64,
    pub h: Vec2,
    pub h_dot: Vec2,
    pub theta: f64,
    pub theta_dot: f64,
    pub rotation: Rotation,
}

impl FrameSnapshot {
    pub fn at_rest(t: f64) -> Self {
        Self { t, h: Vec2::zeros(), h_dot: Vec2::zeros(), theta: 0.0, theta_dot: 0.0, rotation: Rotation::new(0.0) }
    }
}

pub fn motion_eval(spec: &RigidMotionSpec, t: f64) -> Result<FrameSnapshot, MotionError> {
    if !(t >= 0.0) {
        return Err(MotionError::NegativeTime(t));
    }
    let theta = spec.angle.value(t);
    Ok(FrameSnapshot {
        t,
        h: Vec2::new(spec.center_x.value(t), spec.center_y.value(t)),
        h_dot: Vec2::new(spec.center_x.rate(t), spec.center_y.rate(t)),
        theta,
        theta_dot: spec.angle.rate(t),
        rotation: Rotation::new(theta),
    })
}

#[inline]
pub fn to_body(x_lab: Vec2, snap: &FrameSnapshot) -> Vec2 {
    snap.rotation.apply_inverse(x_lab - snap.h)
}

#[inline]
pub fn to_lab(y_body: Vec2, snap: &FrameSnapshot) -> Vec2 {
    snap.rotation.apply(y_body) + snap.h
}

/// Coefficients of `φ(y) = θ̇|y|²/2 − b·y − c₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidStream {
    pub spin: f64,
    pub drift: Vec2,
    pub offset: f64,
}

impl RigidStream {
    pub fn new(snap: &FrameSnapshot) -> Self {
        let hp = perp(snap.h_dot);
        Self { spin: snap.theta_dot, drift: snap.rotation.apply_inverse(hp), offset: snap.h.dot(&hp) }
    }
    #[inline]
    pub fn value(&self, y: Vec2) -> f64 {
        0.5 * self.spin * y.norm_squared() - self.drift.dot(&y) - self.offset
    }
    #[inline]
    pub fn gradient(&self, y: Vec2) -> Vec2 {
        y * self.spin - self.drift
    }
}

pub fn phi_eval(snap: &FrameSnapshot, y: Vec2) -> f64 {
    RigidStream::new(snap).value(y)
}

pub fn grad_phi(snap: &FrameSnapshot, y: Vec2) -> Vec2 {
    RigidStream::new(snap).gradient(y)
}

pub fn psi2_eval(snap: &FrameSnapshot, y: Vec2, geom: &ObstacleGeometry, cutoff_width: f64) -> f64 {
    cutoff_chi(geom.signed_distance(y), cutoff_width) * phi_eval(snap, y)
}

pub fn grad_psi2(snap: &FrameSnapshot, y: Vec2, geom: &ObstacleGeometry, cutoff_width: f64) -> Vec2 {
    let s = RigidStream::new(snap);
    let d = geom.signed_distance(y);
    let chi = cutoff_chi(d, cutoff_width);
    let dchi = cutoff_chi_derivative(d, cutoff_width);
    let r = y.norm();
    let radial = if r > 0.0 { y / r } else { Vec2::zeros() };
    s.gradient(y) * chi + radial * (dchi * s.value(y))
}

/// `∇⊥(ψ₂ − φ)`, written so that it vanishes to round-off on the disk.
pub fn corrective_velocity(stream: &RigidStream, y: Vec2, geom: &ObstacleGeometry, cutoff_width: f64) -> Vec2 {
    let d = geom.signed_distance(y);
    let one_minus_chi = 1.0 - cutoff_chi(d, cutoff_width);
    let dchi = cutoff_chi_derivative(d, cutoff_width);
    if one_minus_chi == 0.0 && dchi == 0.0 {
        return Vec2::zeros();
    }
    let r = y.norm();
    perp(y * (dchi * stream.value(y) / r) - stream.gradient(y) * one_minus_chi)
}

/// Body-frame field from a lab-frame field on the same polar layout:
/// `ω̃(y) = ω(R_θ y + h) − 2θ̇`.
pub fn omega_shift_to_body(lab: &ScalarField, snap: &FrameSnapshot) -> ScalarField {
    let shift = 2.0 * snap.theta_dot;
    let mut out = ScalarField::from_fn(*lab.grid(), snap.t, |y| interpolate(lab, to_lab(y, snap)) - shift);
    out.set_time(snap.t);
    out
}

/// Inverse of [`omega_shift_to_body`]: `ω(x) = ω̃(R_θᵀ(x − h)) + 2θ̇`.
pub fn omega_shift_to_lab(body: &ScalarField, snap: &FrameSnapshot) -> ScalarField {
    let shift = 2.0 * snap.theta_dot;
    let mut out = ScalarField::from_fn(*body.grid(), snap.t, |x| interpolate(body, to_body(x, snap)) + shift);
    out.set_time(snap.t);
    out
}

/// A single point sample `(x, ω(x))` moved into the body frame.
pub fn sample_to_body(x_lab: Vec2, value: f64, snap: &FrameSnapshot) -> (Vec2, f64) {
    (to_body(x_lab, snap), value - 2.0 * snap.theta_dot)
}

pub fn sample_to_lab(y_body: Vec2, value: f64, snap: &FrameSnapshot) -> (Vec2, f64) {
    (to_lab(y_body, snap), value + 2.0 * snap.theta_dot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn snapshots() {
        let s = motion_eval(&RigidMotionSpec::stationary(), 3.0).unwrap();
        assert_eq!(s.h, Vec2::zeros());
        assert_eq!(s.rotation.apply(Vec2::new(1.0, 2.0)), Vec2::new(1.0, 2.0));
        let spec = RigidMotionSpec { angle: Trajectory::constant_rate(1.0), ..Default::default() };
        let s = motion_eval(&spec, FRAC_PI_2).unwrap();
        let v = s.rotation.apply(Vec2::new(1.0, 0.0));
        assert!(v.x.abs() < 1e-15 && (v.y - 1.0).abs() < 1e-15);
        let spec = RigidMotionSpec { center_x: Trajectory::constant_rate(1.0), ..Default::default() };
        let s = motion_eval(&spec, 2.0).unwrap();
        assert_eq!(s.h, Vec2::new(2.0, 0.0));
        assert_eq!(s.h_dot, Vec2::new(1.0, 0.0));
        assert!(motion_eval(&spec, -1.0).is_err());
    }

    #[test]
    fn trajectory_rates_are_exact_derivatives() {
        let tr = Trajectory {
            poly: [0.3, -1.0, 0.5, 0.25, -0.125],
            modes: vec![Mode { frequency: 2.0, sin: 0.7, cos: -0.2 }],
        };
        let h = 1e-5;
        for t in [0.0, 0.4, 1.7] {
            let fd = (tr.value(t + h) - tr.value(t - h)) / (2.0 * h);
            assert!((fd - tr.rate(t)).abs() < 1e-8);
        }
    }

    #[test]
    fn frame_maps() {
        let spec = RigidMotionSpec {
            center_x: Trajectory { poly: [0.1, 0.2, 0.0, 0.0, 0.0], modes: vec![] },
            center_y: Trajectory { poly: [0.0; 5], modes: vec![Mode { frequency: 1.0, sin: 0.3, cos: 0.0 }] },
            angle: Trajectory::constant_rate(0.7),
        };
        let s = motion_eval(&spec, 1.3).unwrap();
        let x1 = Vec2::new(2.0, -1.0);
        let x2 = Vec2::new(-0.5, 3.0);
        assert!((to_lab(to_body(x1, &s), &s) - x1).norm() < 1e-12);
        assert!(((to_body(x1, &s) - to_body(x2, &s)).norm() - (x1 - x2).norm()).abs() < 1e-12);
    }

    #[test]
    fn rigid_stream_values() {
        let spec = RigidMotionSpec::spin(1.0);
        let s = motion_eval(&spec, 0.3).unwrap();
        assert!((phi_eval(&s, Vec2::new(2.0, 0.0)) - 2.0).abs() < 1e-15);
        let rest = FrameSnapshot::at_rest(0.0);
        assert_eq!(phi_eval(&rest, Vec2::new(1.0, 1.0)), 0.0);
        assert_eq!(grad_phi(&rest, Vec2::new(1.0, 1.0)), Vec2::zeros());
    }
}
