//! Whole-plane kernels of the half Laplacian in two dimensions, the
//! regularized kernel used by the scheme, and the smooth cutoff profiles.
//!
//! Orientation convention: `perp(x) = (-x.y, x.x)` is the counter-clockwise
//! quarter turn and `∇⊥ = (-∂₂, ∂₁)`. With it the Biot–Savart kernel is
//! `K(x) = ∇⊥G(x) = -c·perp(x)/|x|³`.

use crate::{perp, Vec2};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("kernel evaluated at the origin")]
    Singular,
    #[error("regularization radius must be positive and finite, got {0}")]
    BadDelta(f64),
    #[error("cutoff width must be positive and finite, got {0}")]
    BadCutoffWidth(f64),
    #[error("blend peak {0} outside [1.5, 2]; the quintic blend is then non-monotone or exceeds twice the edge value")]
    BadBlendPeak(f64),
}

/// Normalization of the half-Laplacian Green function in the plane.
///
/// `c_s = (1-s)Γ(1-s) / (2^{2s-1} π Γ(s))`; at `s = 1/2` both Gamma factors
/// equal `√π` and the power of two is 1.
pub fn constant_c() -> f64 {
    let s = 0.5_f64;
    let gamma_half = PI.sqrt();
    (1.0 - s) * gamma_half / (2f64.powf(2.0 * s - 1.0) * PI * gamma_half)
}

/// `G(x) = c/|x|`.
pub fn eval_g(x: Vec2) -> Result<f64, KernelError> {
    let r = x.norm();
    if r == 0.0 {
        return Err(KernelError::Singular);
    }
    Ok(constant_c() / r)
}

/// `K(x) = -c·perp(x)/|x|³`.
pub fn eval_k(x: Vec2) -> Result<Vec2, KernelError> {
    let r = x.norm();
    if r == 0.0 {
        return Err(KernelError::Singular);
    }
    Ok(perp(x) * (-constant_c() / (r * r * r)))
}

/// Inner profile used for `|x| < δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlendProfile {
    /// `q(s) = q0 + a3 s³ + a4 s⁴ + a5 s⁵`, matched to `1/s` up to the second
    /// derivative at `s = 1` and flat to second order at the origin.
    Quintic { peak: f64 },
}

impl Default for BlendProfile {
    fn default() -> Self {
        BlendProfile::Quintic { peak: 1.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct QuinticCoeffs {
    q0: f64,
    a3: f64,
    a4: f64,
    a5: f64,
}

impl QuinticCoeffs {
    fn new(q0: f64) -> Self {
        let d = 1.0 - q0;
        Self { q0, a3: 5.0 + 10.0 * d, a4: -9.0 - 15.0 * d, a5: 4.0 + 6.0 * d }
    }

    #[inline]
    fn value(&self, s: f64) -> f64 {
        self.q0 + s * s * s * (self.a3 + s * (self.a4 + s * self.a5))
    }

    /// `q'(s)/s`, smooth at the origin.
    #[inline]
    fn slope_over_s(&self, s: f64) -> f64 {
        s * (3.0 * self.a3 + s * (4.0 * self.a4 + s * 5.0 * self.a5))
    }
}

/// Regularization radius, cutoff width of `χ` and inner blend of `G_δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    delta: f64,
    cutoff_width: f64,
    blend: BlendProfile,
    coeffs: QuinticCoeffs,
}

impl KernelConfig {
    pub fn new(delta: f64, cutoff_width: f64, blend: BlendProfile) -> Result<Self, KernelError> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(KernelError::BadDelta(delta));
        }
        if !(cutoff_width.is_finite() && cutoff_width > 0.0) {
            return Err(KernelError::BadCutoffWidth(cutoff_width));
        }
        let BlendProfile::Quintic { peak } = blend;
        if !(1.5..=2.0).contains(&peak) {
            return Err(KernelError::BadBlendPeak(peak));
        }
        Ok(Self { delta, cutoff_width, blend, coeffs: QuinticCoeffs::new(peak) })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn cutoff_width(&self) -> f64 {
        self.cutoff_width
    }

    pub fn blend(&self) -> BlendProfile {
        self.blend
    }

    pub fn with_delta(&self, delta: f64) -> Result<Self, KernelError> {
        Self::new(delta, self.cutoff_width, self.blend)
    }

    /// Radial profile `G_δ(r)`.
    #[inline]
    pub fn g_delta_radial(&self, r: f64) -> f64 {
        let c = constant_c();
        if r >= self.delta {
            c / r
        } else {
            c / self.delta * self.coeffs.value(r / self.delta)
        }
    }

    /// `G_δ'(r)/r`, finite at `r = 0`.
    #[inline]
    pub fn g_delta_slope_over_r(&self, r: f64) -> f64 {
        let c = constant_c();
        if r >= self.delta {
            -c / (r * r * r)
        } else {
            c / (self.delta * self.delta * self.delta) * self.coeffs.slope_over_s(r / self.delta)
        }
    }
}

/// `G_δ(x)`; defined everywhere, equal to `G` for `|x| ≥ δ`.
pub fn eval_g_delta(x: Vec2, cfg: &KernelConfig) -> f64 {
    cfg.g_delta_radial(x.norm())
}

/// `∇G_δ(x)`.
pub fn eval_grad_g_delta(x: Vec2, cfg: &KernelConfig) -> Vec2 {
    x * cfg.g_delta_slope_over_r(x.norm())
}

/// Quintic smoothstep `10t³ - 15t⁴ + 6t⁵` clamped to `[0, 1]`.
#[inline]
pub fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
    }
}

#[inline]
pub fn smoothstep_derivative(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        let u = t * (1.0 - t);
        30.0 * u * u
    }
}

/// `χ`: 1 on `(-∞, 0]`, 0 on `[width, ∞)`.
#[inline]
pub fn cutoff_chi(r: f64, width: f64) -> f64 {
    1.0 - smoothstep(r / width)
}

#[inline]
pub fn cutoff_chi_derivative(r: f64, width: f64) -> f64 {
    -smoothstep_derivative(r / width) / width
}

/// `χ_δ`: 1 on `[0, δ]`, 0 on `[2δ, ∞)`.
#[inline]
pub fn cutoff_chi_delta(r: f64, delta: f64) -> f64 {
    1.0 - smoothstep((r - delta) / delta)
}

#[inline]
pub fn cutoff_chi_delta_derivative(r: f64, delta: f64) -> f64 {
    -smoothstep_derivative((r - delta) / delta) / delta
}

/// Outcome of the start-up check of the four properties of `G_δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlendReport {
    pub non_increasing: bool,
    pub matches_outside: bool,
    pub peak_ratio: f64,
    /// `max|∇G_δ|·δ²`. Matching `c/r` to second order at `r = δ` forces
    /// this slightly above `c` (about `1.094·c` for peak 1.5); the check
    /// accepts any constant up to `2c`.
    pub gradient_constant: f64,
}

impl BlendReport {
    pub fn passes(&self) -> bool {
        self.non_increasing
            && self.matches_outside
            && self.peak_ratio <= 2.0
            && self.gradient_constant <= 2.0 * constant_c()
    }
}

/// Samples `G_δ` densely on `[0, 4δ]` and reports the four properties.
pub fn check_blend(cfg: &KernelConfig, samples: usize) -> BlendReport {
    let d = cfg.delta;
    let n = samples.max(16);
    let mut non_increasing = true;
    let mut matches_outside = true;
    let mut max_grad = 0.0_f64;
    let mut prev = f64::INFINITY;
    for i in 0..=n {
        let r = 4.0 * d * i as f64 / n as f64;
        let g = cfg.g_delta_radial(r);
        if g > prev {
            non_increasing = false;
        }
        prev = g;
        if r >= d && g != constant_c() / r {
            matches_outside = false;
        }
        max_grad = max_grad.max((cfg.g_delta_slope_over_r(r) * r).abs());
    }
    BlendReport {
        non_increasing,
        matches_outside,
        peak_ratio: cfg.g_delta_radial(0.0) / cfg.g_delta_radial(d),
        gradient_constant: max_grad * d * d,
    }
}
