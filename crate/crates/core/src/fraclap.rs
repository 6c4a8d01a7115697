//! Half Laplacian of the localized rigid stream function `ψ₂`.
//!
//! `Λu(x) = C ∫ (u(x) − u(y)) |x − y|⁻³ dy` with `C = 1/(2π)`. Writing
//! `y = x ± s·e(α)` folds the principal value into
//!
//! ```text
//! Λu(x) = C ∫₀^π ∫₀^∞ (2u(x) − u(x + s e) − u(x − s e)) / s² ds dα,
//! ```
//!
//! whose integrand is bounded at `s = 0`. For `u` supported in the disk of
//! radius `ρ + a` both shifted values vanish once `s > |x| + ρ + a`, and the
//! remaining tail `2u(x)/S` is exact.
//!
//! `ψ₂ = χ(|y| − ρ)(θ̇|y|²/2 − b·y − c₀)` is a combination of three fixed
//! profiles, so `Λψ₂` at a node `(r, θ)` is
//! `θ̇·L₂(r) − (b₁ cos θ + b₂ sin θ)·L₁(r) − c₀·L₀(r)`, with the radial
//! profiles computed once per ring.

use crate::field::{GridSpec, ScalarField};
use crate::green::ObstacleGeometry;
use crate::kernels::cutoff_chi;
use crate::motion::{FrameSnapshot, RigidStream};
use crate::Vec2;
use gauss_quad::legendre::GaussLegendre;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Angular and radial resolution of the singular quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularQuadrature {
    pub directions: usize,
    pub panel_width: f64,
    pub points_per_panel: usize,
}

impl Default for SingularQuadrature {
    fn default() -> Self {
        Self { directions: 64, panel_width: 1.0 / 32.0, points_per_panel: 6 }
    }
}

/// `Λu(x)` for a vector of functions supported in `|y| ≤ support_radius`.
pub fn half_laplacian_at<const N: usize, F>(u: F, x: Vec2, support_radius: f64, q: &SingularQuadrature) -> [f64; N]
where
    F: Fn(Vec2) -> [f64; N],
{
    let rule = GaussLegendre::new(q.points_per_panel).expect("rule degree >= 2");
    let rule = rule.as_node_weight_pairs();
    let s_max = x.norm() + support_radius;
    let panels = (s_max / q.panel_width).ceil().max(1.0) as usize;
    let width = s_max / panels as f64;
    let ux = u(x);
    let mut total = [0.0; N];
    for a in 0..q.directions {
        let alpha = (a as f64 + 0.5) * PI / q.directions as f64;
        let e = Vec2::new(alpha.cos(), alpha.sin());
        let mut line = [0.0; N];
        for p in 0..panels {
            let s0 = p as f64 * width;
            for &(node, w) in rule {
                let s = s0 + 0.5 * (node + 1.0) * width;
                let wp = u(x + e * s);
                let wm = u(x - e * s);
                let scale = 0.5 * w * width / (s * s);
                for c in 0..N {
                    line[c] += (2.0 * ux[c] - wp[c] - wm[c]) * scale;
                }
            }
        }
        for c in 0..N {
            total[c] += line[c] + 2.0 * ux[c] / s_max;
        }
    }
    let factor = (PI / q.directions as f64) / (2.0 * PI);
    total.map(|v| v * factor)
}

/// Profiles `χ`, `χ·y₁`, `χ·|y|²/2` with `χ = χ(|y| − ρ)`.
fn basis(y: Vec2, radius: f64, width: f64) -> [f64; 3] {
    let chi = cutoff_chi(y.norm() - radius, width);
    [chi, chi * y.x, 0.5 * chi * y.norm_squared()]
}

fn radial_profiles(r: f64, geom: &ObstacleGeometry, cutoff_width: f64, q: &SingularQuadrature) -> [f64; 3] {
    let rho = geom.radius();
    half_laplacian_at(|y| basis(y, rho, cutoff_width), Vec2::new(r, 0.0), rho + cutoff_width, q)
}

/// Precomputed radial profiles of `Λψ₂` on a grid.
#[derive(Debug, Clone)]
pub struct LambdaPsi2Basis {
    grid: GridSpec,
    /// Per ring: `[L₀, L₁, L₂]`.
    profiles: Vec<[f64; 3]>,
    trig: Vec<(f64, f64)>,
}

impl LambdaPsi2Basis {
    pub fn new(grid: GridSpec, geom: &ObstacleGeometry, cutoff_width: f64) -> Self {
        Self::with_quadrature(grid, geom, cutoff_width, &SingularQuadrature::default())
    }

    pub fn with_quadrature(grid: GridSpec, geom: &ObstacleGeometry, cutoff_width: f64, q: &SingularQuadrature) -> Self {
        if grid.dr() > cutoff_width / 8.0 {
            log::warn!(
                "radial spacing {:.4} does not resolve the cutoff band of width {cutoff_width}",
                grid.dr()
            );
        }
        let profiles = (0..grid.n_r())
            .into_par_iter()
            .map(|i| radial_profiles(grid.radius(i), geom, cutoff_width, q))
            .collect();
        let trig = (0..grid.n_theta()).map(|k| grid.angle(k).sin_cos()).collect();
        Self { grid, profiles, trig }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// `Λψ₂` on the grid for the motion state `snap`.
    pub fn field(&self, snap: &FrameSnapshot) -> ScalarField {
        let s = RigidStream::new(snap);
        let nt = self.grid.n_theta();
        let mut values = vec![0.0; self.grid.len()];
        values.par_chunks_mut(nt).enumerate().for_each(|(i, row)| {
            let [l0, l1, l2] = self.profiles[i];
            for (k, v) in row.iter_mut().enumerate() {
                let (sn, cs) = self.trig[k];
                *v = s.spin * l2 - (s.drift.x * cs + s.drift.y * sn) * l1 - s.offset * l0;
            }
        });
        ScalarField::new(self.grid, values, snap.t).expect("finite profiles")
    }
}

/// `Λψ₂` on the grid.
pub fn lambda_psi2(snap: &FrameSnapshot, grid: &GridSpec, geom: &ObstacleGeometry, cutoff_width: f64) -> ScalarField {
    LambdaPsi2Basis::new(*grid, geom, cutoff_width).field(snap)
}

/// `Λψ₂` at a single point.
pub fn lambda_psi2_at(snap: &FrameSnapshot, p: Vec2, geom: &ObstacleGeometry, cutoff_width: f64) -> f64 {
    let s = RigidStream::new(snap);
    let r = p.norm();
    let [l0, l1, l2] = radial_profiles(r, geom, cutoff_width, &SingularQuadrature::default());
    let (c, sn) = if r > 0.0 { (p.x / r, p.y / r) } else { (1.0, 0.0) };
    s.spin * l2 - (s.drift.x * c + s.drift.y * sn) * l1 - s.offset * l0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_has_known_half_laplacian_at_center() {
        // For u = exp(−|y|²), Λu(0) = ∫ |ξ| û dξ/(2π)² = Γ(3/2)·2 = √π.
        let q = SingularQuadrature { directions: 16, panel_width: 0.05, points_per_panel: 8 };
        let [v] = half_laplacian_at(|y| [(-y.norm_squared()).exp()], Vec2::zeros(), 7.0, &q);
        assert!((v - PI.sqrt()).abs() < 1e-6, "{v}");
    }

    #[test]
    fn zero_motion_gives_zero() {
        let grid = GridSpec::new(1.0, 3.0, 16, 32).unwrap();
        let geom = ObstacleGeometry::new(1.0).unwrap();
        let f = lambda_psi2(&FrameSnapshot::at_rest(0.0), &grid, &geom, 0.5);
        assert!(f.values().iter().all(|&v| v == 0.0));
    }
}
