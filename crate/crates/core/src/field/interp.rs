//! Bicubic interpolation in `(r, θ)`.
//!
//! Catmull–Rom weights in the interior, periodic in `θ`. Within two rings of
//! either radial end the radial weights switch to the cubic Lagrange
//! polynomial through the four nearest rings, which still reproduces nodal
//! values and cubics. Points beyond `r_max` read as zero.

use super::{GridSpec, ScalarField};
use crate::Vec2;

/// Interpolation weights for one evaluation point, reusable across several
/// value arrays on the same grid.
#[derive(Debug, Clone, Copy)]
pub struct Stencil {
    rings: [usize; 4],
    ring_w: [f64; 4],
    angles: [usize; 4],
    angle_w: [f64; 4],
    /// Rings of the enclosing cell, used by the limiter.
    cell_rings: [usize; 2],
    outside: bool,
}

#[inline]
fn catmull_rom(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

#[inline]
fn lagrange4(x: f64) -> [f64; 4] {
    [
        -(x - 1.0) * (x - 2.0) * (x - 3.0) / 6.0,
        x * (x - 2.0) * (x - 3.0) / 2.0,
        -x * (x - 1.0) * (x - 3.0) / 2.0,
        x * (x - 1.0) * (x - 2.0) / 6.0,
    ]
}

impl Stencil {
    pub fn new(grid: &GridSpec, p: Vec2) -> Self {
        let r = p.norm();
        let n_r = grid.n_r();
        let n_t = grid.n_theta();
        let outside = r > grid.r_max();

        let s = ((r - grid.r_min()) / grid.dr() - 0.5).max(-0.5);
        let fl = s.floor();
        let i0 = fl as isize;
        let (rings, ring_w) = if i0 >= 1 && (i0 as usize) + 2 < n_r {
            let i0 = i0 as usize;
            ([i0 - 1, i0, i0 + 1, i0 + 2], catmull_rom(s - fl))
        } else {
            let j0 = (i0 - 1).clamp(0, n_r as isize - 4) as usize;
            ([j0, j0 + 1, j0 + 2, j0 + 3], lagrange4(s - j0 as f64))
        };
        let lo = i0.clamp(0, n_r as isize - 1) as usize;
        let hi = (i0 + 1).clamp(0, n_r as isize - 1) as usize;

        let mut u = p.y.atan2(p.x) / grid.dtheta();
        if u < 0.0 {
            u += n_t as f64;
        }
        let ku = u.floor();
        let k0 = (ku as usize) % n_t;
        let angle_w = catmull_rom(u - ku);
        let angles = [(k0 + n_t - 1) % n_t, k0, (k0 + 1) % n_t, (k0 + 2) % n_t];

        Self { rings, ring_w, angles, angle_w, cell_rings: [lo, hi], outside }
    }

    #[inline]
    pub fn is_outside(&self) -> bool {
        self.outside
    }

    /// Interpolated value of `values` (radial-major layout on `n_theta` columns).
    #[inline]
    pub fn apply(&self, values: &[f64], n_theta: usize) -> f64 {
        if self.outside {
            return 0.0;
        }
        let mut acc = 0.0;
        for a in 0..4 {
            let row = self.rings[a] * n_theta;
            let mut ring = 0.0;
            for b in 0..4 {
                ring += self.angle_w[b] * values[row + self.angles[b]];
            }
            acc += self.ring_w[a] * ring;
        }
        acc
    }

    /// Like [`Stencil::apply`] but clipped to the range of the four corners
    /// of the enclosing cell.
    #[inline]
    pub fn apply_limited(&self, values: &[f64], n_theta: usize) -> f64 {
        if self.outside {
            return 0.0;
        }
        let v = self.apply(values, n_theta);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &i in &self.cell_rings {
            for &k in &self.angles[1..3] {
                let c = values[i * n_theta + k];
                lo = lo.min(c);
                hi = hi.max(c);
            }
        }
        v.clamp(lo, hi)
    }
}

/// Bicubic interpolation of `field` at `p`; zero for `|p| > r_max`.
pub fn interpolate(field: &ScalarField, p: Vec2) -> f64 {
    let g = field.grid();
    Stencil::new(g, p).apply(field.values(), g.n_theta())
}

/// Interpolation clipped to the enclosing cell's nodal range (discrete
/// maximum principle).
pub fn interpolate_limited(field: &ScalarField, p: Vec2) -> f64 {
    let g = field.grid();
    Stencil::new(g, p).apply_limited(field.values(), g.n_theta())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridSpec {
        GridSpec::new(1.0, 4.0, 24, 48).unwrap()
    }

    #[test]
    fn constants_and_nodes() {
        let g = grid();
        let f = ScalarField::constant(g, 2.5, 0.0);
        for p in [Vec2::new(1.0, 0.0), Vec2::new(-2.3, 1.1), Vec2::new(0.0, -3.99)] {
            assert!((interpolate(&f, p) - 2.5).abs() < 1e-13);
        }
        let f = ScalarField::from_fn(g, 0.0, |p| p.x * p.x - 0.3 * p.y + (p.x * p.y).sin());
        for i in [0, 1, 5, 22, 23] {
            for k in [0, 7, 47] {
                assert!((interpolate(&f, g.node(i, k)) - f.at(i, k)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_beyond_outer_radius() {
        let f = ScalarField::constant(grid(), 1.0, 0.0);
        assert_eq!(interpolate(&f, Vec2::new(4.01, 0.0)), 0.0);
    }

    #[test]
    fn limiter_respects_cell_range() {
        let g = grid();
        let f = ScalarField::from_fn(g, 0.0, |p| if p.norm() > 2.0 { 1.0 } else { 0.0 });
        for j in 0..400 {
            let r = 1.0 + 3.0 * j as f64 / 400.0;
            let v = interpolate_limited(&f, Vec2::new(r * 0.3f64.cos(), r * 0.3f64.sin()));
            assert!((0.0..=1.0).contains(&v));
        }
    }
}
