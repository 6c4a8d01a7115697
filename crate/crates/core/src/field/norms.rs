//! Quadrature norms, discrete derivatives and level-set areas.

use super::{interpolate, GridError, GridSpec, ScalarField};
use crate::Vec2;
use crate::sum::pairwise_sum_by;
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LpExponent {
    Finite(f64),
    Infinity,
}

/// Quadrature `L^p` norm with weights `r Δr Δθ`; `max|v|` for `p = ∞`.
pub fn lp_norm(field: &ScalarField, p: LpExponent) -> f64 {
    let g = field.grid();
    let v = field.values();
    let nt = g.n_theta();
    match p {
        LpExponent::Infinity => field.max_abs(),
        LpExponent::Finite(p) => {
            assert!(p >= 1.0, "L^p norm needs p >= 1");
            let s = pairwise_sum_by(v.len(), |idx| {
                let w = g.weight(idx / nt);
                if p == 1.0 {
                    w * v[idx].abs()
                } else if p == 2.0 {
                    w * v[idx] * v[idx]
                } else {
                    w * v[idx].abs().powf(p)
                }
            });
            if p == 1.0 {
                s
            } else if p == 2.0 {
                s.sqrt()
            } else {
                s.powf(1.0 / p)
            }
        }
    }
}

fn d_dr(g: &GridSpec, v: &[f64], out: &mut [f64]) {
    let nt = g.n_theta();
    let nr = g.n_r();
    let h = g.dr();
    out.par_chunks_mut(nt).enumerate().for_each(|(i, row)| {
        for (k, o) in row.iter_mut().enumerate() {
            let at = |j: usize| v[j * nt + k];
            *o = if i == 0 {
                (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
            } else if i == nr - 1 {
                (3.0 * at(i) - 4.0 * at(i - 1) + at(i - 2)) / (2.0 * h)
            } else {
                (at(i + 1) - at(i - 1)) / (2.0 * h)
            };
        }
    });
}

fn d_dtheta(g: &GridSpec, v: &[f64], out: &mut [f64]) {
    let nt = g.n_theta();
    let h = g.dtheta();
    out.par_chunks_mut(nt).enumerate().for_each(|(i, row)| {
        let base = i * nt;
        for (k, o) in row.iter_mut().enumerate() {
            let kp = (k + 1) % nt;
            let km = (k + nt - 1) % nt;
            *o = (v[base + kp] - v[base + km]) / (2.0 * h);
        }
    });
}

/// Cartesian gradient `(∂ₓ, ∂ᵧ)` from centered polar differences (one-sided
/// second order at the radial ends).
pub fn cartesian_gradient(g: &GridSpec, v: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = g.len();
    let nt = g.n_theta();
    let mut fr = vec![0.0; n];
    let mut ft = vec![0.0; n];
    d_dr(g, v, &mut fr);
    d_dtheta(g, v, &mut ft);
    let trig: Vec<(f64, f64)> = (0..nt).map(|k| g.angle(k).sin_cos()).collect();
    let mut dx = vec![0.0; n];
    let mut dy = vec![0.0; n];
    dx.par_chunks_mut(nt).zip(dy.par_chunks_mut(nt)).enumerate().for_each(|(i, (rx, ry))| {
        let inv_r = 1.0 / g.radius(i);
        for k in 0..nt {
            let (s, c) = trig[k];
            let a = fr[i * nt + k];
            let b = ft[i * nt + k] * inv_r;
            rx[k] = c * a - s * b;
            ry[k] = s * a + c * b;
        }
    });
    (dx, dy)
}

/// Discrete polar divergence `(1/r)∂ᵣ(r v_r) + (1/r)∂_θ v_θ` of a field given
/// by its polar components.
pub fn polar_divergence(g: &GridSpec, v_r: &[f64], v_t: &[f64]) -> Vec<f64> {
    let n = g.len();
    let nt = g.n_theta();
    let rv: Vec<f64> = (0..n).map(|idx| g.radius(idx / nt) * v_r[idx]).collect();
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    d_dr(g, &rv, &mut a);
    d_dtheta(g, v_t, &mut b);
    (0..n).map(|idx| (a[idx] + b[idx]) / g.radius(idx / nt)).collect()
}

fn weighted_square_sum(g: &GridSpec, v: &[f64]) -> f64 {
    let nt = g.n_theta();
    pairwise_sum_by(v.len(), |idx| g.weight(idx / nt) * v[idx] * v[idx])
}

/// Discrete `H^j` norms for `j = 0..=k`.
///
/// Derivatives of order `m` are taken as all `2^m` ordered compositions of
/// the discrete `∂ₓ`, `∂ᵧ`, i.e. the full derivative tensor. Mixed
/// derivatives therefore carry their binomial multiplicity, which makes the
/// norm exactly invariant under rotations of the grid by whole cells.
pub fn sobolev_norms(field: &ScalarField, k: usize) -> Vec<f64> {
    assert!(k <= 4, "Sobolev order above 4 is not supported");
    let g = field.grid();
    let mut per_order = vec![weighted_square_sum(g, field.values())];
    let mut level: Vec<Vec<f64>> = vec![field.values().to_vec()];
    for _ in 1..=k {
        let next: Vec<Vec<f64>> = level
            .iter()
            .flat_map(|f| {
                let (dx, dy) = cartesian_gradient(g, f);
                [dx, dy]
            })
            .collect();
        let s = next.iter().fold(0.0, |acc, f| acc + weighted_square_sum(g, f));
        per_order.push(s);
        level = next;
    }
    let mut out = Vec::with_capacity(k + 1);
    let mut acc = 0.0;
    for s in per_order {
        acc += s;
        out.push(acc.sqrt());
    }
    out
}

pub fn sobolev_norm(field: &ScalarField, k: usize) -> f64 {
    sobolev_norms(field, k)[k]
}

/// Sub-samples per direction in a dual cell crossed by the level set.
const LEVEL_SUBSAMPLES: usize = 8;

/// Quadrature area of `{values ≥ η}`.
///
/// Works on the dual cells between neighbouring nodes. Cells whose four
/// corners and bicubic midpoint lie on one side of `η` count fully or not
/// at all; the others are sub-sampled with the bicubic interpolant. The half cells next to the two boundary circles take the
/// value of the adjacent ring.
pub fn level_set_measure(field: &ScalarField, eta: f64) -> f64 {
    let g = field.grid();
    let v = field.values();
    let (nr, nt) = (g.n_r(), g.n_theta());
    let (dr, dth) = (g.dr(), g.dtheta());
    let ring_strip = |i: usize, r0: f64, r1: f64| -> f64 {
        let hits = v[i * nt..(i + 1) * nt].iter().filter(|&&x| x >= eta).count();
        hits as f64 * 0.5 * (r1 * r1 - r0 * r0) * dth
    };
    let edges = ring_strip(0, g.r_min(), g.radius(0)) + ring_strip(nr - 1, g.radius(nr - 1), g.r_max());
    let s = LEVEL_SUBSAMPLES;
    let interior = pairwise_sum_by((nr - 1) * nt, |cell| {
        let (i, k) = (cell / nt, cell % nt);
        let k1 = (k + 1) % nt;
        let c = [v[i * nt + k], v[i * nt + k1], v[(i + 1) * nt + k], v[(i + 1) * nt + k1]];
        let ri = g.radius(i);
        let th = g.angle(k);
        let at = |u: f64, w: f64| {
            let (r, a) = (ri + u * dr, th + w * dth);
            interpolate(field, Vec2::new(r * a.cos(), r * a.sin()))
        };
        let probe = [c[0], c[1], c[2], c[3], at(0.5, 0.5)];
        if probe.iter().all(|&x| x >= eta) {
            return (ri + 0.5 * dr) * dr * dth;
        }
        if probe.iter().all(|&x| x < eta) {
            return 0.0;
        }
        let mut area = 0.0;
        for a in 0..s {
            let u = (a as f64 + 0.5) / s as f64;
            for b in 0..s {
                let w = (b as f64 + 0.5) / s as f64;
                if at(u, w) >= eta {
                    area += ri + u * dr;
                }
            }
        }
        area * dr * dth / (s * s) as f64
    });
    edges + interior
}

/// `‖a − b‖` in discrete `H^k`.
pub fn sobolev_distance(a: &ScalarField, b: &ScalarField, k: usize) -> Result<f64, GridError> {
    Ok(sobolev_norm(&a.combine(1.0, b, -1.0)?, k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Vec2;
    use std::f64::consts::PI;

    fn grid() -> GridSpec {
        GridSpec::new(1.0, 5.0, 64, 128).unwrap()
    }

    #[test]
    fn zero_and_scaling() {
        let g = grid();
        let z = ScalarField::zeros(g, 0.0);
        for p in [LpExponent::Finite(1.0), LpExponent::Finite(2.0), LpExponent::Infinity] {
            assert_eq!(lp_norm(&z, p), 0.0);
        }
        let f = ScalarField::from_fn(g, 0.0, |p| (-(p - Vec2::new(2.5, 0.0)).norm_squared()).exp());
        let f2 = f.map(|v| 2.0 * v);
        for p in [LpExponent::Finite(1.0), LpExponent::Finite(3.0), LpExponent::Infinity] {
            assert!((lp_norm(&f2, p) - 2.0 * lp_norm(&f, p)).abs() < 1e-12 * lp_norm(&f2, p));
        }
    }

    #[test]
    fn annulus_indicator() {
        let g = grid();
        let f = ScalarField::from_fn(g, 0.0, |p| if (2.0..3.0).contains(&p.norm()) { 1.0 } else { 0.0 });
        let area = PI * (9.0 - 4.0);
        assert!((lp_norm(&f, LpExponent::Finite(1.0)) - area).abs() < 2.0 * PI * 3.0 * g.dr());
        assert_eq!(lp_norm(&f, LpExponent::Infinity), 1.0);
        assert!((level_set_measure(&f, 0.5) - area).abs() < 2.0 * PI * 3.0 * g.dr());
        assert_eq!(level_set_measure(&f, 1.5), 0.0);
    }

    #[test]
    fn smooth_level_sets_resolve_below_a_cell() {
        // {A·exp(−|x−c|²/w²) ≥ η} is a disk of area π w² ln(A/η).
        let g = GridSpec::new(1.0, 6.0, 128, 256).unwrap();
        let w = 0.4;
        for shift in [0.0, 0.3, 0.55] {
            let a = shift * g.dtheta();
            let c = Vec2::new(2.5 * a.cos(), 2.5 * a.sin());
            let f = ScalarField::from_fn(g, 0.0, |p| (-(p - c).norm_squared() / (w * w)).exp());
            for eta in [0.1, 0.5, 0.9] {
                let exact = PI * w * w * (1.0 / eta as f64).ln();
                let m = level_set_measure(&f, eta);
                assert!((m - exact).abs() < 0.01 * exact, "shift {shift} eta {eta}: {m} vs {exact}");
            }
        }
    }

    #[test]
    fn sobolev_basics() {
        let g = grid();
        let c = ScalarField::constant(g, 3.0, 0.0);
        let n = sobolev_norms(&c, 4);
        assert!((n[0] - lp_norm(&c, LpExponent::Finite(2.0))).abs() < 1e-12);
        for j in 1..=4 {
            assert!((n[j] - n[0]).abs() < 1e-9 * n[0]);
        }
        let f = ScalarField::from_fn(g, 0.0, |p| (-(p - Vec2::new(2.5, 0.5)).norm_squared()).exp());
        let n = sobolev_norms(&f, 4);
        for j in 0..4 {
            assert!(n[j] <= n[j + 1]);
        }
        let r = sobolev_norms(&f.rotate_cells(1), 4);
        for j in 0..=4 {
            assert!((r[j] - n[j]).abs() < 1e-12 * n[j]);
        }
    }

    #[test]
    fn gradient_of_linear_function() {
        let g = grid();
        let f = ScalarField::from_fn(g, 0.0, |p| 2.0 * p.x - 3.0 * p.y);
        let (dx, dy) = cartesian_gradient(&g, f.values());
        let mut err = 0.0_f64;
        for idx in 0..g.len() {
            err = err.max((dx[idx] - 2.0).abs()).max((dy[idx] + 3.0).abs());
        }
        // Angular differences of sin/cos are second order in Δθ.
        assert!(err < 0.01, "{err}");
    }
}
