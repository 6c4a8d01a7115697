//! Brute-force discrete Green function used to validate the closed form.
//!
//! The half Laplacian `Λu(x) = C ∫ (u(x) − u(y)) |x − y|⁻³ dy` with
//! `C = 1/(2π)` is discretized on a uniform `n × n` lattice covering
//! `[−L, L]²`. Node `i` interacts with cell `j` through the exact cell
//! integral `W_ij = ∫_{cell j} |x_i − y|⁻³ dy`; the diagonal carries the
//! integral of `|z|⁻³` outside the node's own cell, `8√2/h`. Unknowns are the
//! lattice nodes with `ρ < |x| < L`; nodes in the disk are zero.
//!
//! Outside the truncation box the Green function must be supplied. With
//! [`FarField::Zero`] the problem is the plain truncated one, whose Green
//! function is that of the smaller domain. With [`FarField::Exterior`] the
//! closed-form exterior Green function provides the data beyond `|x| = L`,
//! so the discrete solution near the disk tests whether the closed form
//! solves the discrete equation there; a wrong normalization or a wrong
//! boundary behavior shows up as an interior mismatch.

use super::{eval_g_exterior, GreenError, ObstacleGeometry};
use crate::kernels::constant_c;
use crate::Vec2;
use gauss_quad::legendre::GaussLegendre;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("oracle lattice needs an even size of at least 16, got {0}")]
    BadSize(usize),
    #[error("{unknowns} unknowns exceed the dense-solve budget of {limit}")]
    TooLarge { unknowns: usize, limit: usize },
    #[error("discrete operator is not positive definite")]
    NotPositiveDefinite,
    #[error("source index {0} is not an unknown of the lattice")]
    BadSource(usize),
    #[error(transparent)]
    Green(#[from] GreenError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FarField {
    Zero,
    Exterior,
}

const MAX_UNKNOWNS: usize = 5000;

fn gauss(n: usize) -> Vec<(f64, f64)> {
    GaussLegendre::new(n).expect("rule degree >= 2").as_node_weight_pairs().to_vec()
}

/// `∫ |z|⁻³ dz` over the lattice cell at integer offset `(a, b)`.
fn cell_integral(a: i64, b: i64, h: f64, near: &[(f64, f64)], far: &[(f64, f64)]) -> f64 {
    if a == 0 && b == 0 {
        return 0.0;
    }
    let close = a.abs().max(b.abs()) <= 3;
    let (sub, rule) = if close { (8, near) } else { (1, far) };
    let hs = h / sub as f64;
    let mut total = 0.0;
    for si in 0..sub {
        for sj in 0..sub {
            let x0 = (a as f64 - 0.5) * h + si as f64 * hs;
            let y0 = (b as f64 - 0.5) * h + sj as f64 * hs;
            for &(u, wu) in rule {
                let x = x0 + 0.5 * (u + 1.0) * hs;
                for &(v, wv) in rule {
                    let y = y0 + 0.5 * (v + 1.0) * hs;
                    let r2 = x * x + y * y;
                    total += wu * wv * 0.25 * hs * hs / (r2 * r2.sqrt());
                }
            }
        }
    }
    total
}

/// Discrete exterior problem on a truncated lattice, factored once.
pub struct GreenOracle {
    geom: ObstacleGeometry,
    n: usize,
    half_width: f64,
    h: f64,
    /// Lattice index of every unknown.
    unknowns: Vec<usize>,
    /// Unknown number of every lattice node, if any.
    slot: Vec<Option<usize>>,
    cell_table: Vec<f64>,
    matrix: DMatrix<f64>,
    factor: Cholesky<f64, Dyn>,
    far_points: Vec<(Vec2, f64)>,
}

impl std::fmt::Debug for GreenOracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GreenOracle")
            .field("n", &self.n)
            .field("half_width", &self.half_width)
            .field("unknowns", &self.unknowns.len())
            .finish()
    }
}

impl GreenOracle {
    /// Lattice of `n × n` nodes over `[−L, L]²` with `L = truncation`.
    pub fn assemble(n: usize, truncation: f64, geom: ObstacleGeometry) -> Result<Self, OracleError> {
        if n < 16 || n % 2 != 0 {
            return Err(OracleError::BadSize(n));
        }
        if truncation < 8.0 * geom.radius() {
            log::warn!(
                "oracle truncation radius {truncation} is below 8 obstacle radii; the discrete Green function is poorly conditioned against the exterior one"
            );
        }
        let h = 2.0 * truncation / n as f64;
        let coord = |i: usize| -truncation + (i as f64 + 0.5) * h;
        let mut unknowns = Vec::new();
        let mut slot = vec![None; n * n];
        for a in 0..n {
            for b in 0..n {
                let r = coord(a).hypot(coord(b));
                if r > geom.radius() && r < truncation {
                    slot[a * n + b] = Some(unknowns.len());
                    unknowns.push(a * n + b);
                }
            }
        }
        if unknowns.len() > MAX_UNKNOWNS {
            return Err(OracleError::TooLarge { unknowns: unknowns.len(), limit: MAX_UNKNOWNS });
        }
        let near = gauss(8);
        let far = gauss(4);
        let mut cell_table = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                cell_table[a * n + b] = cell_integral(a as i64, b as i64, h, &near, &far);
            }
        }
        let c = constant_c();
        let diag = 8.0 * 2f64.sqrt() / h;
        let m = unknowns.len();
        let mut matrix = DMatrix::<f64>::zeros(m, m);
        for (p, &ip) in unknowns.iter().enumerate() {
            let (ap, bp) = (ip / n, ip % n);
            for (q, &iq) in unknowns.iter().enumerate() {
                let (aq, bq) = (iq / n, iq % n);
                let w = cell_table[ap.abs_diff(aq) * n + bp.abs_diff(bq)];
                matrix[(p, q)] = if p == q { c * diag } else { -c * w };
            }
        }
        let factor = Cholesky::new(matrix.clone()).ok_or(OracleError::NotPositiveDefinite)?;

        // Quadrature of the region beyond the box: eight octants, each mapped
        // by R = R_box(α)/t, t ∈ (0, 1].
        let rule = gauss(24);
        let mut far_points = Vec::new();
        for octant in 0..8 {
            let a0 = octant as f64 * PI / 4.0;
            for &(ua, wa) in &rule {
                let alpha = a0 + 0.5 * (ua + 1.0) * PI / 4.0;
                let wa = wa * PI / 8.0;
                let r_box = truncation / alpha.cos().abs().max(alpha.sin().abs());
                for &(ut, wt) in &rule {
                    let t = 0.5 * (ut + 1.0);
                    let r = r_box / t;
                    let jac = r_box / (t * t);
                    far_points.push((Vec2::new(r * alpha.cos(), r * alpha.sin()), 0.5 * wt * jac * r * wa));
                }
            }
        }
        Ok(Self { geom, n, half_width: truncation, h, unknowns, slot, cell_table, matrix, factor, far_points })
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }
    pub fn size(&self) -> usize {
        self.n
    }
    pub fn unknown_count(&self) -> usize {
        self.unknowns.len()
    }
    /// Discrete operator restricted to the unknowns.
    pub fn operator_matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
    pub fn lattice_point(&self, index: usize) -> Vec2 {
        let c = |i: usize| -self.half_width + (i as f64 + 0.5) * self.h;
        Vec2::new(c(index / self.n), c(index % self.n))
    }
    pub fn unknown_point(&self, unknown: usize) -> Vec2 {
        self.lattice_point(self.unknowns[unknown])
    }
    /// Lattice index of an unknown, and back.
    pub fn lattice_index(&self, unknown: usize) -> usize {
        self.unknowns[unknown]
    }
    pub fn unknown_of(&self, lattice: usize) -> Option<usize> {
        self.slot[lattice]
    }

    /// Discrete Green function with the point source at unknown `source`,
    /// indexed by lattice node; nodes in the disk and outside the box hold 0.
    pub fn green_row(&self, source: usize, far_field: FarField) -> Result<Vec<f64>, OracleError> {
        let m = self.unknowns.len();
        if source >= m {
            return Err(OracleError::BadSource(source));
        }
        let mut rhs = DVector::<f64>::zeros(m);
        rhs[source] = 1.0 / (self.h * self.h);
        if far_field == FarField::Exterior {
            let y = self.unknown_point(source);
            let c = constant_c();
            let n = self.n;
            let outside: Vec<(usize, f64)> = (0..n * n)
                .filter(|&l| self.lattice_point(l).norm() >= self.half_width)
                .map(|l| eval_g_exterior(self.lattice_point(l), y, &self.geom).map(|e| (l, e.value)))
                .collect::<Result<_, _>>()?;
            let beyond: Vec<(Vec2, f64)> = self
                .far_points
                .iter()
                .map(|&(z, w)| eval_g_exterior(z, y, &self.geom).map(|e| (z, w * e.value)))
                .collect::<Result<_, _>>()?;
            for (p, &ip) in self.unknowns.iter().enumerate() {
                let (ap, bp) = (ip / n, ip % n);
                let x = self.lattice_point(ip);
                let mut acc = 0.0;
                for &(l, g) in &outside {
                    acc += self.cell_table[ap.abs_diff(l / n) * n + bp.abs_diff(l % n)] * g;
                }
                for &(z, wg) in &beyond {
                    let d = (x - z).norm();
                    acc += wg / (d * d * d);
                }
                rhs[p] += c * acc;
            }
        }
        let u = self.factor.solve(&rhs);
        let mut row = vec![0.0; self.n * self.n];
        for (p, &ip) in self.unknowns.iter().enumerate() {
            row[ip] = u[p];
        }
        Ok(row)
    }
}

/// Builds the oracle on the standard validation lattice: `n × n` over a box
/// of half-width eight obstacle radii.
pub fn brute_force_green_oracle(n: usize, geom: ObstacleGeometry) -> Result<GreenOracle, OracleError> {
    GreenOracle::assemble(n, 8.0 * geom.radius(), geom)
}

/// Agreement between the closed form and the oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub pairs: usize,
    pub max_relative: f64,
    pub mean_relative: f64,
    /// Largest `|G(i,j) − G(j,i)| / max|G|` among the sampled sources.
    pub symmetry: f64,
}

/// Compares the closed form with the oracle for `sources` sources spread
/// over the lattice, on all target nodes at least `min_cells` spacings from
/// the source, the disk and the box edge.
pub fn compare_with_closed_form(
    oracle: &GreenOracle,
    sources: usize,
    min_cells: f64,
) -> Result<OracleReport, OracleError> {
    let h = oracle.spacing();
    let rho = oracle.geom.radius();
    let l = oracle.half_width;
    let eligible: Vec<usize> = (0..oracle.unknown_count())
        .filter(|&u| {
            let r = oracle.unknown_point(u).norm();
            r >= rho + min_cells * h && r <= l - min_cells * h
        })
        .collect();
    let stride = (eligible.len() / sources.max(1)).max(1);
    let chosen: Vec<usize> = eligible.iter().step_by(stride).take(sources).copied().collect();
    let mut rows = Vec::with_capacity(chosen.len());
    for &s in &chosen {
        rows.push(oracle.green_row(s, FarField::Exterior)?);
    }
    let mut max_rel = 0.0_f64;
    let mut sum_rel = 0.0;
    let mut pairs = 0;
    for (row, &s) in rows.iter().zip(&chosen) {
        let y = oracle.unknown_point(s);
        for &t in &eligible {
            let x = oracle.unknown_point(t);
            if (x - y).norm() < min_cells * h {
                continue;
            }
            let exact = eval_g_exterior(x, y, &oracle.geom)?.value;
            let rel = (row[oracle.lattice_index(t)] - exact).abs() / exact;
            max_rel = max_rel.max(rel);
            sum_rel += rel;
            pairs += 1;
        }
    }
    let mut scale = 0.0_f64;
    let mut asym = 0.0_f64;
    for (a, row_a) in chosen.iter().zip(&rows) {
        for (b, row_b) in chosen.iter().zip(&rows) {
            let gab = row_a[oracle.lattice_index(*b)];
            let gba = row_b[oracle.lattice_index(*a)];
            scale = scale.max(gab.abs());
            asym = asym.max((gab - gba).abs());
        }
    }
    Ok(OracleReport {
        pairs,
        max_relative: max_rel,
        mean_relative: if pairs > 0 { sum_rel / pairs as f64 } else { 0.0 },
        symmetry: if scale > 0.0 { asym / scale } else { 0.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_integrals_match_far_field() {
        let near = gauss(8);
        let far = gauss(4);
        let h = 0.1;
        let w = cell_integral(20, 5, h, &near, &far);
        let r = (20.0f64 * 20.0 + 25.0).sqrt() * h;
        assert!((w - h * h / (r * r * r)).abs() < 1e-3 * w);
        assert_eq!(cell_integral(0, 0, h, &near, &far), 0.0);
    }

    #[test]
    fn small_lattice_operator_is_symmetric_positive() {
        let geom = ObstacleGeometry::new(1.0).unwrap();
        let o = GreenOracle::assemble(16, 4.0, geom).unwrap();
        let m = o.operator_matrix();
        assert!((m - m.transpose()).amax() == 0.0);
        let row = o.green_row(0, FarField::Zero).unwrap();
        for l in 0..16 * 16 {
            if o.lattice_point(l).norm() <= 1.0 {
                assert_eq!(row[l], 0.0);
            }
        }
    }
}
