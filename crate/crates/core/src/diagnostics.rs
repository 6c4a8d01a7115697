//! Run diagnostics: plateau radius, boundary log-Lipschitz semi-norm, Osgood
//! lower bound, the `H²` blow-up integral, rearrangement and stability
//! checks.

use crate::field::{level_set_measure, lp_norm, GridError, LpExponent, ScalarField};
use crate::green::ObstacleGeometry;
use crate::transport::VelocityField;
use crate::Vec2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("runs differ in {0}")]
    Mismatch(&'static str),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Width of the band next to the disk where `ω` is constant.
///
/// The discrete gradient is sampled as radial jumps on the faces between
/// rings (at `r_{i+½}`) and as angular jumps on the rings. `R` is the
/// smallest radius carrying a jump above `grad_threshold` times the largest
/// one, minus `r_min`.
pub fn plateau_radius(omega: &ScalarField, _geom: &ObstacleGeometry, grad_threshold: f64) -> f64 {
    let g = omega.grid();
    let nt = g.n_theta();
    let nr = g.n_r();
    let v = omega.values();
    let dr = g.dr();
    let dth = g.dtheta();
    // Per ring: largest radial jump to the next ring, largest angular jump.
    let per_ring: Vec<(f64, f64)> = (0..nr)
        .into_par_iter()
        .map(|i| {
            let row = &v[i * nt..(i + 1) * nt];
            let mut rad = 0.0_f64;
            if i + 1 < nr {
                let next = &v[(i + 1) * nt..(i + 2) * nt];
                for k in 0..nt {
                    rad = rad.max((next[k] - row[k]).abs() / dr);
                }
            }
            let rdth = g.radius(i) * dth;
            let mut ang = 0.0_f64;
            for k in 0..nt {
                ang = ang.max((row[(k + 1) % nt] - row[k]).abs() / rdth);
            }
            (rad, ang)
        })
        .collect();
    let max = per_ring.iter().fold(0.0_f64, |m, &(a, b)| m.max(a).max(b));
    if max == 0.0 {
        return g.r_max() - g.r_min();
    }
    let thr = grad_threshold * max;
    for (i, &(rad, ang)) in per_ring.iter().enumerate() {
        if ang > thr {
            return g.radius(i) - g.r_min();
        }
        if rad > thr {
            return g.radius(i) + 0.5 * dr - g.r_min();
        }
    }
    g.r_max() - g.r_min()
}

/// Sample distances of the refined rings next to the disk.
fn refined_distances(dr: f64, rings: usize) -> Vec<f64> {
    (1..=rings).map(|k| 0.5 * dr * 0.5f64.powi(k as i32)).collect()
}

/// Directional log-Lipschitz semi-norm of `v` at the disk.
///
/// The quotient `−(x − y)·(v(x) − v(y)) / (|x − y|²(1 − ln|x − y|))` with
/// `y` the projection of `x` on the disk and `v(y) = 0` is maximized over
/// the nodes within unit distance of the disk and over `refined_rings`
/// extra rings at distances `Δr/4, Δr/8, …`. Negative suprema report 0.
pub fn directional_seminorm(v: &VelocityField, geom: &ObstacleGeometry) -> f64 {
    directional_seminorm_with(v, geom, 8)
}

pub fn directional_seminorm_with(v: &VelocityField, geom: &ObstacleGeometry, refined_rings: usize) -> f64 {
    let g = v.grid();
    let rho = geom.radius();
    let quotient = |x: Vec2, vx: Vec2| -> f64 {
        let r = x.norm();
        let d = r - rho;
        if d <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let normal_part = -(x / r * d).dot(&vx);
        normal_part / (d * d * (1.0 - d.ln()))
    };
    let nt = g.n_theta();
    let grid_max = (0..g.n_r())
        .take_while(|&i| g.radius(i) - rho <= 1.0)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|i| (0..nt).map(|k| quotient(g.node(i, k), v.node(i, k))).fold(f64::NEG_INFINITY, f64::max))
        .reduce(|| f64::NEG_INFINITY, f64::max);
    let refined_max = refined_distances(g.dr(), refined_rings)
        .into_par_iter()
        .map(|d| {
            (0..nt)
                .map(|k| {
                    let (s, c) = g.angle(k).sin_cos();
                    let x = Vec2::new(c, s) * (rho + d);
                    quotient(x, v.at(x))
                })
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    grid_max.max(refined_max).max(0.0)
}

/// `R₀·exp(−exp(∫N))`.
pub fn osgood_bound(r0: f64, n_integral: f64) -> f64 {
    r0 * (-(n_integral.exp())).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Continue,
    BlowupSuspected,
}

/// Running `∫‖ω‖_{H²} dt` against a bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupMonitor {
    pub integral: f64,
    pub bound: f64,
    pub verdict: Verdict,
}

impl BlowupMonitor {
    pub fn new(bound: f64) -> Self {
        Self { integral: 0.0, bound, verdict: Verdict::Continue }
    }

    /// Adds `h2·dt`; the verdict flips once, when the integral first
    /// exceeds the bound, and stays flipped.
    pub fn accumulate(&mut self, h2: f64, dt: f64) -> Verdict {
        self.integral += h2 * dt;
        if self.integral > self.bound {
            self.verdict = Verdict::BlowupSuspected;
        }
        self.verdict
    }
}

/// One row of the diagnostics table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub plateau_radius: f64,
    pub seminorm: f64,
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
    pub h: [f64; 4],
    pub blowup_integral: f64,
    pub osgood_bound: f64,
    pub picard_iters: usize,
    /// Not part of the CSV; kept for the impermeability checks.
    pub impermeability: f64,
}

/// Time series of [`DiagnosticsRecord`]s.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSeries {
    pub records: Vec<DiagnosticsRecord>,
}

pub const CSV_HEADER: &str = "t,R,N,L1,L2,Linf,H1,H2,H3,H4,blowup_integral,osgood_bound,picard_iters";

impl DiagnosticsSeries {
    pub fn push(&mut self, r: DiagnosticsRecord) {
        self.records.push(r);
    }

    pub fn last(&self) -> Option<&DiagnosticsRecord> {
        self.records.last()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for r in &self.records {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                r.t,
                r.plateau_radius,
                r.seminorm,
                r.l1,
                r.l2,
                r.linf,
                r.h[0],
                r.h[1],
                r.h[2],
                r.h[3],
                r.blowup_integral,
                r.osgood_bound,
                r.picard_iters
            )?;
        }
        w.flush()
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii")
    }
}

/// Norms recorded for a field.
pub fn lp_triplet(omega: &ScalarField) -> (f64, f64, f64) {
    (
        lp_norm(omega, LpExponent::Finite(1.0)),
        lp_norm(omega, LpExponent::Finite(2.0)),
        lp_norm(omega, LpExponent::Infinity),
    )
}

/// Largest relative change of super-level-set areas between two fields.
pub fn rearrangement_check(omega_t: &ScalarField, omega_0: &ScalarField, thresholds: &[f64]) -> f64 {
    thresholds
        .iter()
        .filter_map(|&eta| {
            let m0 = level_set_measure(omega_0, eta);
            (m0 > 0.0).then(|| (level_set_measure(omega_t, eta) - m0).abs() / m0)
        })
        .fold(0.0, f64::max)
}

/// Distance series between two runs and the fitted growth rate.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
    /// Least-squares slope of `ln d(t)` against `t`; 0 when every
    /// distance vanishes.
    pub growth_rate: f64,
}

impl StabilityReport {
    /// Checks `d(t) ≤ factor·ε·exp(rate·t)` at every sample.
    pub fn within_envelope(&self, epsilon: f64, rate: f64, factor: f64) -> bool {
        self.times.iter().zip(&self.distances).all(|(t, d)| *d <= factor * epsilon * (rate * t).exp())
    }
}

/// Least-squares slope of `ln y` against `x` over positive samples.
pub fn log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs.iter().zip(ys).filter(|(_, y)| **y > 0.0).map(|(x, y)| (*x, y.ln())).collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// `d(t) = ‖ω_a(t) − ω_b(t)‖_{L²}` over two trajectories sampled at the
/// same times.
pub fn stability_compare(run_a: &[ScalarField], run_b: &[ScalarField]) -> Result<StabilityReport, DiagnosticsError> {
    if run_a.len() != run_b.len() {
        return Err(DiagnosticsError::Mismatch("number of samples"));
    }
    let mut times = Vec::with_capacity(run_a.len());
    let mut distances = Vec::with_capacity(run_a.len());
    for (a, b) in run_a.iter().zip(run_b) {
        if a.grid() != b.grid() {
            return Err(DiagnosticsError::Mismatch("grid"));
        }
        if a.time() != b.time() {
            return Err(DiagnosticsError::Mismatch("sample times"));
        }
        times.push(a.time());
        distances.push(lp_norm(&a.combine(1.0, b, -1.0)?, LpExponent::Finite(2.0)));
    }
    let growth_rate = log_slope(&times, &distances);
    Ok(StabilityReport { times, distances, growth_rate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::GridSpec;
    use crate::perp;

    fn setup() -> (GridSpec, ObstacleGeometry) {
        (GridSpec::new(1.0, 4.0, 48, 96).unwrap(), ObstacleGeometry::new(1.0).unwrap())
    }

    #[test]
    fn plateau_of_zero_and_bump() {
        let (g, geom) = setup();
        assert_eq!(plateau_radius(&ScalarField::zeros(g, 0.0), &geom, 1e-6), 3.0);
        let (r1, r2) = (1.8, 2.9);
        let bump = ScalarField::from_fn(g, 0.0, |p| {
            let r = p.norm();
            if r > r1 && r < r2 {
                ((r - r1) * (r2 - r)).powi(3)
            } else {
                0.0
            }
        });
        let rr = plateau_radius(&bump, &geom, 1e-6);
        assert!((rr - (r1 - 1.0)).abs() <= g.dr(), "{rr}");
    }

    #[test]
    fn seminorm_examples() {
        let (g, geom) = setup();
        let azim = VelocityField::from_fn(g, |p| perp(p));
        // Only round-off in the polar split survives.
        assert!(directional_seminorm(&azim, &geom) < 1e-9);
        let zero = VelocityField::from_fn(g, |_| Vec2::zeros());
        assert_eq!(directional_seminorm(&zero, &geom), 0.0);
        let inflow = VelocityField::from_fn(g, |p| -(p - p / p.norm()));
        let n = directional_seminorm(&inflow, &geom);
        // Quotient is 1/(1 − ln d), largest at the largest sampled d ≤ 1.
        let dmax = (0..g.n_r()).map(|i| g.radius(i) - 1.0).filter(|d| *d <= 1.0).fold(0.0, f64::max);
        assert!((n - 1.0 / (1.0 - f64::ln(dmax))).abs() < 1e-12, "{n}");
    }

    #[test]
    fn osgood_values() {
        assert!((osgood_bound(1.0, 0.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert!(osgood_bound(1.0, 0.5) < osgood_bound(1.0, 0.1));
        assert_eq!(osgood_bound(0.0, 0.3), 0.0);
    }

    #[test]
    fn blowup_integral() {
        let mut m = BlowupMonitor::new(0.55);
        let mut flips = 0;
        let mut prev = Verdict::Continue;
        for _ in 0..10 {
            let v = m.accumulate(1.0, 0.1);
            if v != prev {
                flips += 1;
            }
            prev = v;
        }
        assert!((m.integral - 1.0).abs() < 1e-12);
        assert_eq!(flips, 1);
        let mut z = BlowupMonitor::new(1e3);
        for _ in 0..100 {
            assert_eq!(z.accumulate(0.0, 0.1), Verdict::Continue);
        }
    }

    #[test]
    fn rearrangement_examples() {
        let (g, _) = setup();
        let f = ScalarField::from_fn(g, 0.0, |p| (-(p - Vec2::new(2.5, 0.0)).norm_squared() * 3.0).exp());
        let th: Vec<f64> = (1..=10).map(|k| 0.09 * k as f64).collect();
        assert_eq!(rearrangement_check(&f, &f, &th), 0.0);
        let scaled = f.map(|v| 1.2 * v);
        assert!(rearrangement_check(&scaled, &f, &[0.95]) > 0.0);
    }

    #[test]
    fn stability_of_identical_runs() {
        let (g, _) = setup();
        let a: Vec<ScalarField> = (0..5).map(|k| ScalarField::constant(g, k as f64, k as f64 * 0.1)).collect();
        let r = stability_compare(&a, &a).unwrap();
        assert!(r.distances.iter().all(|&d| d == 0.0));
        assert_eq!(r.growth_rate, 0.0);
        assert!(stability_compare(&a, &a[..3]).is_err());
    }
}
