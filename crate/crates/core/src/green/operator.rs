//! Regularized exterior operator `G_{F,δ}` and its Biot–Savart counterpart
//! `K_{F,δ} = ∇⊥G_{F,δ}`.
//!
//! `G_{F,δ}φ(x) = P(x) ∫ (G_δ(x − y) − H_F(x, y)) φ(y) dy` with the prefactor
//! `P(x) = χ_δ(δ²|x|)·(1 − χ_δ(|x| − ρ))`, which vanishes within `δ` of the
//! disk and beyond `|x| = 2/δ`. The integral is the midpoint rule on the
//! polar grid (weights `r Δr Δθ`).
//!
//! Two evaluation paths compute the same quadrature sum:
//! * [`PointQuadrature`] sums over all sources for arbitrary targets;
//! * [`BiotSavartOperator`] evaluates at all grid nodes at once. The kernel
//!   between node `(i, k)` and source `(j, l)` depends only on `i`, `j` and
//!   `l − k`, so each ring-to-ring block is circulant and the sum is a cyclic
//!   correlation, evaluated exactly with FFTs.

use super::{regular_part_grad_x_unchecked, regular_part_unchecked, ObstacleGeometry};
use crate::field::{GridSpec, ScalarField};
use crate::kernels::{cutoff_chi_delta, cutoff_chi_delta_derivative, KernelConfig};
use crate::Vec2;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("grid inner radius {r_min} must equal the obstacle radius {radius}")]
    InnerRadius { r_min: f64, radius: f64 },
    #[error("outer cutoff vanishes beyond 2/delta = {limit}; r_max = {r_max} exceeds it")]
    OuterCutoff { r_max: f64, limit: f64 },
    #[error("density lives on a different grid than the operator")]
    GridMismatch,
}

/// The cutoff prefactor `P(|x|)` and its radial derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prefactor {
    delta: f64,
    radius: f64,
}

impl Prefactor {
    pub fn new(kernel: &KernelConfig, geom: &ObstacleGeometry) -> Self {
        Self { delta: kernel.delta(), radius: geom.radius() }
    }

    #[inline]
    pub fn value(&self, r: f64) -> f64 {
        let d = self.delta;
        cutoff_chi_delta(d * d * r, d) * (1.0 - cutoff_chi_delta(r - self.radius, d))
    }

    #[inline]
    pub fn derivative(&self, r: f64) -> f64 {
        let d = self.delta;
        let outer = cutoff_chi_delta(d * d * r, d);
        let outer_d = d * d * cutoff_chi_delta_derivative(d * d * r, d);
        let inner = 1.0 - cutoff_chi_delta(r - self.radius, d);
        let inner_d = -cutoff_chi_delta_derivative(r - self.radius, d);
        outer_d * inner + outer * inner_d
    }

    /// True where both the prefactor and its derivative vanish, so the
    /// operator output is exactly zero.
    #[inline]
    pub fn is_inactive(&self, r: f64) -> bool {
        self.value(r) == 0.0 && self.derivative(r) == 0.0
    }
}

/// Kernel `G_δ(x − y) − H_F(x, y)` and its `x`-gradient.
#[inline]
fn kernel_pair(x: Vec2, y: Vec2, kernel: &KernelConfig, geom: &ObstacleGeometry) -> (f64, Vec2) {
    let diff = x - y;
    let r = diff.norm();
    let s = kernel.g_delta_radial(r) - regular_part_unchecked(x, y, geom);
    let g = diff * kernel.g_delta_slope_over_r(r) - regular_part_grad_x_unchecked(x, y, geom);
    (s, g)
}

/// Output of the operator at one point: `G_{F,δ}φ` and `K_{F,δ}φ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorSample {
    pub potential: f64,
    pub velocity: Vec2,
}

fn combine(pre: &Prefactor, x: Vec2, integral: f64, grad: Vec2) -> OperatorSample {
    let r = x.norm();
    let p = pre.value(r);
    let dp = pre.derivative(r);
    let grad_total = grad * p + x * (dp * integral / r);
    OperatorSample { potential: p * integral, velocity: crate::perp(grad_total) }
}

/// Message for densities whose kernel peak the grid cannot resolve.
pub fn resolution_warning(grid: &GridSpec, kernel: &KernelConfig) -> Option<String> {
    let h = grid.max_cell_diameter();
    (kernel.delta() < 2.0 * h).then(|| {
        format!(
            "delta = {} is below twice the largest cell diameter {:.4}; the regularized kernel peak is under-resolved",
            kernel.delta(),
            h
        )
    })
}

fn check_setup(grid: &GridSpec, kernel: &KernelConfig, geom: &ObstacleGeometry) -> Result<(), OperatorError> {
    if (grid.r_min() - geom.radius()).abs() > 1e-12 * geom.radius() {
        return Err(OperatorError::InnerRadius { r_min: grid.r_min(), radius: geom.radius() });
    }
    let limit = 2.0 / kernel.delta();
    if grid.r_max() > limit {
        return Err(OperatorError::OuterCutoff { r_max: grid.r_max(), limit });
    }
    Ok(())
}

/// Direct quadrature against one density, for arbitrary targets.
#[derive(Debug, Clone)]
pub struct PointQuadrature {
    kernel: KernelConfig,
    geom: ObstacleGeometry,
    prefactor: Prefactor,
    /// Source positions with weight times density, zero densities dropped.
    sources: Vec<(Vec2, f64)>,
}

impl PointQuadrature {
    pub fn new(
        density: &ScalarField,
        kernel: &KernelConfig,
        geom: &ObstacleGeometry,
    ) -> Result<Self, OperatorError> {
        let grid = density.grid();
        check_setup(grid, kernel, geom)?;
        let nt = grid.n_theta();
        let sources = density
            .values()
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(idx, v)| {
                let (i, k) = (idx / nt, idx % nt);
                (grid.node(i, k), grid.weight(i) * v)
            })
            .collect();
        Ok(Self { kernel: *kernel, geom: *geom, prefactor: Prefactor::new(kernel, geom), sources })
    }

    pub fn prefactor(&self) -> &Prefactor {
        &self.prefactor
    }

    pub fn eval(&self, x: Vec2) -> OperatorSample {
        if self.prefactor.is_inactive(x.norm()) {
            return OperatorSample { potential: 0.0, velocity: Vec2::zeros() };
        }
        let mut s = 0.0;
        let mut g = Vec2::zeros();
        for &(y, wv) in &self.sources {
            let (ks, kg) = kernel_pair(x, y, &self.kernel, &self.geom);
            s += ks * wv;
            g += kg * wv;
        }
        combine(&self.prefactor, x, s, g)
    }
}

/// `G_{F,δ}φ` at arbitrary targets by direct summation.
pub fn apply_g_f_delta(
    density: &ScalarField,
    targets: &[Vec2],
    kernel: &KernelConfig,
    geom: &ObstacleGeometry,
) -> Result<Vec<f64>, OperatorError> {
    let q = PointQuadrature::new(density, kernel, geom)?;
    Ok(targets.par_iter().map(|&x| q.eval(x).potential).collect())
}

/// `K_{F,δ}φ` at arbitrary targets by direct summation, gradient taken
/// inside the integral.
pub fn apply_k_f_delta(
    density: &ScalarField,
    targets: &[Vec2],
    kernel: &KernelConfig,
    geom: &ObstacleGeometry,
) -> Result<Vec<Vec2>, OperatorError> {
    let q = PointQuadrature::new(density, kernel, geom)?;
    Ok(targets.par_iter().map(|&x| q.eval(x).velocity).collect())
}

/// Kernel spectra for one target ring, laid out `[frequency][source ring]`.
struct RingTables {
    ring: usize,
    /// Spectrum of the (even) potential kernel; real.
    potential: Vec<f64>,
    /// Spectrum of the (even) radial gradient kernel; real.
    radial: Vec<f64>,
    /// Imaginary part of the spectrum of the (odd) azimuthal gradient kernel.
    azimuthal: Vec<f64>,
}

/// Nodal values of the operator output on the whole grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalOutput {
    pub potential: Vec<f64>,
    /// Radial component of `K_{F,δ}φ` at each node.
    pub radial: Vec<f64>,
    /// Azimuthal component of `K_{F,δ}φ` at each node.
    pub azimuthal: Vec<f64>,
}

/// Grid-to-grid operator with precomputed circulant kernel spectra.
pub struct BiotSavartOperator {
    grid: GridSpec,
    kernel: KernelConfig,
    geom: ObstacleGeometry,
    prefactor: Prefactor,
    tables: Vec<RingTables>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    warning: Option<String>,
}

impl std::fmt::Debug for BiotSavartOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BiotSavartOperator")
            .field("grid", &self.grid)
            .field("kernel", &self.kernel)
            .field("geom", &self.geom)
            .field("active_rings", &self.tables.len())
            .finish()
    }
}

impl BiotSavartOperator {
    pub fn new(grid: GridSpec, kernel: KernelConfig, geom: ObstacleGeometry) -> Result<Self, OperatorError> {
        check_setup(&grid, &kernel, &geom)?;
        let warning = resolution_warning(&grid, &kernel);
        if let Some(w) = &warning {
            log::warn!("{w}");
        }
        let prefactor = Prefactor::new(&kernel, &geom);
        let n = grid.n_theta();
        let half = n / 2 + 1;
        let nr = grid.n_r();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(n);
        let ifft = planner.plan_fft_inverse(n);

        let active: Vec<usize> = (0..nr).filter(|&i| !prefactor.is_inactive(grid.radius(i))).collect();
        let tables = active
            .par_iter()
            .map(|&i| {
                let x = Vec2::new(grid.radius(i), 0.0);
                let mut potential = vec![0.0; half * nr];
                let mut radial = vec![0.0; half * nr];
                let mut azimuthal = vec![0.0; half * nr];
                let mut bs = vec![Complex64::default(); n];
                let mut bx = vec![Complex64::default(); n];
                let mut by = vec![Complex64::default(); n];
                let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
                for j in 0..nr {
                    let w = grid.weight(j);
                    for m in 0..half {
                        let (s, g) = kernel_pair(x, grid.node(j, m), &kernel, &geom);
                        bs[m] = Complex64::new(w * s, 0.0);
                        bx[m] = Complex64::new(w * g.x, 0.0);
                        by[m] = Complex64::new(w * g.y, 0.0);
                    }
                    // Mirror symmetry about the target's axis: even in the
                    // offset for the potential and radial parts, odd for the
                    // azimuthal part.
                    by[0] = Complex64::default();
                    by[n / 2] = Complex64::default();
                    for m in 1..n / 2 {
                        bs[n - m] = bs[m];
                        bx[n - m] = bx[m];
                        by[n - m] = -by[m];
                    }
                    fft.process_with_scratch(&mut bs, &mut scratch);
                    fft.process_with_scratch(&mut bx, &mut scratch);
                    fft.process_with_scratch(&mut by, &mut scratch);
                    for f in 0..half {
                        potential[f * nr + j] = bs[f].re;
                        radial[f * nr + j] = bx[f].re;
                        azimuthal[f * nr + j] = by[f].im;
                    }
                }
                RingTables { ring: i, potential, radial, azimuthal }
            })
            .collect();
        Ok(Self { grid, kernel, geom, prefactor, tables, fft, ifft, warning })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }
    pub fn kernel(&self) -> &KernelConfig {
        &self.kernel
    }
    pub fn geometry(&self) -> &ObstacleGeometry {
        &self.geom
    }
    pub fn prefactor(&self) -> &Prefactor {
        &self.prefactor
    }
    pub fn resolution_warning(&self) -> Option<&str> {
        self.warning.as_deref()
    }

    /// Applies the operator to `density` at every grid node.
    pub fn apply(&self, density: &ScalarField) -> Result<NodalOutput, OperatorError> {
        if density.grid() != &self.grid {
            return Err(OperatorError::GridMismatch);
        }
        let g = &self.grid;
        let n = g.n_theta();
        let nr = g.n_r();
        let half = n / 2 + 1;

        // Ring spectra of the density, transposed to [frequency][ring].
        let ring_spectra: Vec<Vec<Complex64>> = density
            .values()
            .par_chunks(n)
            .map(|row| {
                let mut buf: Vec<Complex64> = row.iter().map(|&v| Complex64::new(v, 0.0)).collect();
                self.fft.process(&mut buf);
                buf.truncate(half);
                buf
            })
            .collect();
        let mut spectra = vec![Complex64::default(); half * nr];
        for (j, s) in ring_spectra.iter().enumerate() {
            for f in 0..half {
                spectra[f * nr + j] = s[f];
            }
        }

        let mut out = NodalOutput {
            potential: vec![0.0; g.len()],
            radial: vec![0.0; g.len()],
            azimuthal: vec![0.0; g.len()],
        };
        let rows: Vec<(usize, Vec<f64>, Vec<f64>, Vec<f64>)> = self
            .tables
            .par_iter()
            .map(|t| {
                let mut cs = vec![Complex64::default(); n];
                let mut cx = vec![Complex64::default(); n];
                let mut cy = vec![Complex64::default(); n];
                for f in 0..half {
                    let dens = &spectra[f * nr..(f + 1) * nr];
                    let ts = &t.potential[f * nr..(f + 1) * nr];
                    let tx = &t.radial[f * nr..(f + 1) * nr];
                    let ty = &t.azimuthal[f * nr..(f + 1) * nr];
                    let mut s = Complex64::default();
                    let mut x = Complex64::default();
                    let mut y = Complex64::default();
                    for j in 0..nr {
                        let d = dens[j];
                        s += d * ts[j];
                        x += d * tx[j];
                        y += d * ty[j];
                    }
                    // Correlation uses the conjugate kernel spectrum; the
                    // azimuthal spectrum is purely imaginary, i·b, so its
                    // conjugate contributes −i·b.
                    cs[f] = s;
                    cx[f] = x;
                    cy[f] = Complex64::new(y.im, -y.re);
                }
                for f in 1..n - half + 1 {
                    cs[n - f] = cs[f].conj();
                    cx[n - f] = cx[f].conj();
                    cy[n - f] = cy[f].conj();
                }
                self.ifft.process(&mut cs);
                self.ifft.process(&mut cx);
                self.ifft.process(&mut cy);
                let scale = 1.0 / n as f64;
                let r = g.radius(t.ring);
                let p = self.prefactor.value(r);
                let dp = self.prefactor.derivative(r);
                let mut pot = vec![0.0; n];
                let mut vr = vec![0.0; n];
                let mut vt = vec![0.0; n];
                for k in 0..n {
                    let integral = cs[k].re * scale;
                    let ir = cx[k].re * scale;
                    let it = cy[k].re * scale;
                    pot[k] = p * integral;
                    vr[k] = -p * it;
                    vt[k] = p * ir + dp * integral;
                }
                (t.ring, pot, vr, vt)
            })
            .collect();
        for (i, pot, vr, vt) in rows {
            let base = i * n;
            out.potential[base..base + n].copy_from_slice(&pot);
            out.radial[base..base + n].copy_from_slice(&vr);
            out.azimuthal[base..base + n].copy_from_slice(&vt);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::BlendProfile;

    fn setup() -> (GridSpec, KernelConfig, ObstacleGeometry) {
        (
            GridSpec::new(1.0, 4.0, 24, 48).unwrap(),
            KernelConfig::new(0.25, 0.5, BlendProfile::default()).unwrap(),
            ObstacleGeometry::new(1.0).unwrap(),
        )
    }

    #[test]
    fn prefactor_support() {
        let (_, k, g) = setup();
        let p = Prefactor::new(&k, &g);
        assert_eq!(p.value(1.2), 0.0);
        assert_eq!(p.value(1.6), 1.0);
        assert_eq!(p.value(8.5), 0.0);
        assert!(p.value(1.4) > 0.0 && p.value(1.4) < 1.0);
        let h = 1e-6;
        for r in [1.3, 1.42, 4.3, 6.0, 7.7] {
            let fd = (p.value(r + h) - p.value(r - h)) / (2.0 * h);
            assert!((fd - p.derivative(r)).abs() < 1e-6);
        }
    }

    #[test]
    fn fft_path_matches_direct_sum() {
        let (grid, k, g) = setup();
        let density = ScalarField::from_fn(grid, 0.0, |p| {
            (-(p - Vec2::new(2.0, 0.7)).norm_squared() * 2.0).exp() + 0.3 * p.y.sin() / p.norm()
        });
        let op = BiotSavartOperator::new(grid, k, g).unwrap();
        let out = op.apply(&density).unwrap();
        let q = PointQuadrature::new(&density, &k, &g).unwrap();
        let mut max_v = 0.0_f64;
        let mut err = 0.0_f64;
        for i in 0..grid.n_r() {
            for kk in 0..grid.n_theta() {
                let x = grid.node(i, kk);
                let s = q.eval(x);
                let idx = grid.index(i, kk);
                let (sn, cs) = grid.angle(kk).sin_cos();
                let vr = s.velocity.x * cs + s.velocity.y * sn;
                let vt = -s.velocity.x * sn + s.velocity.y * cs;
                max_v = max_v.max(s.velocity.norm()).max(s.potential.abs());
                err = err
                    .max((vr - out.radial[idx]).abs())
                    .max((vt - out.azimuthal[idx]).abs())
                    .max((s.potential - out.potential[idx]).abs());
            }
        }
        assert!(err < 1e-12 * max_v.max(1.0), "err {err} max {max_v}");
    }

    #[test]
    fn rejects_bad_setups() {
        let (_, k, g) = setup();
        let wide = GridSpec::new(1.0, 9.0, 24, 48).unwrap();
        assert!(matches!(BiotSavartOperator::new(wide, k, g), Err(OperatorError::OuterCutoff { .. })));
        let shifted = GridSpec::new(1.1, 4.0, 24, 48).unwrap();
        assert!(matches!(BiotSavartOperator::new(shifted, k, g), Err(OperatorError::InnerRadius { .. })));
    }
}
