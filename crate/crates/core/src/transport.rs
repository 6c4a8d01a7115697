//! Velocity reconstruction and semi-Lagrangian transport.
//!
//! In the body frame the velocity is
//! `v = ∇⊥ψ₂ − K_{F,δ}(ω̃ + Λψ₂) − ∇⊥φ`. The first and last terms combine
//! into `∇⊥(ψ₂ − φ)`, which is analytic and vanishes on the disk; the middle
//! term comes from the grid operator.
//!
//! A lab-frame variant is provided for a disk spinning steadily about the
//! origin, where the same scalar seen from the lab obeys
//! `u = ∇⊥ψ₂ − K_{F,δ}(ω − 2θ̇ + Λψ₂)`. It exists to cross-check the frame
//! change.

use crate::field::{GridError, GridSpec, ScalarField, Stencil};
use crate::fraclap::LambdaPsi2Basis;
use crate::green::{BiotSavartOperator, ObstacleGeometry, OperatorError, PointQuadrature};
use crate::kernels::KernelConfig;
use crate::motion::{corrective_velocity, grad_psi2, FrameSnapshot, RigidStream};
use crate::{perp, Vec2};
use rayon::prelude::*;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("step dt = {dt} moves fluid {travel:.3e} > half the smallest cell {limit:.3e}")]
    Cfl { dt: f64, travel: f64, limit: f64 },
    #[error("characteristic from {from:?} entered the obstacle by {depth:.3e}, more than one cell")]
    EnteredObstacle { from: [f64; 2], depth: f64 },
    #[error("the lab-frame law needs a steady spin about the origin")]
    LabFrameMotion,
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Frame in which the scalar and velocity are expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    #[default]
    Body,
    Lab,
}

impl Frame {
    /// Constant the scalar takes on the plateau and far away; the density
    /// fed to the operator is the scalar minus this offset.
    pub fn offset(&self, snap: &FrameSnapshot) -> f64 {
        match self {
            Frame::Body => 0.0,
            Frame::Lab => 2.0 * snap.theta_dot,
        }
    }
}

/// Analytic stream-function part of the velocity.
#[derive(Debug, Clone, Copy)]
struct AnalyticPart {
    stream: RigidStream,
    snap: FrameSnapshot,
    geom: ObstacleGeometry,
    cutoff_width: f64,
    frame: Frame,
}

impl AnalyticPart {
    #[inline]
    fn eval(&self, p: Vec2) -> Vec2 {
        match self.frame {
            Frame::Body => corrective_velocity(&self.stream, p, &self.geom, self.cutoff_width),
            Frame::Lab => perp(grad_psi2(&self.snap, p, &self.geom, self.cutoff_width)),
        }
    }
}

/// Exact operator evaluation near the disk.
#[derive(Debug, Clone)]
struct NearBoundary {
    quadrature: Arc<PointQuadrature>,
    band: f64,
}

/// Velocity sampled at the nodes, with a point-evaluation contract for
/// characteristic tracing.
///
/// Off the nodes the operator part is interpolated bicubically in polar
/// components, except within a band of a few cells around the disk where it
/// is recomputed by direct quadrature; the analytic part is evaluated
/// exactly everywhere.
#[derive(Debug, Clone)]
pub struct VelocityField {
    grid: GridSpec,
    radial: Vec<f64>,
    azimuthal: Vec<f64>,
    interp_radial: Vec<f64>,
    interp_azimuthal: Vec<f64>,
    analytic: Option<AnalyticPart>,
    near: Option<NearBoundary>,
    max_speed: f64,
}

impl VelocityField {
    /// Velocity known only through nodal polar components.
    pub fn from_polar(grid: GridSpec, radial: Vec<f64>, azimuthal: Vec<f64>) -> Result<Self, GridError> {
        if radial.len() != grid.len() || azimuthal.len() != grid.len() {
            return Err(GridError::Length { expected: grid.len(), got: radial.len().min(azimuthal.len()) });
        }
        let max_speed = radial.iter().zip(&azimuthal).fold(0.0_f64, |m, (a, b)| m.max(a.hypot(*b)));
        Ok(Self {
            grid,
            interp_radial: radial.clone(),
            interp_azimuthal: azimuthal.clone(),
            radial,
            azimuthal,
            analytic: None,
            near: None,
            max_speed,
        })
    }

    /// Samples a Cartesian velocity at the nodes.
    pub fn from_fn(grid: GridSpec, f: impl Fn(Vec2) -> Vec2 + Sync) -> Self {
        let (radial, azimuthal): (Vec<f64>, Vec<f64>) = (0..grid.len())
            .into_par_iter()
            .map(|idx| {
                let (i, k) = grid.ring_and_angle(idx);
                let v = f(grid.node(i, k));
                let (s, c) = grid.angle(k).sin_cos();
                (c * v.x + s * v.y, -s * v.x + c * v.y)
            })
            .unzip();
        Self::from_polar(grid, radial, azimuthal).expect("lengths match")
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }
    pub fn radial(&self) -> &[f64] {
        &self.radial
    }
    pub fn azimuthal(&self) -> &[f64] {
        &self.azimuthal
    }
    pub fn max_speed(&self) -> f64 {
        self.max_speed
    }

    /// Cartesian velocity at node `(i, k)`.
    pub fn node(&self, i: usize, k: usize) -> Vec2 {
        let idx = self.grid.index(i, k);
        let (s, c) = self.grid.angle(k).sin_cos();
        let (a, b) = (self.radial[idx], self.azimuthal[idx]);
        Vec2::new(c * a - s * b, s * a + c * b)
    }

    /// Velocity at an arbitrary point.
    pub fn at(&self, p: Vec2) -> Vec2 {
        let mut v = self.analytic.map_or(Vec2::zeros(), |a| a.eval(p));
        let r = p.norm();
        if let Some(near) = &self.near {
            if r - self.grid.r_min() < near.band {
                return v - near.quadrature.eval(p).velocity;
            }
        }
        if r == 0.0 {
            return v;
        }
        let st = Stencil::new(&self.grid, p);
        let nt = self.grid.n_theta();
        let a = st.apply(&self.interp_radial, nt);
        let b = st.apply(&self.interp_azimuthal, nt);
        let (c, s) = (p.x / r, p.y / r);
        v += Vec2::new(c * a - s * b, s * a + c * b);
        v
    }
}

/// Reusable velocity builder: operator spectra and `Λψ₂` profiles are
/// computed once per grid, kernel and obstacle.
#[derive(Debug)]
pub struct VelocityAssembler {
    operator: BiotSavartOperator,
    basis: LambdaPsi2Basis,
    kernel: KernelConfig,
    geom: ObstacleGeometry,
    frame: Frame,
    boundary_cells: f64,
}

impl VelocityAssembler {
    pub fn new(grid: GridSpec, kernel: KernelConfig, geom: ObstacleGeometry, frame: Frame) -> Result<Self, TransportError> {
        let operator = BiotSavartOperator::new(grid, kernel, geom)?;
        let basis = LambdaPsi2Basis::new(grid, &geom, kernel.cutoff_width());
        Ok(Self { operator, basis, kernel, geom, frame, boundary_cells: 3.0 })
    }

    pub fn grid(&self) -> &GridSpec {
        self.operator.grid()
    }
    pub fn frame(&self) -> Frame {
        self.frame
    }
    pub fn operator(&self) -> &BiotSavartOperator {
        &self.operator
    }
    pub fn lambda_basis(&self) -> &LambdaPsi2Basis {
        &self.basis
    }

    /// Density `ω − offset + Λψ₂` fed to the operator.
    pub fn density(&self, omega: &ScalarField, snap: &FrameSnapshot) -> Result<ScalarField, TransportError> {
        let lam = self.basis.field(snap);
        let off = self.frame.offset(snap);
        let mut d = omega.combine(1.0, &lam, 1.0)?;
        if off != 0.0 {
            d = d.map(|v| v - off);
        }
        Ok(d)
    }

    pub fn assemble(&self, omega: &ScalarField, snap: &FrameSnapshot) -> Result<VelocityField, TransportError> {
        let grid = *self.grid();
        let density = self.density(omega, snap)?;
        let out = self.operator.apply(&density)?;
        let interp_radial: Vec<f64> = out.radial.iter().map(|v| -v).collect();
        let interp_azimuthal: Vec<f64> = out.azimuthal.iter().map(|v| -v).collect();
        let analytic = AnalyticPart {
            stream: RigidStream::new(snap),
            snap: *snap,
            geom: self.geom,
            cutoff_width: self.kernel.cutoff_width(),
            frame: self.frame,
        };
        let nt = grid.n_theta();
        let trig: Vec<(f64, f64)> = (0..nt).map(|k| grid.angle(k).sin_cos()).collect();
        let (radial, azimuthal): (Vec<f64>, Vec<f64>) = (0..grid.len())
            .into_par_iter()
            .map(|idx| {
                let (i, k) = (idx / nt, idx % nt);
                let (s, c) = trig[k];
                let a = analytic.eval(grid.node(i, k));
                (c * a.x + s * a.y + interp_radial[idx], -s * a.x + c * a.y + interp_azimuthal[idx])
            })
            .unzip();
        let max_speed = radial.iter().zip(&azimuthal).fold(0.0_f64, |m, (a, b)| m.max(a.hypot(*b)));
        let near = Some(NearBoundary {
            quadrature: Arc::new(PointQuadrature::new(&density, &self.kernel, &self.geom)?),
            band: self.boundary_cells * grid.dr(),
        });
        Ok(VelocityField {
            grid,
            radial,
            azimuthal,
            interp_radial,
            interp_azimuthal,
            analytic: Some(analytic),
            near,
            max_speed,
        })
    }
}

/// One-shot body-frame velocity assembly.
pub fn assemble_velocity(
    omega: &ScalarField,
    snap: &FrameSnapshot,
    kernel: &KernelConfig,
    geom: &ObstacleGeometry,
) -> Result<VelocityField, TransportError> {
    VelocityAssembler::new(*omega.grid(), *kernel, *geom, Frame::Body)?.assemble(omega, snap)
}

/// `max |v·n|` over the innermost ring, relative to `max|v|`.
pub fn impermeability_residual(v: &VelocityField, _geom: &ObstacleGeometry) -> f64 {
    if v.max_speed == 0.0 {
        return 0.0;
    }
    let nt = v.grid.n_theta();
    v.radial[..nt].iter().fold(0.0_f64, |m, x| m.max(x.abs())) / v.max_speed
}

/// Foot of a backward characteristic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trace {
    pub foot: Vec2,
    /// The raw foot landed inside the disk and was projected onto it.
    pub clamped: bool,
}

/// One backward RK4 step of length `dt` from `p`.
pub fn trace_characteristic(p: Vec2, v: &VelocityField, dt: f64) -> Result<Trace, TransportError> {
    let k1 = v.at(p);
    let k2 = v.at(p - k1 * (0.5 * dt));
    let k3 = v.at(p - k2 * (0.5 * dt));
    let k4 = v.at(p - k3 * dt);
    let foot = p - (k1 + (k2 + k3) * 2.0 + k4) * (dt / 6.0);
    let rho = v.grid.r_min();
    let r = foot.norm();
    if r >= rho {
        return Ok(Trace { foot, clamped: false });
    }
    let depth = rho - r;
    if depth > v.grid.dr() || r == 0.0 {
        return Err(TransportError::EnteredObstacle { from: [p.x, p.y], depth });
    }
    Ok(Trace { foot: foot * (rho / r), clamped: true })
}

/// Plateau handling for one advection step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateauRule {
    /// Plateau width measured from the disk.
    pub radius: f64,
    /// Value the scalar takes on the plateau.
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdvectOptions {
    pub limiter: bool,
    pub plateau: Option<PlateauRule>,
}

impl Default for AdvectOptions {
    fn default() -> Self {
        Self { limiter: true, plateau: None }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AdvectStats {
    pub traced: usize,
    pub clamped: usize,
}

/// Largest admissible step for the advection accuracy bound.
pub fn cfl_limit(v: &VelocityField) -> f64 {
    0.5 * v.grid.min_cell_size()
}

/// Semi-Lagrangian step with the limiter on and no plateau rule.
pub fn advect_step(omega: &ScalarField, v: &VelocityField, dt: f64) -> Result<ScalarField, TransportError> {
    advect_step_with(omega, v, dt, &AdvectOptions::default()).map(|(f, _)| f)
}

/// Semi-Lagrangian step: every node takes the value of `omega` at the foot
/// of its backward characteristic.
///
/// With a plateau rule, nodes whose foot lies within the plateau take the
/// plateau value exactly; nodes deeper in the plateau than one step of
/// travel are not traced at all.
pub fn advect_step_with(
    omega: &ScalarField,
    v: &VelocityField,
    dt: f64,
    opts: &AdvectOptions,
) -> Result<(ScalarField, AdvectStats), TransportError> {
    let grid = *omega.grid();
    if grid != v.grid {
        return Err(GridError::Mismatch.into());
    }
    let travel = dt * v.max_speed;
    let limit = cfl_limit(v);
    if travel > limit {
        return Err(TransportError::Cfl { dt, travel, limit });
    }
    let nt = grid.n_theta();
    let rho = grid.r_min();
    let src = omega.values();
    let results: Vec<Result<(f64, bool, bool), TransportError>> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let (i, k) = (idx / nt, idx % nt);
            if let Some(pl) = opts.plateau {
                if grid.radius(i) - rho + travel < pl.radius {
                    return Ok((pl.value, false, false));
                }
            }
            let tr = trace_characteristic(grid.node(i, k), v, dt)?;
            if let Some(pl) = opts.plateau {
                if tr.foot.norm() - rho <= pl.radius {
                    return Ok((pl.value, true, tr.clamped));
                }
            }
            let st = Stencil::new(&grid, tr.foot);
            let val = if opts.limiter { st.apply_limited(src, nt) } else { st.apply(src, nt) };
            Ok((val, true, tr.clamped))
        })
        .collect();
    let mut values = Vec::with_capacity(grid.len());
    let mut stats = AdvectStats::default();
    for r in results {
        let (val, traced, clamped) = r?;
        values.push(val);
        stats.traced += traced as usize;
        stats.clamped += clamped as usize;
    }
    let field = ScalarField::new(grid, values, omega.time() + dt)?;
    Ok((field, stats))
}
