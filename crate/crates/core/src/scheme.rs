//! Time stepping with a per-step Picard iteration, and parameter studies.
//!
//! A step from `t` to `t + dt` iterates
//! `ω⁽ᵐ⁺¹⁾ = advect(ω(t), v(½(ω(t) + ω⁽ᵐ⁾), t + dt/2), dt)` from
//! `ω⁽⁰⁾ = ω(t)`: each iterate solves a linear transport problem with a
//! frozen midpoint velocity. The motion state is evaluated once per step at
//! `t + dt/2`, so `Λψ₂` is the same for every iterate of a step.

use crate::diagnostics::{
    directional_seminorm_with, lp_triplet, osgood_bound, plateau_radius, stability_compare,
    BlowupMonitor, DiagnosticsError, DiagnosticsRecord, DiagnosticsSeries, StabilityReport, Verdict,
};
use crate::field::{lp_norm, sobolev_distance, sobolev_norms, GridError, GridSpec, LpExponent, ScalarField};
use crate::green::ObstacleGeometry;
use crate::kernels::{KernelConfig, KernelError};
use crate::motion::{motion_eval, MotionError, RigidMotionSpec};
use crate::transport::{
    advect_step_with, impermeability_residual, AdvectOptions, Frame, PlateauRule, TransportError,
    VelocityAssembler, VelocityField,
};
use crate::Vec2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SchemeError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("Picard iteration did not converge in {iterations} iterations; residuals {residuals:?}")]
    NonConvergence { iterations: usize, residuals: Vec<f64> },
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Motion(#[from] MotionError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
}

/// `C^∞` step from 0 (`t ≤ 0`) to 1 (`t ≥ 1`).
fn smooth_step(t: f64) -> f64 {
    let e = |s: f64| if s <= 0.0 { 0.0 } else { (-1.0 / s).exp() };
    let a = e(t);
    let b = e(1.0 - t);
    if a + b == 0.0 {
        0.0
    } else {
        a / (a + b)
    }
}

/// Parametric initial scalar, multiplied by smooth windows that vanish on
/// the initial plateau and near the outer edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialDatum {
    Zero,
    GaussianBump {
        amplitude: f64,
        center: [f64; 2],
        width: f64,
    },
    /// `A·exp(−(r − r₀)²/w²)·(1 + m·cos(kθ))`.
    GaussianAnnulus {
        amplitude: f64,
        radius: f64,
        width: f64,
        #[serde(default)]
        mode: u32,
        #[serde(default)]
        modulation: f64,
    },
    /// Radial bump `A·exp(1 − 1/(1 − s²))` on `inner < r < outer`,
    /// `s` the position scaled to `[−1, 1]`.
    RadialBump {
        amplitude: f64,
        inner: f64,
        outer: f64,
    },
}

impl InitialDatum {
    /// Value before windowing.
    fn raw(&self, p: Vec2) -> f64 {
        match *self {
            InitialDatum::Zero => 0.0,
            InitialDatum::GaussianBump { amplitude, center, width } => {
                let d = p - Vec2::new(center[0], center[1]);
                amplitude * (-d.norm_squared() / (width * width)).exp()
            }
            InitialDatum::GaussianAnnulus { amplitude, radius, width, mode, modulation } => {
                let r = p.norm();
                let th = p.y.atan2(p.x);
                let u = (r - radius) / width;
                amplitude * (-u * u).exp() * (1.0 + modulation * (mode as f64 * th).cos())
            }
            InitialDatum::RadialBump { amplitude, inner, outer } => {
                let r = p.norm();
                if r <= inner || r >= outer {
                    0.0
                } else {
                    let s = (2.0 * r - inner - outer) / (outer - inner);
                    amplitude * (1.0 - 1.0 / (1.0 - s * s)).exp()
                }
            }
        }
    }

    /// Samples the datum on `grid` with the plateau and outer windows.
    pub fn sample(&self, grid: &GridSpec, plateau_r0: f64, ramp: f64) -> ScalarField {
        let inner = grid.r_min() + plateau_r0;
        let outer = grid.r_max() - 2.0 * grid.dr();
        ScalarField::from_fn(*grid, 0.0, |p| {
            let r = p.norm();
            let w = smooth_step((r - inner) / ramp) * smooth_step((outer - r) / ramp);
            if w == 0.0 {
                0.0
            } else {
                w * self.raw(p)
            }
        })
    }
}

/// Everything a run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub grid: GridSpec,
    pub kernel: KernelConfig,
    pub motion: RigidMotionSpec,
    pub geom: ObstacleGeometry,
    pub frame: Frame,
    pub dt: f64,
    pub t_end: f64,
    pub picard_tol: f64,
    pub picard_max: usize,
    pub initial: InitialDatum,
    pub plateau_r0: f64,
    /// Width of the smooth windows applied to the initial datum.
    pub window_ramp: f64,
    pub limiter: bool,
    pub grad_threshold: f64,
    pub blowup_bound: f64,
    pub refined_rings: usize,
    /// Keep every n-th field in the returned trajectory (0 keeps only the
    /// first and last).
    pub snapshot_every: usize,
}

impl SimConfig {
    /// Reference setup: `r ∈ [1, 6]` on 128 × 256 nodes, `δ = 0.1`,
    /// `a = 0.5`, `dt = 2·10⁻³` up to `t = 1`.
    pub fn reference(motion: RigidMotionSpec, initial: InitialDatum) -> Self {
        Self {
            grid: GridSpec::new(1.0, 6.0, 128, 256).expect("valid grid"),
            kernel: KernelConfig::new(0.1, 0.5, Default::default()).expect("valid kernel"),
            motion,
            geom: ObstacleGeometry::new(1.0).expect("valid radius"),
            frame: Frame::Body,
            dt: 2e-3,
            t_end: 1.0,
            picard_tol: 1e-8,
            picard_max: 25,
            initial,
            plateau_r0: 0.5,
            window_ramp: 0.25,
            limiter: true,
            grad_threshold: 1e-6,
            blowup_bound: 1e3,
            refined_rings: 8,
            snapshot_every: 0,
        }
    }

    pub fn validate(&self) -> Result<(), SchemeError> {
        let bad = |m: String| Err(SchemeError::Config(m));
        self.grid.check_outer_cutoff(self.kernel.delta())?;
        if (self.grid.r_min() - self.geom.radius()).abs() > 1e-12 * self.geom.radius() {
            return bad(format!(
                "grid inner radius {} must equal the obstacle radius {}",
                self.grid.r_min(),
                self.geom.radius()
            ));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("time step must be positive, got {}", self.dt));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return bad(format!("final time must be non-negative, got {}", self.t_end));
        }
        if !(self.picard_tol > 0.0) || self.picard_max == 0 {
            return bad("Picard tolerance and iteration cap must be positive".into());
        }
        if !(self.plateau_r0 > 0.0) || !(self.window_ramp > 0.0) {
            return bad("initial plateau width and window ramp must be positive".into());
        }
        if self.grid.r_min() + self.plateau_r0 + self.window_ramp >= self.grid.r_max() - 2.0 * self.grid.dr() {
            return bad("initial plateau and windows leave no room for the datum".into());
        }
        if !(self.grad_threshold > 0.0 && self.grad_threshold < 1.0) {
            return bad(format!("gradient threshold must lie in (0, 1), got {}", self.grad_threshold));
        }
        if !(self.blowup_bound > 0.0) {
            return bad("blow-up bound must be positive".into());
        }
        self.motion.validate()?;
        if self.frame == Frame::Lab && !self.motion.is_steady_spin() {
            return Err(TransportError::LabFrameMotion.into());
        }
        Ok(())
    }

    pub fn initial_field(&self) -> ScalarField {
        let mut f = self.initial.sample(&self.grid, self.plateau_r0, self.window_ramp);
        if self.frame == Frame::Lab {
            // The lab-frame scalar carries the constant 2θ̇ away from the bump.
            let snap = motion_eval(&self.motion, 0.0).expect("t = 0 is valid");
            let off = self.frame.offset(&snap);
            f = f.map(|v| v + off);
        }
        f
    }

    /// Number of steps and the time of step `k`.
    pub fn step_count(&self) -> usize {
        if self.t_end == 0.0 {
            0
        } else {
            (self.t_end / self.dt - 1e-9).ceil() as usize
        }
    }

    pub fn step_time(&self, k: usize) -> f64 {
        (k as f64 * self.dt).min(self.t_end)
    }
}

/// Iterations and residuals of one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardRecord {
    pub iterations: usize,
    pub residuals: Vec<f64>,
}

/// State after an accepted step.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub omega: ScalarField,
    pub step: usize,
    pub t: f64,
    pub diagnostics: DiagnosticsSeries,
    pub picard_history: Vec<PicardRecord>,
    pub monitor: BlowupMonitor,
    pub seminorm_integral: f64,
    pub initial_plateau: f64,
    pub clamped: usize,
}

/// Result of [`Simulation::run`].
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub state: SimState,
    pub trajectory: Vec<ScalarField>,
    pub verdict: Verdict,
    pub warnings: Vec<String>,
}

/// A configured simulation with its precomputed operators.
#[derive(Debug)]
pub struct Simulation {
    cfg: SimConfig,
    assembler: VelocityAssembler,
}

/// Outcome of one Picard step before diagnostics.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub omega: ScalarField,
    pub velocity: VelocityField,
    pub record: PicardRecord,
    pub clamped: usize,
}

impl Simulation {
    pub fn new(cfg: SimConfig) -> Result<Self, SchemeError> {
        cfg.validate()?;
        let assembler = VelocityAssembler::new(cfg.grid, cfg.kernel, cfg.geom, cfg.frame)?;
        Ok(Self { cfg, assembler })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }
    pub fn assembler(&self) -> &VelocityAssembler {
        &self.assembler
    }

    fn anomaly(&self, omega: &ScalarField, t: f64) -> Result<(ScalarField, f64), SchemeError> {
        let off = self.cfg.frame.offset(&motion_eval(&self.cfg.motion, t)?);
        Ok((if off == 0.0 { omega.clone() } else { omega.map(|v| v - off) }, off))
    }

    fn record(
        &self,
        state: &mut SimState,
        velocity: &VelocityField,
        dt: f64,
        iterations: usize,
    ) -> Result<(), SchemeError> {
        let (anomaly, _) = self.anomaly(&state.omega, state.t)?;
        let r = plateau_radius(&anomaly, &self.cfg.geom, self.cfg.grad_threshold);
        let n = directional_seminorm_with(velocity, &self.cfg.geom, self.cfg.refined_rings);
        let (l1, l2, linf) = lp_triplet(&anomaly);
        let hs = sobolev_norms(&anomaly, 4);
        if state.diagnostics.records.is_empty() {
            state.initial_plateau = r;
        } else {
            state.seminorm_integral += n * dt;
            state.monitor.accumulate(hs[2], dt);
        }
        state.diagnostics.push(DiagnosticsRecord {
            t: state.t,
            plateau_radius: r,
            seminorm: n,
            l1,
            l2,
            linf,
            h: [hs[1], hs[2], hs[3], hs[4]],
            blowup_integral: state.monitor.integral,
            osgood_bound: osgood_bound(state.initial_plateau, state.seminorm_integral),
            picard_iters: iterations,
            impermeability: impermeability_residual(velocity, &self.cfg.geom),
        });
        Ok(())
    }

    /// Initial state with its diagnostics row.
    pub fn initial_state(&self) -> Result<SimState, SchemeError> {
        let omega = self.cfg.initial_field();
        let mut state = SimState {
            omega,
            step: 0,
            t: 0.0,
            diagnostics: DiagnosticsSeries::default(),
            picard_history: Vec::new(),
            monitor: BlowupMonitor::new(self.cfg.blowup_bound),
            seminorm_integral: 0.0,
            initial_plateau: 0.0,
            clamped: 0,
        };
        let v = self.assembler.assemble(&state.omega, &motion_eval(&self.cfg.motion, 0.0)?)?;
        self.record(&mut state, &v, 0.0, 0)?;
        Ok(state)
    }

    /// One Picard-iterated step from `state`.
    pub fn picard_step(&self, state: &SimState) -> Result<StepOutcome, SchemeError> {
        let t0 = state.t;
        let t1 = self.cfg.step_time(state.step + 1);
        let dt = t1 - t0;
        let mid = motion_eval(&self.cfg.motion, t0 + 0.5 * dt)?;
        let (_, off) = self.anomaly(&state.omega, t0)?;
        let plateau = state.diagnostics.last().map(|r| r.plateau_radius).unwrap_or(0.0);
        let opts = AdvectOptions { limiter: self.cfg.limiter, plateau: Some(PlateauRule { radius: plateau, value: off }) };
        let base = &state.omega;
        let mut current = base.clone();
        let mut residuals = Vec::new();
        let mut last: Option<(ScalarField, VelocityField, usize)> = None;
        for _ in 0..self.cfg.picard_max {
            let midpoint = base.combine(0.5, &current, 0.5)?;
            let v = self.assembler.assemble(&midpoint, &mid)?;
            let (next, stats) = advect_step_with(base, &v, dt, &opts)?;
            let diff = lp_norm(&next.combine(1.0, &current, -1.0)?, LpExponent::Finite(2.0));
            let scale = lp_norm(&next.map(|x| x - off), LpExponent::Finite(2.0))
                .max(lp_norm(&current.map(|x| x - off), LpExponent::Finite(2.0)));
            let res = if diff == 0.0 { 0.0 } else { diff / scale };
            residuals.push(res);
            current = next.clone();
            last = Some((next, v, stats.clamped));
            if res <= self.cfg.picard_tol {
                break;
            }
        }
        let final_res = *residuals.last().expect("at least one iteration");
        if final_res > self.cfg.picard_tol {
            if final_res > 10.0 * self.cfg.picard_tol {
                return Err(SchemeError::NonConvergence { iterations: residuals.len(), residuals });
            }
            log::warn!("step at t = {t0}: Picard stopped at residual {final_res:.3e} after the iteration cap");
        }
        let (mut omega, velocity, clamped) = last.expect("at least one iteration");
        omega.set_time(t1);
        Ok(StepOutcome { omega, velocity, record: PicardRecord { iterations: residuals.len(), residuals }, clamped })
    }

    /// Advances `state` by one step and records diagnostics. Returns the
    /// verdict after the step.
    pub fn advance(&self, state: &mut SimState) -> Result<Verdict, SchemeError> {
        let t0 = state.t;
        let out = self.picard_step(state)?;
        state.step += 1;
        state.t = self.cfg.step_time(state.step);
        let dt = state.t - t0;
        state.omega = out.omega;
        state.clamped += out.clamped;
        let iters = out.record.iterations;
        state.picard_history.push(out.record);
        self.record(state, &out.velocity, dt, iters)?;
        Ok(self.verdict(state))
    }

    fn verdict(&self, state: &SimState) -> Verdict {
        let too_thin = state.diagnostics.last().is_some_and(|r| r.plateau_radius < 2.0 * self.cfg.grid.dr());
        if state.monitor.verdict == Verdict::BlowupSuspected || too_thin {
            Verdict::BlowupSuspected
        } else {
            Verdict::Continue
        }
    }

    /// Runs from `state` to the final time, or until the blow-up monitor
    /// trips.
    pub fn run_from(&self, mut state: SimState) -> Result<RunOutput, SchemeError> {
        let mut trajectory = vec![state.omega.clone()];
        let mut verdict = self.verdict(&state);
        let n = self.cfg.step_count();
        while state.step < n && verdict == Verdict::Continue {
            verdict = self.advance(&mut state)?;
            let every = self.cfg.snapshot_every;
            if (every > 0 && state.step % every == 0) || state.step == n || verdict != Verdict::Continue {
                trajectory.push(state.omega.clone());
            }
        }
        let warnings = self.assembler.operator().resolution_warning().map(str::to_string).into_iter().collect();
        Ok(RunOutput { state, trajectory, verdict, warnings })
    }

    pub fn run(&self) -> Result<RunOutput, SchemeError> {
        self.run_from(self.initial_state()?)
    }
}

/// Runs `cfg` from its initial datum to `t_end`.
pub fn run_simulation(cfg: &SimConfig) -> Result<RunOutput, SchemeError> {
    Simulation::new(cfg.clone())?.run()
}

/// Distances between end states of consecutive `δ` values.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationTable {
    pub deltas: Vec<f64>,
    /// `(δ_k, δ_{k+1}, L² distance, H¹ distance)`.
    pub distances: Vec<(f64, f64, f64, f64)>,
    pub cauchy: bool,
    pub warnings: Vec<String>,
}

pub fn delta_continuation_study(cfg: &SimConfig, deltas: &[f64]) -> Result<ContinuationTable, SchemeError> {
    if deltas.len() < 2 {
        return Err(SchemeError::Config(format!("the study needs at least two values of delta, got {}", deltas.len())));
    }
    let mut ends = Vec::with_capacity(deltas.len());
    let mut warnings = Vec::new();
    for &d in deltas {
        let mut c = cfg.clone();
        c.kernel = cfg.kernel.with_delta(d)?;
        let out = run_simulation(&c)?;
        warnings.extend(out.warnings);
        ends.push(out.state.omega);
    }
    let mut distances = Vec::new();
    for k in 0..deltas.len() - 1 {
        let l2 = lp_norm(&ends[k].combine(1.0, &ends[k + 1], -1.0)?, LpExponent::Finite(2.0));
        let h1 = sobolev_distance(&ends[k], &ends[k + 1], 1)?;
        distances.push((deltas[k], deltas[k + 1], l2, h1));
    }
    let cauchy = distances.windows(2).all(|w| w[1].2 < w[0].2 && w[1].3 < w[0].3);
    Ok(ContinuationTable { deltas: deltas.to_vec(), distances, cauchy, warnings })
}

/// Default perturbation shape for stability studies: a bump halfway
/// between the plateau edge and the outer boundary.
pub fn default_perturbation(cfg: &SimConfig) -> InitialDatum {
    let r = 0.5 * (cfg.grid.r_min() + cfg.plateau_r0 + cfg.grid.r_max());
    InitialDatum::GaussianBump { amplitude: 1.0, center: [0.0, r.min(cfg.grid.r_min() + cfg.plateau_r0 + 1.0)], width: 0.4 }
}

/// Base run and perturbed runs `ω₀ + ε·p/‖p‖` for each `ε`.
#[derive(Debug, Clone)]
pub struct StabilityStudy {
    pub epsilons: Vec<f64>,
    pub reports: Vec<StabilityReport>,
}

pub fn stability_study(
    cfg: &SimConfig,
    perturbation: &InitialDatum,
    epsilons: &[f64],
    base: Option<&RunOutput>,
) -> Result<StabilityStudy, SchemeError> {
    if epsilons.is_empty() {
        return Err(SchemeError::Config("the study needs at least one perturbation size".into()));
    }
    let sim = Simulation::new(cfg.clone())?;
    let owned;
    let base = match base {
        Some(b) => b,
        None => {
            owned = sim.run()?;
            &owned
        }
    };
    let shape = perturbation.sample(&cfg.grid, cfg.plateau_r0, cfg.window_ramp);
    let norm = lp_norm(&shape, LpExponent::Finite(2.0));
    if norm == 0.0 {
        return Err(SchemeError::Config("perturbation vanishes on the grid".into()));
    }
    let mut reports = Vec::new();
    for &eps in epsilons {
        let mut state = sim.initial_state()?;
        state.omega = state.omega.combine(1.0, &shape, eps / norm)?;
        state.diagnostics = DiagnosticsSeries::default();
        let v = sim.assembler.assemble(&state.omega, &motion_eval(&cfg.motion, 0.0)?)?;
        sim.record(&mut state, &v, 0.0, 0)?;
        let out = sim.run_from(state)?;
        reports.push(stability_compare(&base.trajectory, &out.trajectory)?);
    }
    Ok(StabilityStudy { epsilons: epsilons.to_vec(), reports })
}
