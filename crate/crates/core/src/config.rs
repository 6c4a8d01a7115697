//! TOML run configuration.
//!
//! Every key has a default, so an empty file is a valid reference run.
//! Unknown keys are rejected, and value errors name the offending key with
//! its line in the source when it can be located.

use crate::field::GridSpec;
use crate::green::ObstacleGeometry;
use crate::kernels::{BlendProfile, KernelConfig};
use crate::motion::{Mode, RigidMotionSpec, Trajectory};
use crate::scheme::{InitialDatum, SimConfig};
use crate::transport::Frame;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
    #[error("{}[{section}] {key}: {reason}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Invalid { section: &'static str, key: &'static str, line: Option<usize>, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub r_max: f64,
    pub n_r: usize,
    pub n_theta: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { r_max: 6.0, n_r: 128, n_theta: 256 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObstacleSection {
    pub radius: f64,
}

impl Default for ObstacleSection {
    fn default() -> Self {
        Self { radius: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlendKind {
    Quintic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSection {
    pub delta: f64,
    pub cutoff_width: f64,
    pub blend_profile: BlendKind,
    pub blend_peak: f64,
}

impl Default for KernelSection {
    fn default() -> Self {
        Self { delta: 0.1, cutoff_width: 0.5, blend_profile: BlendKind::Quintic, blend_peak: 1.5 }
    }
}

/// Trajectory as written in the file: up to five polynomial coefficients.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectorySection {
    pub poly: Vec<f64>,
    pub modes: Vec<Mode>,
}

impl TrajectorySection {
    fn from_trajectory(t: &Trajectory) -> Self {
        let n = t.poly.iter().rposition(|&c| c != 0.0).map_or(0, |p| p + 1);
        Self { poly: t.poly[..n].to_vec(), modes: t.modes.clone() }
    }

    fn to_trajectory(&self) -> Option<Trajectory> {
        if self.poly.len() > 5 {
            return None;
        }
        let mut poly = [0.0; 5];
        poly[..self.poly.len()].copy_from_slice(&self.poly);
        Some(Trajectory { poly, modes: self.modes.clone() })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionSection {
    pub frame: Frame,
    pub center_x: TrajectorySection,
    pub center_y: TrajectorySection,
    pub angle: TrajectorySection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeSection {
    pub dt: f64,
    pub t_end: f64,
    pub picard_tol: f64,
    pub picard_max: usize,
    pub limiter: bool,
}

impl Default for TimeSection {
    fn default() -> Self {
        Self { dt: 2e-3, t_end: 1.0, picard_tol: 1e-8, picard_max: 25, limiter: true }
    }
}

/// Initial datum; which keys apply depends on `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSection {
    pub kind: String,
    pub amplitude: f64,
    pub center: [f64; 2],
    pub width: f64,
    pub radius: f64,
    pub mode: u32,
    pub modulation: f64,
    pub inner: f64,
    pub outer: f64,
    pub plateau_r0: f64,
    pub window_ramp: f64,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            kind: "gaussian_bump".into(),
            amplitude: 1.0,
            center: [2.5, 0.0],
            width: 0.4,
            radius: 2.5,
            mode: 0,
            modulation: 0.0,
            inner: 1.5,
            outer: 3.5,
            plateau_r0: 0.5,
            window_ramp: 0.25,
        }
    }
}

impl InitialSection {
    fn datum(&self) -> Result<InitialDatum, String> {
        Ok(match self.kind.as_str() {
            "zero" => InitialDatum::Zero,
            "gaussian_bump" => InitialDatum::GaussianBump { amplitude: self.amplitude, center: self.center, width: self.width },
            "gaussian_annulus" => InitialDatum::GaussianAnnulus {
                amplitude: self.amplitude,
                radius: self.radius,
                width: self.width,
                mode: self.mode,
                modulation: self.modulation,
            },
            "radial_bump" => InitialDatum::RadialBump { amplitude: self.amplitude, inner: self.inner, outer: self.outer },
            other => {
                return Err(format!(
                    "unknown kind `{other}`, expected one of zero, gaussian_bump, gaussian_annulus, radial_bump"
                ))
            }
        })
    }

    fn from_datum(d: &InitialDatum, plateau_r0: f64, window_ramp: f64) -> Self {
        let mut s = Self { plateau_r0, window_ramp, ..Self::default() };
        match *d {
            InitialDatum::Zero => s.kind = "zero".into(),
            InitialDatum::GaussianBump { amplitude, center, width } => {
                s.kind = "gaussian_bump".into();
                (s.amplitude, s.center, s.width) = (amplitude, center, width);
            }
            InitialDatum::GaussianAnnulus { amplitude, radius, width, mode, modulation } => {
                s.kind = "gaussian_annulus".into();
                (s.amplitude, s.radius, s.width, s.mode, s.modulation) = (amplitude, radius, width, mode, modulation);
            }
            InitialDatum::RadialBump { amplitude, inner, outer } => {
                s.kind = "radial_bump".into();
                (s.amplitude, s.inner, s.outer) = (amplitude, inner, outer);
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsSection {
    pub grad_threshold: f64,
    pub blowup_bound: f64,
    pub refined_rings: usize,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        Self { grad_threshold: 1e-6, blowup_bound: 1e3, refined_rings: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Steps between stored fields; 0 keeps only the first and last.
    pub snapshot_every: usize,
    /// Steps between checkpoints; 0 writes only the final one.
    pub checkpoint_every: usize,
    /// Also write fields as CSV next to the binary files.
    pub csv_snapshots: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("sqgo-out"), snapshot_every: 0, checkpoint_every: 0, csv_snapshots: false }
    }
}

/// Whole configuration file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub grid: GridSection,
    pub obstacle: ObstacleSection,
    pub kernel: KernelSection,
    pub motion: MotionSection,
    pub time: TimeSection,
    pub initial: InitialSection,
    pub diagnostics: DiagnosticsSection,
    pub output: OutputSection,
}

/// Line of `key = ...` inside `[section]` (or a dotted sub-table of it).
fn line_of(source: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (n, raw) in source.lines().enumerate() {
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix('[') {
            current = rest.trim_start_matches('[').split(']').next().unwrap_or("").trim().to_string();
            continue;
        }
        let in_section = current == section || current.starts_with(&format!("{section}."));
        if in_section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(n + 1);
                }
            }
        }
    }
    None
}

impl ConfigFile {
    pub fn parse(source: &str) -> Result<Self, ConfigError> {
        toml::from_str(source).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("configuration serializes")
    }

    /// Echo of a programmatic configuration.
    pub fn from_sim(cfg: &SimConfig, output: &OutputSection) -> Self {
        let BlendProfile::Quintic { peak } = cfg.kernel.blend();
        Self {
            grid: GridSection { r_max: cfg.grid.r_max(), n_r: cfg.grid.n_r(), n_theta: cfg.grid.n_theta() },
            obstacle: ObstacleSection { radius: cfg.geom.radius() },
            kernel: KernelSection {
                delta: cfg.kernel.delta(),
                cutoff_width: cfg.kernel.cutoff_width(),
                blend_profile: BlendKind::Quintic,
                blend_peak: peak,
            },
            motion: MotionSection {
                frame: cfg.frame,
                center_x: TrajectorySection::from_trajectory(&cfg.motion.center_x),
                center_y: TrajectorySection::from_trajectory(&cfg.motion.center_y),
                angle: TrajectorySection::from_trajectory(&cfg.motion.angle),
            },
            time: TimeSection {
                dt: cfg.dt,
                t_end: cfg.t_end,
                picard_tol: cfg.picard_tol,
                picard_max: cfg.picard_max,
                limiter: cfg.limiter,
            },
            initial: InitialSection::from_datum(&cfg.initial, cfg.plateau_r0, cfg.window_ramp),
            diagnostics: DiagnosticsSection {
                grad_threshold: cfg.grad_threshold,
                blowup_bound: cfg.blowup_bound,
                refined_rings: cfg.refined_rings,
            },
            output: OutputSection { snapshot_every: cfg.snapshot_every, ..output.clone() },
        }
    }

    /// Builds the validated simulation configuration. `source` is used only
    /// to attach line numbers to errors.
    pub fn to_sim(&self, source: Option<&str>) -> Result<SimConfig, ConfigError> {
        let err = |section: &'static str, key: &'static str, reason: String| ConfigError::Invalid {
            section,
            key,
            line: source.and_then(|s| line_of(s, section, key)),
            reason,
        };
        let t = &self.time;
        if !(t.dt.is_finite() && t.dt > 0.0) {
            return Err(err("time", "dt", format!("must be positive, got {}", t.dt)));
        }
        if !(t.t_end.is_finite() && t.t_end >= 0.0) {
            return Err(err("time", "t_end", format!("must be non-negative, got {}", t.t_end)));
        }
        if !(t.picard_tol > 0.0) {
            return Err(err("time", "picard_tol", format!("must be positive, got {}", t.picard_tol)));
        }
        if t.picard_max == 0 {
            return Err(err("time", "picard_max", "must be at least 1".into()));
        }
        let geom = ObstacleGeometry::new(self.obstacle.radius).map_err(|e| err("obstacle", "radius", e.to_string()))?;
        let g = &self.grid;
        let grid = GridSpec::new(geom.radius(), g.r_max, g.n_r, g.n_theta).map_err(|e| {
            let key = if g.n_r < 16 {
                "n_r"
            } else if g.n_theta < 32 || g.n_theta % 2 != 0 {
                "n_theta"
            } else {
                "r_max"
            };
            err("grid", key, e.to_string())
        })?;
        let k = &self.kernel;
        let blend = match k.blend_profile {
            BlendKind::Quintic => BlendProfile::Quintic { peak: k.blend_peak },
        };
        let kernel = KernelConfig::new(k.delta, k.cutoff_width, blend).map_err(|e| {
            let key = match e {
                crate::kernels::KernelError::BadDelta(_) => "delta",
                crate::kernels::KernelError::BadCutoffWidth(_) => "cutoff_width",
                _ => "blend_peak",
            };
            err("kernel", key, e.to_string())
        })?;
        grid.check_outer_cutoff(kernel.delta()).map_err(|e| err("grid", "r_max", e.to_string()))?;
        let traj = |key: &'static str, s: &TrajectorySection| {
            s.to_trajectory().ok_or_else(|| err("motion", key, format!("at most 5 polynomial coefficients, got {}", s.poly.len())))
        };
        let motion = RigidMotionSpec::new(
            traj("center_x", &self.motion.center_x)?,
            traj("center_y", &self.motion.center_y)?,
            traj("angle", &self.motion.angle)?,
        )
        .map_err(|e| err("motion", "poly", e.to_string()))?;
        if self.motion.frame == Frame::Lab && !motion.is_steady_spin() {
            return Err(err("motion", "frame", "the lab frame needs a steady spin about a fixed center".into()));
        }
        let i = &self.initial;
        let initial = i.datum().map_err(|r| err("initial", "kind", r))?;
        if !(i.plateau_r0 > 0.0) {
            return Err(err("initial", "plateau_r0", format!("must be positive, got {}", i.plateau_r0)));
        }
        if !(i.window_ramp > 0.0) {
            return Err(err("initial", "window_ramp", format!("must be positive, got {}", i.window_ramp)));
        }
        let d = &self.diagnostics;
        if !(d.grad_threshold > 0.0 && d.grad_threshold < 1.0) {
            return Err(err("diagnostics", "grad_threshold", format!("must lie in (0, 1), got {}", d.grad_threshold)));
        }
        if !(d.blowup_bound > 0.0) {
            return Err(err("diagnostics", "blowup_bound", format!("must be positive, got {}", d.blowup_bound)));
        }
        let cfg = SimConfig {
            grid,
            kernel,
            motion,
            geom,
            frame: self.motion.frame,
            dt: t.dt,
            t_end: t.t_end,
            picard_tol: t.picard_tol,
            picard_max: t.picard_max,
            initial,
            plateau_r0: i.plateau_r0,
            window_ramp: i.window_ramp,
            limiter: t.limiter,
            grad_threshold: d.grad_threshold,
            blowup_bound: d.blowup_bound,
            refined_rings: d.refined_rings,
            snapshot_every: self.output.snapshot_every,
        };
        cfg.validate().map_err(|e| err("initial", "plateau_r0", e.to_string()))?;
        Ok(cfg)
    }
}

/// Parses and validates a configuration held in memory.
pub fn parse_config(source: &str) -> Result<(SimConfig, OutputSection), ConfigError> {
    let file = ConfigFile::parse(source)?;
    let sim = file.to_sim(Some(source))?;
    Ok((sim, file.output))
}

pub fn load_config(path: &Path) -> Result<(SimConfig, OutputSection), ConfigError> {
    let source = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    parse_config(&source)
}
