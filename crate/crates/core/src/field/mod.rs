//! Annular polar grid and scalar fields living on it.
//!
//! Nodes are cell-centered in `r` and uniform in `θ`: node `(i, k)` sits at
//! `r_i = r_min + (i + ½)Δr`, `θ_k = kΔθ`, and values are stored radial-major
//! (`index = i·n_theta + k`).

mod interp;
mod io;
mod norms;

pub use interp::{interpolate, interpolate_limited, Stencil};
pub use io::{read_snapshot, read_snapshot_csv, write_snapshot, write_snapshot_csv, SnapshotError};
pub use norms::{
    cartesian_gradient, level_set_measure, lp_norm, polar_divergence, sobolev_distance, sobolev_norm,
    sobolev_norms, LpExponent,
};

use crate::Vec2;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid needs 0 < r_min < r_max, got r_min = {r_min}, r_max = {r_max}")]
    Radii { r_min: f64, r_max: f64 },
    #[error("grid needs n_r >= 16, got {0}")]
    TooFewRings(usize),
    #[error("grid needs an even n_theta >= 32, got {0}")]
    BadAngularCount(usize),
    #[error("outer cutoff vanishes beyond 2/delta = {limit}; r_max = {r_max} exceeds it")]
    OuterCutoff { r_max: f64, limit: f64 },
    #[error("value array has {got} entries, grid has {expected} nodes")]
    Length { expected: usize, got: usize },
    #[error("non-finite value at node {0}")]
    NonFinite(usize),
    #[error("fields live on different grids")]
    Mismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GridSpec {
    r_min: f64,
    r_max: f64,
    n_r: usize,
    n_theta: usize,
}

impl GridSpec {
    pub fn new(r_min: f64, r_max: f64, n_r: usize, n_theta: usize) -> Result<Self, GridError> {
        if !(r_min.is_finite() && r_max.is_finite() && r_min > 0.0 && r_min < r_max) {
            return Err(GridError::Radii { r_min, r_max });
        }
        if n_r < 16 {
            return Err(GridError::TooFewRings(n_r));
        }
        if n_theta < 32 || n_theta % 2 != 0 {
            return Err(GridError::BadAngularCount(n_theta));
        }
        Ok(Self { r_min, r_max, n_r, n_theta })
    }

    /// Checks compatibility with the outer cutoff of the regularized operator.
    pub fn check_outer_cutoff(&self, delta: f64) -> Result<(), GridError> {
        let limit = 2.0 / delta;
        if self.r_max > limit {
            return Err(GridError::OuterCutoff { r_max: self.r_max, limit });
        }
        Ok(())
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }
    pub fn r_max(&self) -> f64 {
        self.r_max
    }
    pub fn n_r(&self) -> usize {
        self.n_r
    }
    pub fn n_theta(&self) -> usize {
        self.n_theta
    }
    pub fn len(&self) -> usize {
        self.n_r * self.n_theta
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn dr(&self) -> f64 {
        (self.r_max - self.r_min) / self.n_r as f64
    }
    pub fn dtheta(&self) -> f64 {
        std::f64::consts::TAU / self.n_theta as f64
    }
    #[inline]
    pub fn radius(&self, i: usize) -> f64 {
        self.r_min + (i as f64 + 0.5) * self.dr()
    }
    #[inline]
    pub fn angle(&self, k: usize) -> f64 {
        k as f64 * self.dtheta()
    }
    #[inline]
    pub fn index(&self, i: usize, k: usize) -> usize {
        i * self.n_theta + k
    }
    #[inline]
    pub fn ring_and_angle(&self, idx: usize) -> (usize, usize) {
        (idx / self.n_theta, idx % self.n_theta)
    }
    #[inline]
    pub fn node(&self, i: usize, k: usize) -> Vec2 {
        let (s, c) = self.angle(k).sin_cos();
        Vec2::new(c, s) * self.radius(i)
    }
    /// Quadrature weight `r_i Δr Δθ` of ring `i`.
    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        self.radius(i) * self.dr() * self.dtheta()
    }
    /// Diameter of the widest cell (outermost ring).
    pub fn max_cell_diameter(&self) -> f64 {
        self.dr().hypot(self.r_max * self.dtheta())
    }
    /// Smallest cell extent, used by the advection accuracy bound.
    pub fn min_cell_size(&self) -> f64 {
        self.dr().min(self.r_min * self.dtheta())
    }
    pub fn nodes(&self) -> impl Iterator<Item = Vec2> + '_ {
        (0..self.len()).map(move |idx| {
            let (i, k) = self.ring_and_angle(idx);
            self.node(i, k)
        })
    }
}

/// Samples of a scalar on the grid nodes, tagged with a time.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
    time: f64,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<f64>, time: f64) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::Length { expected: grid.len(), got: values.len() });
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite(bad));
        }
        Ok(Self { grid, values, time })
    }

    pub fn zeros(grid: GridSpec, time: f64) -> Self {
        Self { grid, values: vec![0.0; grid.len()], time }
    }

    pub fn constant(grid: GridSpec, value: f64, time: f64) -> Self {
        Self { grid, values: vec![value; grid.len()], time }
    }

    /// Samples `f` at every node.
    pub fn from_fn<F>(grid: GridSpec, time: f64, f: F) -> Self
    where
        F: Fn(Vec2) -> f64 + Sync,
    {
        use rayon::prelude::*;
        let values = (0..grid.len())
            .into_par_iter()
            .map(|idx| {
                let (i, k) = grid.ring_and_angle(idx);
                f(grid.node(i, k))
            })
            .collect();
        Self { grid, values, time }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
    pub fn time(&self) -> f64 {
        self.time
    }
    pub fn set_time(&mut self, t: f64) {
        self.time = t;
    }
    #[inline]
    pub fn at(&self, i: usize, k: usize) -> f64 {
        self.values[self.grid.index(i, k)]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `a·self + b·other`, keeping `self`'s time tag.
    pub fn combine(&self, a: f64, other: &ScalarField, b: f64) -> Result<ScalarField, GridError> {
        if self.grid != other.grid {
            return Err(GridError::Mismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        Ok(ScalarField { grid: self.grid, values, time: self.time })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect(), time: self.time }
    }

    /// Field rotated by whole angular cells: `out(i, k) = self(i, k - shift)`.
    pub fn rotate_cells(&self, shift: usize) -> ScalarField {
        let n = self.grid.n_theta;
        let mut values = vec![0.0; self.values.len()];
        for i in 0..self.grid.n_r {
            for k in 0..n {
                values[i * n + (k + shift) % n] = self.values[i * n + k];
            }
        }
        ScalarField { grid: self.grid, values, time: self.time }
    }
}
