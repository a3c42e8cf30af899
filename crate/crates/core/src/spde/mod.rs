//! Grid, heat semigroup, discretized white noise and time stepping.

mod coupled;
mod kernel;
mod noise;
mod propagator;
mod solver;

pub use coupled::{simulate_coupled, simulate_path, CoupledTrajectory, NormRow, PathOutcome, RunOptions, Trajectory};
pub use kernel::{heat_kernel, kernel_sup_constant, Truncation, IMAGE_SWITCH};
pub use noise::{sample_noise, NoiseIncrement, NoiseSource, Provenance};
pub use propagator::{semigroup_apply, Propagator};
pub use solver::{step, ExtraDrift, Overflow, Scheme, SolverConfig, StepReport, Stepper};

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpdeError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid solver configuration `{key}`: {reason}")]
    Config { key: String, reason: String },
    #[error("noise does not match the grid: {0}")]
    Mismatch(String),
}

/// Uniform periodic grid on `[-pi, pi)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GridRepr", into = "GridRepr")]
pub struct Grid1D {
    nx: usize,
}

#[derive(Serialize, Deserialize)]
struct GridRepr {
    nx: usize,
}

impl TryFrom<GridRepr> for Grid1D {
    type Error = SpdeError;
    fn try_from(r: GridRepr) -> Result<Self, SpdeError> {
        Grid1D::new(r.nx)
    }
}

impl From<Grid1D> for GridRepr {
    fn from(g: Grid1D) -> Self {
        GridRepr { nx: g.nx }
    }
}

impl Grid1D {
    pub fn new(nx: usize) -> Result<Self, SpdeError> {
        if nx < 8 {
            return Err(SpdeError::Config { key: "nx".into(), reason: format!("need at least 8 cells, got {nx}") });
        }
        Ok(Self { nx })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn dx(&self) -> f64 {
        2.0 * PI / self.nx as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        -PI + i as f64 * self.dx()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.point(i)).collect()
    }
}

/// A field on the grid at time `t` with cached norms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldState {
    pub t: f64,
    values: Vec<f64>,
    l1: f64,
    linf: f64,
    min: f64,
}

impl FieldState {
    pub fn new(t: f64, values: Vec<f64>) -> Self {
        let mut s = Self { t, values, l1: 0.0, linf: 0.0, min: 0.0 };
        s.refresh();
        s
    }

    pub fn constant(grid: Grid1D, c: f64) -> Self {
        Self::new(0.0, vec![c; grid.nx()])
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Self {
        Self::new(0.0, grid.points().into_iter().map(f).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn grid(&self) -> Grid1D {
        Grid1D { nx: self.values.len() }
    }

    /// `dx * sum |u|`.
    pub fn l1(&self) -> f64 {
        self.l1
    }

    pub fn linf(&self) -> f64 {
        self.linf
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    /// `dx * sum u`, the signed integral.
    pub fn integral(&self) -> f64 {
        crate::numerics::periodic_trapezoid(&self.values)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    fn refresh(&mut self) {
        let (l1, linf, min) = norms(&self.values);
        self.l1 = l1;
        self.linf = linf;
        self.min = min;
    }
}

/// `(dx sum |u|, max |u|, min u)`.
pub(crate) fn norms(values: &[f64]) -> (f64, f64, f64) {
    let mut sum = 0.0;
    let mut linf: f64 = 0.0;
    let mut min = f64::INFINITY;
    for &v in values {
        let a = v.abs();
        sum += a;
        linf = linf.max(a);
        min = min.min(v);
    }
    if values.iter().any(|v| v.is_nan()) {
        linf = f64::NAN;
    }
    (sum * 2.0 * PI / values.len() as f64, linf, min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spacing_and_points() {
        let g = Grid1D::new(64).unwrap();
        assert!((g.dx() * 64.0 - 2.0 * PI).abs() < 1e-14);
        assert_eq!(g.point(0), -PI);
        assert!(Grid1D::new(4).is_err());
    }

    #[test]
    fn cached_norms() {
        let s = FieldState::new(0.0, vec![1.0, -3.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(s.linf(), 3.0);
        assert_eq!(s.min(), -3.0);
        assert!((s.l1() - 6.0 * 2.0 * PI / 8.0).abs() < 1e-14);
        assert!(s.integral().abs() < 1e-15);
    }
}
