use super::{FieldState, Grid1D, NoiseIncrement, Propagator, SpdeError, Truncation};
use crate::models::ScalarFunctionModel;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    #[default]
    SpectralExponential,
    SemiImplicitFd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub scheme: Scheme,
    pub dt: f64,
    pub grid: Grid1D,
    pub horizon: f64,
    /// Level `n` of the cutoff applied to both `b` and `sigma`.
    pub cutoff: Option<f64>,
    pub u_cap: f64,
    pub alpha: f64,
    pub eps_floor: f64,
    pub taming: bool,
    pub kernel_truncation: Truncation,
    /// Use the `v` field (not `v_-`) in the repulsion term of the `v_-`
    /// equation.
    pub v_minus_literal: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::SpectralExponential,
            dt: 1e-5,
            grid: Grid1D::new(256).unwrap(),
            horizon: 2.0,
            cutoff: None,
            u_cap: 1e6,
            alpha: 4.0,
            eps_floor: 1e-6,
            taming: false,
            kernel_truncation: Truncation::Auto,
            v_minus_literal: false,
        }
    }
}

fn bad(key: &str, reason: impl Into<String>) -> SpdeError {
    SpdeError::Config { key: key.into(), reason: reason.into() }
}

impl SolverConfig {
    pub fn with_grid(mut self, nx: usize) -> Result<Self, SpdeError> {
        self.grid = Grid1D::new(nx)?;
        Ok(self)
    }

    /// Checks the parameter constraints; `initial_linf` is compared against
    /// the overflow cap and `auxiliary` enables the `alpha > 3` requirement.
    pub fn validate(&self, initial_linf: Option<f64>, auxiliary: bool) -> Result<(), SpdeError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(bad("dt", format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(bad("horizon", format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.dt > self.horizon {
            return Err(bad("dt", "time step exceeds the horizon"));
        }
        if auxiliary && !(self.alpha > 3.0) {
            return Err(bad("alpha", format!("the positivity exponent must satisfy alpha > 3, got {}", self.alpha)));
        }
        if !(self.eps_floor > 0.0) {
            return Err(bad("eps_floor", "clamp floor must be positive"));
        }
        if let Some(n) = self.cutoff {
            if !(n > 0.0) {
                return Err(bad("cutoff", "cutoff level must be positive"));
            }
        }
        if !(self.u_cap > 0.0) {
            return Err(bad("u_cap", "overflow cap must be positive"));
        }
        if let Some(l) = initial_linf {
            if !(self.u_cap > l) {
                return Err(bad("u_cap", format!("overflow cap {} must exceed the initial sup norm {l}", self.u_cap)));
            }
        }
        Ok(())
    }

    pub fn n_steps(&self) -> u64 {
        ((self.horizon / self.dt).round() as u64).max(1)
    }

    /// Same configuration with half the time step.
    pub fn halved(&self) -> Self {
        Self { dt: self.dt / 2.0, ..self.clone() }
    }
}

/// Extra terms for the auxiliary equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtraDrift<'a> {
    None,
    /// `+ max(w, eps_floor)^{-alpha}`.
    Positivity { alpha: f64, eps_floor: f64 },
    /// Drift `-b(-w) + max(base, eps_floor)^{-alpha}` and noise coefficient
    /// `-sigma(-w)`; `base` is `w` itself unless another field is given.
    NegatedReflection { alpha: f64, eps_floor: f64, base: Option<&'a [f64]> },
}

/// A step produced a non-finite value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Overflow {
    pub cell: usize,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepReport {
    /// Cells where the repulsion base was below the floor.
    pub clamps: usize,
    /// First non-finite cell after the step.
    pub overflow: Option<usize>,
    /// `dt dx sum sigma(w)^2` over the pre-step field (noise coefficient).
    pub sigma_sq: f64,
}

/// Owns the propagator and the (cut off) coefficients of one path.
pub struct Stepper {
    dt: f64,
    scale: f64,
    taming: bool,
    b: ScalarFunctionModel,
    sigma: ScalarFunctionModel,
    prop: Propagator,
    work: Vec<f64>,
}

#[inline]
fn repulsion(base: f64, eps: f64, alpha: f64, alpha_int: Option<i32>) -> f64 {
    let x = base.max(eps);
    match alpha_int {
        Some(k) => x.powi(-k),
        None => x.powf(-alpha),
    }
}

impl Stepper {
    pub fn new(config: &SolverConfig, b: &ScalarFunctionModel, sigma: &ScalarFunctionModel) -> Self {
        let (b, sigma) = match config.cutoff {
            Some(n) => (b.cutoff(n), sigma.cutoff(n)),
            None => (b.clone(), sigma.clone()),
        };
        let prop = match config.scheme {
            Scheme::SpectralExponential => Propagator::spectral(config.grid, config.dt),
            Scheme::SemiImplicitFd => Propagator::implicit(config.grid, config.dt),
        };
        Self {
            dt: config.dt,
            scale: (config.dt / config.grid.dx()).sqrt(),
            taming: config.taming,
            b,
            sigma,
            prop,
            work: vec![0.0; config.grid.nx()],
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    #[inline]
    fn drift_b(&self, u: f64) -> f64 {
        let d = self.b.value(u);
        if self.taming {
            d / (1.0 + self.dt * d.abs())
        } else {
            d
        }
    }

    /// Advances `values` by one step with standard normals `noise`.
    pub fn advance(&mut self, values: &mut [f64], extra: ExtraDrift<'_>, noise: &[f64]) -> StepReport {
        let mut report = StepReport::default();
        let (dt, scale) = (self.dt, self.scale);
        let mut work = std::mem::take(&mut self.work);
        let mut s2 = 0.0;
        match extra {
            ExtraDrift::None => {
                for i in 0..values.len() {
                    let u = values[i];
                    let g = self.sigma.value(u);
                    s2 += g * g;
                    work[i] = u + dt * self.drift_b(u) + g * scale * noise[i];
                }
            }
            ExtraDrift::Positivity { alpha, eps_floor } => {
                let ai = integer_exponent(alpha);
                for i in 0..values.len() {
                    let u = values[i];
                    if u < eps_floor {
                        report.clamps += 1;
                    }
                    let d = self.drift_b(u) + repulsion(u, eps_floor, alpha, ai);
                    let g = self.sigma.value(u);
                    s2 += g * g;
                    work[i] = u + dt * d + g * scale * noise[i];
                }
            }
            ExtraDrift::NegatedReflection { alpha, eps_floor, base } => {
                let ai = integer_exponent(alpha);
                for i in 0..values.len() {
                    let w = values[i];
                    let r = base.map_or(w, |b| b[i]);
                    if r < eps_floor {
                        report.clamps += 1;
                    }
                    let d = -self.drift_b(-w) + repulsion(r, eps_floor, alpha, ai);
                    let g = self.sigma.value(-w);
                    s2 += g * g;
                    work[i] = w + dt * d - g * scale * noise[i];
                }
            }
        }
        report.sigma_sq = s2 * dt * 2.0 * std::f64::consts::PI / values.len() as f64;
        self.prop.apply(&mut work);
        report.overflow = work.iter().position(|v| !v.is_finite());
        values.copy_from_slice(&work);
        self.work = work;
        report
    }
}

fn integer_exponent(alpha: f64) -> Option<i32> {
    (alpha.fract() == 0.0 && alpha.abs() < 64.0).then_some(alpha as i32)
}

/// One exponential-Euler (or semi-implicit) step of `state`.
pub fn step(
    state: &FieldState,
    config: &SolverConfig,
    b: &ScalarFunctionModel,
    sigma: &ScalarFunctionModel,
    extra: ExtraDrift<'_>,
    noise: &NoiseIncrement,
) -> Result<Result<FieldState, Overflow>, SpdeError> {
    let nx = config.grid.nx();
    if state.values().len() != nx || noise.cells.len() != nx {
        return Err(SpdeError::Mismatch(format!(
            "state has {} cells, noise {} cells, grid {nx}",
            state.values().len(),
            noise.cells.len()
        )));
    }
    if ((noise.scale - (config.dt / config.grid.dx()).sqrt()) / noise.scale).abs() > 1e-12 {
        return Err(SpdeError::Mismatch("noise scale does not match dt".into()));
    }
    let mut stepper = Stepper::new(config, b, sigma);
    let mut values = state.values().to_vec();
    let t = state.t + config.dt;
    let rep = stepper.advance(&mut values, extra, &noise.cells);
    Ok(match rep.overflow {
        Some(cell) => Err(Overflow { cell, t }),
        None => Ok(FieldState::new(t, values)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spde::sample_noise;

    fn cfg(nx: usize, dt: f64) -> SolverConfig {
        SolverConfig { dt, horizon: 1.0, ..SolverConfig::default() }.with_grid(nx).unwrap()
    }

    #[test]
    fn pure_semigroup_step() {
        let c = cfg(64, 1e-3);
        let zero = ScalarFunctionModel::constant(0.0);
        let s = FieldState::from_fn(c.grid, f64::cos);
        let n = sample_noise(c.grid, c.dt, 0, 0, 1).unwrap();
        let out = step(&s, &c, &zero, &zero, ExtraDrift::None, &n).unwrap().unwrap();
        for (v, x) in out.values().iter().zip(c.grid.points()) {
            assert!((v - (-c.dt).exp() * x.cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn positivity_drift_on_unit_constant() {
        let c = cfg(16, 1e-3);
        let zero = ScalarFunctionModel::constant(0.0);
        let s = FieldState::constant(c.grid, 1.0);
        let n = sample_noise(c.grid, c.dt, 0, 0, 1).unwrap();
        let out = step(&s, &c, &zero, &zero, ExtraDrift::Positivity { alpha: 4.0, eps_floor: 1e-6 }, &n)
            .unwrap()
            .unwrap();
        assert!(out.values().iter().all(|v| (v - 1.001).abs() < 1e-12));
    }

    #[test]
    fn validation_messages() {
        let mut c = cfg(16, 1e-3);
        c.alpha = 2.0;
        let e = c.validate(Some(1.0), true).unwrap_err();
        assert!(e.to_string().contains("alpha > 3"));
        c.alpha = 4.0;
        c.dt = 0.0;
        assert!(matches!(c.validate(None, false), Err(SpdeError::Config { ref key, .. }) if key == "dt"));
    }

    #[test]
    fn detects_overflow() {
        let c = cfg(16, 1e-3);
        let b = ScalarFunctionModel::power(1.0, 2.0);
        let zero = ScalarFunctionModel::constant(0.0);
        let s = FieldState::constant(c.grid, 1e200);
        let n = sample_noise(c.grid, c.dt, 0, 0, 1).unwrap();
        let out = step(&s, &c, &b, &zero, ExtraDrift::None, &n).unwrap();
        assert!(out.is_err());
    }
}
