use super::{norms, ExtraDrift, FieldState, NoiseSource, SolverConfig, SpdeError, Stepper};
use crate::diagnostics::{StoppingParams, StoppingRecord};
use crate::models::ScalarFunctionModel;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormRow {
    pub t: f64,
    pub l1: f64,
    pub linf: f64,
    pub min: f64,
    /// Cumulative count of clamped repulsion evaluations.
    pub clamp_events: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum PathOutcome {
    Survived { t: f64 },
    /// Sup norm crossed the overflow cap.
    Exploded { t: f64 },
    /// A step produced a non-finite value.
    Overflow { t: f64, cell: usize },
    /// Halted at a stopping time (or at another path's).
    Stopped { t: f64 },
}

impl PathOutcome {
    pub fn blew_up(&self) -> Option<f64> {
        match *self {
            PathOutcome::Exploded { t } | PathOutcome::Overflow { t, .. } => Some(t),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Keep a norm row every `record_stride` steps (and at the last step).
    pub record_stride: u64,
    /// Keep a full field every `snapshot_stride` steps.
    pub snapshot_stride: Option<u64>,
    pub stopping: StoppingParams,
    /// Stop at the first `tau^1_M` / `tau^inf_eps` event.
    pub halt_on_stopping: bool,
}

impl RunOptions {
    pub fn new(u_cap: f64) -> Self {
        Self { record_stride: 1, snapshot_stride: None, stopping: StoppingParams::new(u_cap), halt_on_stopping: false }
    }

    pub fn with_snapshots(mut self, stride: u64) -> Self {
        self.snapshot_stride = Some(stride.max(1));
        self
    }

    pub fn with_record_stride(mut self, stride: u64) -> Self {
        self.record_stride = stride.max(1);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub label: String,
    pub dt: f64,
    pub rows: Vec<NormRow>,
    pub snapshots: Vec<FieldState>,
    pub outcome: PathOutcome,
    pub stopping: StoppingRecord,
    /// Steps actually taken.
    pub steps: u64,
    /// `∫∫ sigma(w)^2 dx dt` accumulated along the path.
    pub sigma_sq_integral: f64,
}

impl Trajectory {
    pub fn clamp_events(&self) -> u64 {
        self.rows.last().map_or(0, |r| r.clamp_events)
    }

    pub fn final_row(&self) -> Option<&NormRow> {
        self.rows.last()
    }

    /// Snapshots at every step, as needed by the ledger.
    pub fn has_full_snapshots(&self) -> bool {
        !self.snapshots.is_empty() && self.snapshots.len() as u64 == self.steps + 1
    }
}

struct PathRun<'a> {
    values: Vec<f64>,
    stepper: Stepper,
    traj: Trajectory,
    clamps: u64,
    opts: &'a RunOptions,
    done: bool,
}

impl<'a> PathRun<'a> {
    fn new(label: &str, u0: &FieldState, config: &SolverConfig, b: &ScalarFunctionModel, sigma: &ScalarFunctionModel, opts: &'a RunOptions) -> Self {
        let mut run = Self {
            values: u0.values().to_vec(),
            stepper: Stepper::new(config, b, sigma),
            traj: Trajectory {
                label: label.into(),
                dt: config.dt,
                rows: vec![],
                snapshots: vec![],
                outcome: PathOutcome::Survived { t: u0.t },
                stopping: StoppingRecord::default(),
                steps: 0,
                sigma_sq_integral: 0.0,
            },
            clamps: 0,
            opts,
            done: false,
        };
        run.record(u0.t, 0, true);
        run
    }

    fn record(&mut self, t: f64, step: u64, force_row: bool) {
        let (l1, linf, min) = norms(&self.values);
        self.traj.stopping.observe(t, l1, linf, min, &self.opts.stopping);
        if force_row || step % self.opts.record_stride == 0 {
            self.traj.rows.push(NormRow { t, l1, linf, min, clamp_events: self.clamps });
        }
        if let Some(s) = self.opts.snapshot_stride {
            if step % s == 0 {
                self.traj.snapshots.push(FieldState::new(t, self.values.clone()));
            }
        }
    }

    /// Takes one step; returns true when the path must halt.
    fn step(&mut self, step: u64, t: f64, extra: ExtraDrift<'_>, noise: &[f64], last: bool) -> bool {
        let rep = self.stepper.advance(&mut self.values, extra, noise);
        self.clamps += rep.clamps as u64;
        self.traj.sigma_sq_integral += rep.sigma_sq;
        self.traj.steps = step;
        if let Some(cell) = rep.overflow {
            self.record(t, step, true);
            self.traj.outcome = PathOutcome::Overflow { t, cell };
            self.done = true;
            return true;
        }
        let before = self.traj.stopping.is_halted();
        let prev_stop = self.traj.stopping.first_stop();
        let linf = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let crossing = linf > self.opts.stopping.u_cap;
        self.record(t, step, last || crossing);
        if crossing {
            let ts = match self.traj.stopping.classification {
                crate::diagnostics::Classification::Exploded { t } => t,
                _ => t,
            };
            self.traj.outcome = PathOutcome::Exploded { t: ts };
            self.done = true;
            return true;
        }
        if self.opts.halt_on_stopping && prev_stop.is_none() {
            if let Some(ts) = self.traj.stopping.first_stop() {
                self.traj.outcome = PathOutcome::Stopped { t: ts };
                self.done = true;
                return true;
            }
        }
        if !before && self.traj.stopping.is_halted() {
            // min-hit halt
            self.traj.outcome = PathOutcome::Stopped { t: self.traj.stopping.first_stop().unwrap_or(t) };
            self.done = true;
            return true;
        }
        if last {
            self.traj.outcome = PathOutcome::Survived { t };
        }
        false
    }

    fn halt_at(&mut self, t: f64, step: u64) {
        if !self.done {
            if self.traj.rows.last().map_or(true, |r| r.t < t) {
                let (l1, linf, min) = norms(&self.values);
                self.traj.rows.push(NormRow { t, l1, linf, min, clamp_events: self.clamps });
            }
            self.traj.steps = step;
            self.traj.outcome = PathOutcome::Stopped { t };
            self.done = true;
        }
    }

    fn finish(mut self) -> Trajectory {
        if matches!(self.traj.outcome, PathOutcome::Survived { .. }) {
            self.traj.stopping.finish();
        }
        self.traj
    }
}

fn time_at(u0: &FieldState, dt: f64, step: u64) -> f64 {
    u0.t + dt * step as f64
}

/// Runs a single path of the equation for `u` (or of an auxiliary equation
/// when `extra` is not [`ExtraDrift::None`]).
pub fn simulate_path(
    u0: &FieldState,
    config: &SolverConfig,
    b: &ScalarFunctionModel,
    sigma: &ScalarFunctionModel,
    extra: ExtraDrift<'_>,
    noise: NoiseSource,
    opts: &RunOptions,
) -> Result<Trajectory, SpdeError> {
    if u0.values().len() != config.grid.nx() {
        return Err(SpdeError::Mismatch(format!("initial field has {} cells, grid {}", u0.values().len(), config.grid.nx())));
    }
    config.validate(Some(u0.linf()), !matches!(extra, ExtraDrift::None))?;
    let mut run = PathRun::new("u", u0, config, b, sigma, opts);
    let n = config.n_steps();
    let mut cells = vec![0.0; config.grid.nx()];
    for k in 0..n {
        noise.fill(k, &mut cells);
        if run.step(k + 1, time_at(u0, config.dt, k + 1), extra, &cells, k + 1 == n) {
            break;
        }
    }
    Ok(run.finish())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledTrajectory {
    pub u: Trajectory,
    pub v: Trajectory,
    pub v_minus: Trajectory,
    /// Earliest stopping event over the three paths.
    pub first_stop: Option<f64>,
    /// Largest `max(-v_- - u, u - v)` over the steps strictly before
    /// `first_stop`.
    pub max_order_violation: f64,
}

/// Runs `u`, `v` and `v_-` on the same noise. `v` starts at `max(u0, 1)`,
/// `v_-` at `max(-u0, 1)`; both carry the repulsion `w^{-alpha}`.
pub fn simulate_coupled(
    u0: &FieldState,
    config: &SolverConfig,
    b: &ScalarFunctionModel,
    sigma: &ScalarFunctionModel,
    noise: NoiseSource,
    opts: &RunOptions,
) -> Result<CoupledTrajectory, SpdeError> {
    let nx = config.grid.nx();
    if u0.values().len() != nx {
        return Err(SpdeError::Mismatch(format!("initial field has {} cells, grid {nx}", u0.values().len())));
    }
    let v0 = FieldState::new(u0.t, u0.values().iter().map(|&x| x.max(1.0)).collect());
    let m0 = FieldState::new(u0.t, u0.values().iter().map(|&x| (-x).max(1.0)).collect());
    config.validate(Some(u0.linf().max(v0.linf()).max(m0.linf())), true)?;
    let mut u = PathRun::new("u", u0, config, b, sigma, opts);
    let mut v = PathRun::new("v", &v0, config, b, sigma, opts);
    let mut vm = PathRun::new("v_minus", &m0, config, b, sigma, opts);
    let (alpha, eps_floor) = (config.alpha, config.eps_floor);
    let mut worst: f64 = 0.0;
    let mut order = |u: &[f64], v: &[f64], vm: &[f64]| {
        for i in 0..u.len() {
            worst = worst.max(u[i] - v[i]).max(-vm[i] - u[i]);
        }
    };
    order(&u.values, &v.values, &vm.values);
    let n = config.n_steps();
    let mut cells = vec![0.0; nx];
    let mut v_prev = vec![0.0; nx];
    for k in 0..n {
        let t = time_at(u0, config.dt, k + 1);
        let last = k + 1 == n;
        noise.fill(k, &mut cells);
        if config.v_minus_literal {
            v_prev.copy_from_slice(&v.values);
        }
        let mut halted = !u.done && u.step(k + 1, t, ExtraDrift::None, &cells, last);
        halted |= !v.done && v.step(k + 1, t, ExtraDrift::Positivity { alpha, eps_floor }, &cells, last);
        let base = config.v_minus_literal.then_some(&v_prev[..]);
        halted |= !vm.done && vm.step(k + 1, t, ExtraDrift::NegatedReflection { alpha, eps_floor, base }, &cells, last);
        let stopped_any = [&u, &v, &vm].iter().any(|p| p.traj.stopping.first_stop().is_some());
        if !stopped_any && !halted {
            order(&u.values, &v.values, &vm.values);
        }
        if halted || (opts.halt_on_stopping && stopped_any) {
            for p in [&mut u, &mut v, &mut vm] {
                p.halt_at(t, k + 1);
            }
            break;
        }
    }
    let (u, v, v_minus) = (u.finish(), v.finish(), vm.finish());
    let first_stop = [&u, &v, &v_minus].iter().filter_map(|p| p.stopping.first_stop()).reduce(f64::min);
    Ok(CoupledTrajectory { u, v, v_minus, first_stop, max_order_violation: worst })
}
