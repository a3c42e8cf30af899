use super::DiagnosticsError;
use crate::models::ScalarFunctionModel;
use crate::numerics::periodic_trapezoid;
use crate::spde::Trajectory;
use serde::{Deserialize, Serialize};

/// Per-step decomposition of `I(t) = ∫ v dx` along one path.
///
/// `dN` is the closure residual, so `I(t_k) = I(0) + Σ (dB + dA + dN)`
/// holds by construction. The `log_*` columns are the increments of the
/// decomposition of `log(1 + I)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SemimartingaleLedger {
    pub times: Vec<f64>,
    pub i: Vec<f64>,
    pub d_b: Vec<f64>,
    pub d_a: Vec<f64>,
    pub d_s: Vec<f64>,
    pub d_n: Vec<f64>,
    /// Running `Σ dN^2`.
    pub qv: Vec<f64>,
    pub log_b: Vec<f64>,
    pub log_a: Vec<f64>,
    pub log_s: Vec<f64>,
}

impl SemimartingaleLedger {
    pub fn steps(&self) -> usize {
        self.d_b.len()
    }

    /// `I(t_k) - I(0) - Σ_{j<k} (dB + dA + dN)`, worst over `k`.
    pub fn closure_error(&self) -> f64 {
        let mut acc = self.i[0];
        let mut worst: f64 = 0.0;
        for k in 0..self.steps() {
            acc += self.d_b[k] + self.d_a[k] + self.d_n[k];
            worst = worst.max((self.i[k + 1] - acc).abs());
        }
        worst
    }

    pub fn martingale_total(&self) -> f64 {
        self.d_n.iter().sum()
    }

    pub fn quadratic_variation(&self) -> f64 {
        self.qv.last().copied().unwrap_or(0.0)
    }

    pub fn sigma_sq_total(&self) -> f64 {
        self.d_s.iter().sum()
    }

    pub fn sup_i(&self) -> f64 {
        self.i.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn final_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }
}

/// Builds the ledger from a trajectory with a snapshot at every step; the
/// repulsion term `max(v, eps_floor)^{-alpha}` is included when `alpha` is
/// given. Quadratures are left-point in time, trapezoid in space.
pub fn ledger_build(
    traj: &Trajectory,
    b: &ScalarFunctionModel,
    sigma: &ScalarFunctionModel,
    alpha: Option<f64>,
    eps_floor: f64,
) -> Result<SemimartingaleLedger, DiagnosticsError> {
    if !traj.has_full_snapshots() {
        return Err(DiagnosticsError::InsufficientData(format!(
            "ledger needs a field snapshot at every step; trajectory `{}` has {} snapshots for {} steps",
            traj.label,
            traj.snapshots.len(),
            traj.steps
        )));
    }
    let snaps = &traj.snapshots;
    let mut l = SemimartingaleLedger::default();
    let mut scratch = vec![0.0; snaps[0].values().len()];
    let mut integrate = |f: &dyn Fn(f64) -> f64, vals: &[f64]| {
        for (s, &v) in scratch.iter_mut().zip(vals) {
            *s = f(v);
        }
        periodic_trapezoid(&scratch)
    };
    let mut qv = 0.0;
    l.times.push(snaps[0].t);
    l.i.push(snaps[0].integral());
    for w in snaps.windows(2) {
        let (a, c) = (&w[0], &w[1]);
        let dt = c.t - a.t;
        let i0 = a.integral();
        let i1 = c.integral();
        let db = dt * integrate(&|v| b.value(v), a.values());
        let da = match alpha {
            Some(al) => dt * integrate(&|v| v.max(eps_floor).powf(-al), a.values()),
            None => 0.0,
        };
        let ds = dt * integrate(&|v| sigma.value(v).powi(2), a.values());
        let dn = i1 - i0 - db - da;
        qv += dn * dn;
        let denom = 1.0 + i0;
        l.times.push(c.t);
        l.i.push(i1);
        l.d_b.push(db);
        l.d_a.push(da);
        l.d_s.push(ds);
        l.d_n.push(dn);
        l.qv.push(qv);
        l.log_b.push(db / denom);
        l.log_a.push(da / denom);
        l.log_s.push(ds / (2.0 * denom * denom));
    }
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spde::{simulate_path, ExtraDrift, FieldState, NoiseSource, RunOptions, SolverConfig};
    use std::f64::consts::PI;

    fn run(b: &ScalarFunctionModel, s: &ScalarFunctionModel, snapshots: bool) -> Trajectory {
        let c = SolverConfig { dt: 1e-3, horizon: 0.1, ..SolverConfig::default() }.with_grid(32).unwrap();
        let u0 = FieldState::from_fn(c.grid, |x| 1.0 + 0.5 * x.cos());
        let mut o = RunOptions::new(1e6);
        if snapshots {
            o = o.with_snapshots(1);
        }
        simulate_path(&u0, &c, b, s, ExtraDrift::None, NoiseSource::new(3, 1), &o).unwrap()
    }

    #[test]
    fn quiet_field_has_empty_ledger() {
        let z = ScalarFunctionModel::constant(0.0);
        let l = ledger_build(&run(&z, &z, true), &z, &z, None, 1e-6).unwrap();
        assert!(l.d_b.iter().chain(&l.d_a).all(|&x| x == 0.0));
        assert!(l.d_n.iter().all(|x| x.abs() < 1e-12));
        assert!((l.i[0] - l.i[l.steps()]).abs() < 1e-12);
    }

    #[test]
    fn constant_drift_grows_linearly() {
        let one = ScalarFunctionModel::constant(1.0);
        let z = ScalarFunctionModel::constant(0.0);
        let l = ledger_build(&run(&one, &z, true), &one, &z, None, 1e-6).unwrap();
        for &db in &l.d_b {
            assert!((db - 2.0 * PI * 1e-3).abs() < 1e-12);
        }
        assert!(l.closure_error() < 1e-12);
        assert!(l.d_n.iter().all(|x| x.abs() < 1e-11));
    }

    #[test]
    fn closure_is_exact_with_noise() {
        let b = ScalarFunctionModel::sine(1.0, 1.0, 0.0).with_domain(crate::models::Domain::Real);
        let s = ScalarFunctionModel::sine(1.0, 1.0, std::f64::consts::FRAC_PI_2).with_domain(crate::models::Domain::Real);
        let l = ledger_build(&run(&b, &s, true), &b, &s, None, 1e-6).unwrap();
        assert!(l.closure_error() < 1e-10);
        assert!(l.quadratic_variation() > 0.0);
    }

    #[test]
    fn missing_snapshots_rejected() {
        let z = ScalarFunctionModel::constant(0.0);
        assert!(matches!(ledger_build(&run(&z, &z, false), &z, &z, None, 1e-6), Err(DiagnosticsError::InsufficientData(_))));
    }
}
