use crate::models::ScalarFunctionModel;
use crate::spde::{simulate_path, ExtraDrift, FieldState, NoiseSource, PathOutcome, RunOptions, SolverConfig, SpdeError, Trajectory};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ExplosionVerdict {
    Exploded { t: f64 },
    Survived,
    Inconclusive,
}

impl ExplosionVerdict {
    pub fn exploded_at(&self) -> Option<f64> {
        match self {
            ExplosionVerdict::Exploded { t } => Some(*t),
            _ => None,
        }
    }
}

fn single(tr: &Trajectory, u_cap: f64, horizon: f64) -> ExplosionVerdict {
    let crossed = tr.rows.iter().any(|r| r.linf > u_cap || !r.linf.is_finite());
    match tr.outcome {
        PathOutcome::Exploded { t } | PathOutcome::Overflow { t, .. } if t <= horizon + 1e-12 => ExplosionVerdict::Exploded { t },
        PathOutcome::Survived { .. } if !crossed => ExplosionVerdict::Survived,
        _ => ExplosionVerdict::Inconclusive,
    }
}

/// Threshold rule: exploded at the first `U_cap` crossing before the horizon.
/// With a refined rerun the verdict category must agree, else it is
/// inconclusive; the crossing time reported is the primary one.
pub fn classify_explosion(primary: &Trajectory, refined: Option<&Trajectory>, u_cap: f64, horizon: f64) -> ExplosionVerdict {
    let a = single(primary, u_cap, horizon);
    let Some(r) = refined else { return a };
    match (a, single(r, u_cap, horizon)) {
        (ExplosionVerdict::Exploded { t }, ExplosionVerdict::Exploded { .. }) => ExplosionVerdict::Exploded { t },
        (ExplosionVerdict::Survived, ExplosionVerdict::Survived) => ExplosionVerdict::Survived,
        _ => ExplosionVerdict::Inconclusive,
    }
}

/// A classified path: the primary run and, when refinement was requested,
/// the rerun at `dt/2` on the bridge-refined noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifiedPath {
    pub verdict: ExplosionVerdict,
    pub primary: Trajectory,
    pub refined: Option<Trajectory>,
}

pub fn run_classified(
    u0: &FieldState,
    config: &SolverConfig,
    b: &ScalarFunctionModel,
    sigma: &ScalarFunctionModel,
    noise: NoiseSource,
    opts: &RunOptions,
    refine: bool,
) -> Result<ClassifiedPath, SpdeError> {
    let primary = simulate_path(u0, config, b, sigma, ExtraDrift::None, noise, opts)?;
    let refined = if refine {
        let fine_opts = RunOptions { record_stride: opts.record_stride.saturating_mul(2), ..opts.clone() };
        Some(simulate_path(u0, &config.halved(), b, sigma, ExtraDrift::None, noise.refined(), &fine_opts)?)
    } else {
        None
    };
    let verdict = classify_explosion(&primary, refined.as_ref(), opts.stopping.u_cap, config.horizon);
    Ok(ClassifiedPath { verdict, primary, refined })
}
