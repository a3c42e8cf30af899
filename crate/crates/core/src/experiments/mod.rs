//! Monte Carlo campaigns over model lattices.

mod regime;

pub use regime::{Regime, BOUNDARY_AMPLITUDE};

use crate::diagnostics::{count_triplings, run_classified, CountSummary, ExplosionVerdict};
use crate::models::{Domain, Family, ScalarFunctionModel};
use crate::spde::{FieldState, NoiseSource, RunOptions, SolverConfig, SpdeError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::time::Instant;
use thiserror::Error;

/// Printed at the top of every campaign report.
pub const EVIDENCE_HEADER: &str =
    "evidence, not proof: explosion is read as a U_cap crossing before the horizon at finite dt and nx";

pub const CODE_VERSION: &str = concat!("shelab ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("spec error: {0}")]
    Spec(String),
    #[error(transparent)]
    Solver(#[from] SpdeError),
    #[error("worker pool: {0}")]
    Pool(String),
}

fn spec_err(msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Spec(msg.into())
}

/// Noise stream of replication `rep` at lattice point `lattice`: the path id
/// packs the two indices into 32-bit halves.
pub fn derive_path_seed(master_seed: u64, lattice: u64, rep: u64) -> Result<NoiseSource, ExperimentError> {
    if lattice > u32::MAX as u64 || rep > u32::MAX as u64 {
        return Err(spec_err(format!("index ({lattice}, {rep}) does not fit the 32-bit packed fields")));
    }
    Ok(NoiseSource::new(master_seed, (lattice << 32) | rep))
}

/// Wilson score interval at `z = 1.96`.
pub fn wilson_interval(successes: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let n = n as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if p == 1.0 { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

/// One concrete model triple of a campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelPoint {
    pub label: String,
    pub b: ScalarFunctionModel,
    pub sigma: ScalarFunctionModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<ScalarFunctionModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
}

impl ModelPoint {
    /// `b = A |u|^beta`, `sigma = |u|^gamma`.
    pub fn polynomial(beta: f64, gamma: f64, amplitude: f64) -> Self {
        Self {
            label: format!("beta={beta} gamma={gamma} A={amplitude}"),
            b: ScalarFunctionModel::power(amplitude, beta),
            sigma: ScalarFunctionModel::power(1.0, gamma),
            h: None,
            beta: Some(beta),
            gamma: Some(gamma),
            amplitude: Some(amplitude),
        }
    }

    pub fn regime(&self) -> Option<Regime> {
        Regime::annotate(self.beta?, self.gamma?, self.amplitude?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lattice {
    pub betas: Vec<f64>,
    pub gammas: Vec<f64>,
    pub amplitudes: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AuditKind {
    /// Mean count of sup-norm triplings above `3^2`.
    Tripling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub points: Vec<ModelPoint>,
    pub lattice: Option<Lattice>,
    pub solver: SolverConfig,
    pub replications: u64,
    pub master_seed: u64,
    /// Constant initial datum.
    pub initial_value: f64,
    pub refine: bool,
    pub audits: Vec<AuditKind>,
    /// Wall-clock budget; paths not started in time are left out and the
    /// result is flagged incomplete.
    pub budget_seconds: Option<f64>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            name: "campaign".into(),
            points: vec![],
            lattice: None,
            solver: SolverConfig::default(),
            replications: 200,
            master_seed: 0,
            initial_value: 1.0,
            refine: false,
            audits: vec![],
            budget_seconds: None,
        }
    }
}

impl ExperimentSpec {
    /// Explicit points first, then the lattice in `beta`, `gamma`, `A` order.
    pub fn expand(&self) -> Vec<ModelPoint> {
        let mut out = self.points.clone();
        if let Some(l) = &self.lattice {
            for &b in &l.betas {
                for &g in &l.gammas {
                    for &a in &l.amplitudes {
                        out.push(ModelPoint::polynomial(b, g, a));
                    }
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.replications < 1 {
            return Err(spec_err("replications must be at least 1"));
        }
        if self.expand().is_empty() {
            return Err(spec_err("the spec has no model points"));
        }
        if !self.initial_value.is_finite() {
            return Err(spec_err("initial_value must be finite"));
        }
        // config files are TOML, whose integers are signed 64-bit
        if self.master_seed > i64::MAX as u64 {
            return Err(spec_err(format!("master_seed {} exceeds {}", self.master_seed, i64::MAX)));
        }
        self.solver.validate(Some(self.initial_value.abs()), false)?;
        let n = self.expand().len() as u64;
        derive_path_seed(self.master_seed, n - 1, self.replications - 1)?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form (object keys sorted).
    pub fn hash(&self) -> String {
        let v = serde_json::to_value(self).expect("spec serializes");
        hex::encode(Sha256::digest(canonical_json(&v).as_bytes()))
    }
}

/// Compact JSON with object keys in sorted order.
pub fn canonical_json(v: &serde_json::Value) -> String {
    use serde_json::Value;
    match v {
        Value::Object(m) => {
            let mut keys: Vec<_> = m.keys().collect();
            keys.sort();
            let body: Vec<String> = keys
                .into_iter()
                .map(|k| format!("{}:{}", serde_json::to_string(k).unwrap(), canonical_json(&m[k])))
                .collect();
            format!("{{{}}}", body.join(","))
        }
        Value::Array(a) => format!("[{}]", a.iter().map(canonical_json).collect::<Vec<_>>().join(",")),
        other => other.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub label: String,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub amplitude: Option<f64>,
    pub regime: Option<Regime>,
    /// Paths finished; equals the requested replications unless the
    /// campaign ran out of budget.
    pub replications: u64,
    pub explosions: u64,
    pub survivals: u64,
    pub inconclusive: u64,
    pub frequency: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub median_t: Option<f64>,
    pub q1_t: Option<f64>,
    pub q3_t: Option<f64>,
    pub tripling: Option<CountSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub header: String,
    pub name: String,
    pub spec_hash: String,
    pub master_seed: u64,
    pub code_version: String,
    pub complete: bool,
    pub wall_seconds: f64,
    pub points: Vec<PointResult>,
}

#[derive(Debug, Clone, Copy)]
struct PathSummary {
    verdict: ExplosionVerdict,
    triplings: usize,
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo]))
}

fn summarize(point: &ModelPoint, paths: &[PathSummary], with_tripling: bool) -> PointResult {
    let mut times = vec![];
    let (mut exp, mut sur, mut inc) = (0, 0, 0);
    for p in paths {
        match p.verdict {
            ExplosionVerdict::Exploded { t } => {
                exp += 1;
                times.push(t);
            }
            ExplosionVerdict::Survived => sur += 1,
            ExplosionVerdict::Inconclusive => inc += 1,
        }
    }
    times.sort_by(f64::total_cmp);
    let n = paths.len() as u64;
    let (ci_lo, ci_hi) = wilson_interval(exp, n);
    let tripling = with_tripling.then(|| {
        let nf = n.max(1) as f64;
        let mean = paths.iter().map(|p| p.triplings as f64).sum::<f64>() / nf;
        let var = if n > 1 { paths.iter().map(|p| (p.triplings as f64 - mean).powi(2)).sum::<f64>() / (nf - 1.0) } else { 0.0 };
        CountSummary { m0: 2, mean, std_error: (var / nf).sqrt(), max: paths.iter().map(|p| p.triplings).max().unwrap_or(0) }
    });
    PointResult {
        label: point.label.clone(),
        beta: point.beta,
        gamma: point.gamma,
        amplitude: point.amplitude,
        regime: point.regime(),
        replications: n,
        explosions: exp,
        survivals: sur,
        inconclusive: inc,
        frequency: if n == 0 { f64::NAN } else { exp as f64 / n as f64 },
        ci_lo,
        ci_hi,
        median_t: quantile(&times, 0.5),
        q1_t: quantile(&times, 0.25),
        q3_t: quantile(&times, 0.75),
        tripling,
    }
}

/// Runs every (point, replication) pair on a pool of `workers` threads.
/// Results depend only on the spec: each path draws from its own derived
/// noise stream and is stored at its own index.
pub fn run_ensemble(spec: &ExperimentSpec, workers: usize) -> Result<ExperimentResult, ExperimentError> {
    spec.validate()?;
    let start = Instant::now();
    let points = spec.expand();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| ExperimentError::Pool(e.to_string()))?;
    let r = spec.replications;
    let tasks: Vec<(usize, u64)> = (0..points.len()).flat_map(|p| (0..r).map(move |k| (p, k))).collect();
    let u0 = FieldState::constant(spec.solver.grid, spec.initial_value);
    let stride = (spec.solver.n_steps() / 200).max(1);
    let opts = RunOptions::new(spec.solver.u_cap).with_record_stride(stride);
    let with_tripling = spec.audits.contains(&AuditKind::Tripling);
    let budget = spec.budget_seconds;
    let outcomes: Vec<Option<Result<PathSummary, ExperimentError>>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(p, k)| {
                if budget.is_some_and(|b| start.elapsed().as_secs_f64() > b) {
                    return None;
                }
                let run = || -> Result<PathSummary, ExperimentError> {
                    let noise = derive_path_seed(spec.master_seed, p as u64, k)?;
                    let pt = &points[p];
                    let c = run_classified(&u0, &spec.solver, &pt.b, &pt.sigma, noise, &opts, spec.refine)?;
                    let triplings = count_triplings(c.primary.stopping.rho_sequence(), 2);
                    Ok(PathSummary { verdict: c.verdict, triplings })
                };
                Some(run())
            })
            .collect()
    });
    let mut complete = true;
    let mut per_point: Vec<Vec<PathSummary>> = vec![vec![]; points.len()];
    for ((p, _), o) in tasks.iter().zip(outcomes) {
        match o {
            Some(res) => per_point[*p].push(res?),
            None => complete = false,
        }
    }
    Ok(ExperimentResult {
        header: EVIDENCE_HEADER.into(),
        name: spec.name.clone(),
        spec_hash: spec.hash(),
        master_seed: spec.master_seed,
        code_version: CODE_VERSION.into(),
        complete,
        wall_seconds: start.elapsed().as_secs_f64(),
        points: points.iter().zip(&per_point).map(|(pt, paths)| summarize(pt, paths, with_tripling)).collect(),
    })
}

/// Lattice campaign `b = A u^beta`, `sigma = u^gamma`, `u0 = 1`.
pub fn phase_diagram(
    betas: &[f64],
    gammas: &[f64],
    amplitude: f64,
    replications: u64,
    horizon: f64,
    solver: &SolverConfig,
    master_seed: u64,
    workers: usize,
) -> Result<ExperimentResult, ExperimentError> {
    if let Some(b) = betas.iter().find(|b| !(**b > 1.0 && **b <= 2.0)) {
        return Err(spec_err(format!("beta = {b} lies outside (1, 2]")));
    }
    if let Some(g) = gammas.iter().find(|g| !(**g >= 0.0 && **g <= 2.5)) {
        return Err(spec_err(format!("gamma = {g} lies outside [0, 2.5]")));
    }
    let spec = ExperimentSpec {
        name: "phase-diagram".into(),
        lattice: Some(Lattice { betas: betas.to_vec(), gammas: gammas.to_vec(), amplitudes: vec![amplitude] }),
        solver: SolverConfig { horizon, ..solver.clone() },
        replications,
        master_seed,
        ..ExperimentSpec::default()
    };
    run_ensemble(&spec, workers)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OsgoodFamily {
    ULogU,
    ULogULogLogU,
}

impl OsgoodFamily {
    pub fn drift(&self) -> ScalarFunctionModel {
        match self {
            OsgoodFamily::ULogU => ScalarFunctionModel::u_log_u(),
            OsgoodFamily::ULogULogLogU => ScalarFunctionModel::u_log_u_loglog_u(),
        }
    }
}

/// `|u| (ln(e + |u|))^{1/2}`: noise in the gap between the two known
/// non-explosion results for `b = u log u`.
pub fn gap_sigma() -> ScalarFunctionModel {
    ScalarFunctionModel::new(
        Family::AffineLogPower {
            amplitude: 1.0,
            offset: 0.0,
            shift: std::f64::consts::E,
            exponent: 0.5,
            floor: None,
            constant: 0.0,
        },
        Domain::Even,
    )
}

/// Survival table for an Osgood drift against `sigma = |u|^gamma`, plus the
/// gap profile [`gap_sigma`].
pub fn osgood_sweep(
    family: OsgoodFamily,
    gammas: &[f64],
    replications: u64,
    horizon: f64,
    solver: &SolverConfig,
    master_seed: u64,
    workers: usize,
) -> Result<ExperimentResult, ExperimentError> {
    if let Some(g) = gammas.iter().find(|g| !(**g > 0.5 && **g <= 1.5)) {
        return Err(spec_err(format!("gamma = {g} lies outside (1/2, 3/2]")));
    }
    let b = family.drift();
    let mut points: Vec<ModelPoint> = gammas
        .iter()
        .map(|&g| ModelPoint {
            label: format!("{family:?} gamma={g}"),
            b: b.clone(),
            sigma: ScalarFunctionModel::power(1.0, g),
            h: None,
            beta: None,
            gamma: Some(g),
            amplitude: None,
        })
        .collect();
    points.push(ModelPoint {
        label: format!("{family:?} gap"),
        b: b.clone(),
        sigma: gap_sigma(),
        h: None,
        beta: None,
        gamma: None,
        amplitude: None,
    });
    let spec = ExperimentSpec {
        name: "osgood-sweep".into(),
        points,
        solver: SolverConfig { horizon, ..solver.clone() },
        replications,
        master_seed,
        ..ExperimentSpec::default()
    };
    run_ensemble(&spec, workers)
}

pub const CSV_COLUMNS: [&str; 12] =
    ["point", "beta", "gamma", "A", "R", "explosions", "survivals", "inconclusive", "freq", "ci_lo", "ci_hi", "median_t"];

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Flat table, one row per point. Numbers use the shortest round-trip form.
pub fn result_csv(result: &ExperimentResult) -> String {
    let mut w = csv::Writer::from_writer(vec![]);
    w.write_record(CSV_COLUMNS).expect("in-memory write");
    for p in &result.points {
        w.write_record([
            p.label.clone(),
            opt(p.beta),
            opt(p.gamma),
            opt(p.amplitude),
            p.replications.to_string(),
            p.explosions.to_string(),
            p.survivals.to_string(),
            p.inconclusive.to_string(),
            p.frequency.to_string(),
            p.ci_lo.to_string(),
            p.ci_hi.to_string(),
            opt(p.median_t),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}
