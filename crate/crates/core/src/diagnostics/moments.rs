use super::DiagnosticsError;
use crate::models::ScalarFunctionModel;
use crate::numerics::ols_slope;
use crate::spde::{simulate_path, ExtraDrift, FieldState, NoiseSource, RunOptions, SolverConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub t: f64,
    /// Monte Carlo `E sup_{s <= t, x} |Z|^p`.
    pub estimate: f64,
    pub std_error: f64,
    /// `C_p t^{p/4 - 3/2} ∫∫ |phi|^p` with `C_p` fixed at the first row.
    pub bound: f64,
    pub dominated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentProbeReport {
    pub p: f64,
    pub c_hat: f64,
    pub rows: Vec<MomentRow>,
    /// Least-squares slope of `ln E` against `ln t`.
    pub slope: f64,
    pub slope_band: (f64, f64),
    pub pass: bool,
}

/// Stochastic convolution `Z` of a constant profile `phi` on the periodic
/// interval, simulated as the mild solution with `b = 0`, `sigma = phi`,
/// `u0 = 0`. The sup over `[0, t] x space` is read from the sampled grid.
pub fn moment_scaling_probe(
    phi: f64,
    t_grid: &[f64],
    p: f64,
    paths: u64,
    config: &SolverConfig,
    master_seed: u64,
) -> Result<MomentProbeReport, DiagnosticsError> {
    if !(p > 6.0) {
        return Err(DiagnosticsError::Parameter(format!("p must exceed 6, got {p}")));
    }
    if t_grid.is_empty() || t_grid.windows(2).any(|w| w[1] <= w[0]) || t_grid.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
        return Err(DiagnosticsError::Precondition("T-grid must be increasing inside (0, 1)".into()));
    }
    if paths < 2 {
        return Err(DiagnosticsError::InsufficientData("need at least two paths".into()));
    }
    let t_max = *t_grid.last().unwrap();
    let cfg = SolverConfig { horizon: t_max, u_cap: f64::INFINITY, ..config.clone() };
    let zero = ScalarFunctionModel::constant(0.0);
    let sigma = ScalarFunctionModel::constant(phi);
    let u0 = FieldState::constant(cfg.grid, 0.0);
    let opts = RunOptions::new(f64::INFINITY);
    let sups: Vec<Vec<f64>> = (0..paths)
        .into_par_iter()
        .map(|id| {
            let tr = simulate_path(&u0, &cfg, &zero, &sigma, ExtraDrift::None, NoiseSource::new(master_seed, id), &opts)
                .map_err(|e| DiagnosticsError::Precondition(e.to_string()))?;
            let mut out = Vec::with_capacity(t_grid.len());
            let mut sup: f64 = 0.0;
            let mut k = 0;
            for r in &tr.rows {
                while k < t_grid.len() && r.t > t_grid[k] + 1e-12 {
                    out.push(sup.powf(p));
                    k += 1;
                }
                sup = sup.max(r.linf);
            }
            while out.len() < t_grid.len() {
                out.push(sup.powf(p));
            }
            Ok(out)
        })
        .collect::<Result<_, DiagnosticsError>>()?;
    let n = paths as f64;
    let mut stats = Vec::with_capacity(t_grid.len());
    for (k, &t) in t_grid.iter().enumerate() {
        let mean = sups.iter().map(|s| s[k]).sum::<f64>() / n;
        let var = sups.iter().map(|s| (s[k] - mean).powi(2)).sum::<f64>() / (n - 1.0);
        stats.push((t, mean, (var / n).sqrt()));
    }
    let shape = |t: f64| t.powf(p / 4.0 - 1.5) * 2.0 * PI * t * phi.abs().powf(p);
    let c_hat = if phi == 0.0 { 0.0 } else { stats[0].1 / shape(stats[0].0) };
    let rows: Vec<MomentRow> = stats
        .iter()
        .map(|&(t, estimate, std_error)| {
            let bound = c_hat * shape(t);
            MomentRow { t, estimate, std_error, bound, dominated: estimate <= bound * (1.0 + 1e-12) }
        })
        .collect();
    let slope = if phi == 0.0 || stats.len() < 2 {
        f64::NAN
    } else {
        let xs: Vec<f64> = stats.iter().map(|s| s.0.ln()).collect();
        let ys: Vec<f64> = stats.iter().map(|s| s.1.ln()).collect();
        ols_slope(&xs, &ys)
    };
    let slope_band = (p / 4.0 - 1.0, p / 4.0 + 0.5);
    let slope_ok = phi == 0.0 || (slope >= slope_band.0 && slope <= slope_band.1);
    let pass = rows.iter().all(|r| r.dominated) && slope_ok;
    Ok(MomentProbeReport { p, c_hat, rows, slope, slope_band, pass })
}
