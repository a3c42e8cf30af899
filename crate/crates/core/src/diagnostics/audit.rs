use super::{count_triplings, DiagnosticsError, Direction};
use crate::spde::{semigroup_apply, FieldState, Grid1D, Trajectory};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelFrequency {
    /// Target exponent of the tripling event.
    pub level: i32,
    /// Fraction of paths with at least one tripling into `3^level`.
    pub frequency: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountSummary {
    pub m0: i32,
    pub mean: f64,
    pub std_error: f64,
    pub max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriplingAudit {
    pub m0: i32,
    pub paths: usize,
    pub counts: CountSummary,
    pub per_level: Vec<LevelFrequency>,
    /// Ensemble mean of `∫∫ sigma^2`.
    pub qv_budget: f64,
    /// Counts for `m0` in 1, 2, 3.
    pub sensitivity: Vec<CountSummary>,
    /// Paths that crossed the overflow cap; their counts are truncated.
    pub capped_paths: usize,
    /// Counts with the doubled cap, when that ensemble was supplied.
    pub doubled: Option<CountSummary>,
    pub stable: Option<bool>,
    pub pass: bool,
}

fn summary(ensemble: &[Trajectory], m0: i32) -> CountSummary {
    let counts: Vec<usize> = ensemble.iter().map(|t| count_triplings(t.stopping.rho_sequence(), m0)).collect();
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<usize>() as f64 / n;
    let var = if counts.len() > 1 { counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    CountSummary { m0, mean, std_error: (var / n).sqrt(), max: counts.iter().copied().max().unwrap_or(0) }
}

/// Tripling counts above `3^{m0}`. Finiteness is read as no path reaching the
/// cap; stability compares against a rerun on the same noise with `2 U_cap`.
pub fn tripling_probability_audit(ensemble: &[Trajectory], doubled: Option<&[Trajectory]>, m0: i32) -> Result<TriplingAudit, DiagnosticsError> {
    if ensemble.is_empty() {
        return Err(DiagnosticsError::InsufficientData("empty ensemble".into()));
    }
    let counts = summary(ensemble, m0);
    let mut hits: std::collections::BTreeMap<i32, usize> = Default::default();
    for tr in ensemble {
        let mut seen = std::collections::BTreeSet::new();
        for e in tr.stopping.rho_sequence() {
            if e.direction == Direction::Triple && e.from >= m0 {
                seen.insert(e.to);
            }
        }
        for l in seen {
            *hits.entry(l).or_default() += 1;
        }
    }
    let n = ensemble.len() as f64;
    let per_level = hits.into_iter().map(|(level, c)| LevelFrequency { level, frequency: c as f64 / n }).collect();
    let qv_budget = ensemble.iter().map(|t| t.sigma_sq_integral).sum::<f64>() / n;
    let capped_paths = ensemble.iter().filter(|t| t.outcome.blew_up().is_some()).count();
    let doubled_summary = doubled.filter(|d| !d.is_empty()).map(|d| summary(d, m0));
    let stable = doubled_summary.map(|d| {
        let se = (d.std_error.powi(2) + counts.std_error.powi(2)).sqrt();
        (d.mean - counts.mean).abs() <= 3.0 * se + 1e-12
    });
    let pass = capped_paths == 0 && stable.unwrap_or(true);
    Ok(TriplingAudit {
        m0,
        paths: ensemble.len(),
        counts,
        per_level,
        qv_budget,
        sensitivity: (1..=3).map(|m| summary(ensemble, m)).collect(),
        capped_paths,
        doubled: doubled_summary,
        stable,
        pass,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowRow {
    pub m: i32,
    pub t: f64,
    pub linf: f64,
    pub target: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowCheck {
    pub mass: f64,
    pub constant: f64,
    /// `T_m = C^2 M^2 3^{-2(m-2)}`, the window for which `C M T^{-1/2} = 3^{m-2}`.
    pub consistent: Vec<WindowRow>,
    /// `T_m = C^{-2} M^{-2} 3^{-2(m-2)}` as printed.
    pub literal: Vec<WindowRow>,
}

/// Propagates the worst-case field of L1 mass `mass` (a one-cell spike) over
/// `T_m` and compares its sup norm with `3^{m-2}`.
pub fn window_check(grid: Grid1D, mass: f64, constant: f64, ms: &[i32]) -> WindowCheck {
    let mut spike = vec![0.0; grid.nx()];
    spike[grid.nx() / 2] = mass / grid.dx();
    let spike = FieldState::new(0.0, spike);
    let row = |m: i32, t: f64| {
        let target = 3f64.powi(m - 2);
        let linf = semigroup_apply(&spike, t).linf();
        WindowRow { m, t, linf, target, pass: linf <= target * (1.0 + 1e-9) }
    };
    let scale = |m: i32| 3f64.powi(-2 * (m - 2));
    WindowCheck {
        mass,
        constant,
        consistent: ms.iter().map(|&m| row(m, constant * constant * mass * mass * scale(m))).collect(),
        literal: ms.iter().map(|&m| row(m, scale(m) / (constant * constant * mass * mass))).collect(),
    }
}
