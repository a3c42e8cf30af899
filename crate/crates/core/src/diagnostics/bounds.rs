use super::{DiagnosticsError, SemimartingaleLedger};
use crate::models::{capital_g, AssumptionReport, ScalarFunctionModel};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftBoundReport {
    /// Largest `Σ (B - S) - C t` over the path.
    pub max_excess: f64,
    pub constant: f64,
    pub pass: bool,
}

/// Checks `B(t) - S(t) <= C t` along the log-ledger with an explicit `C`.
pub fn drift_bound_check(ledger: &SemimartingaleLedger, constant: f64) -> DriftBoundReport {
    let t0 = ledger.times.first().copied().unwrap_or(0.0);
    let mut acc = 0.0;
    let mut worst = f64::NEG_INFINITY;
    for k in 0..ledger.steps() {
        acc += ledger.log_b[k] - ledger.log_s[k];
        let t = ledger.times[k + 1] - t0;
        worst = worst.max(acc - constant * t);
    }
    if ledger.steps() == 0 {
        worst = 0.0;
    }
    let pass = worst <= 1e-9 * (constant * ledger.final_time()).abs().max(1.0);
    DriftBoundReport { max_excess: worst, constant, pass }
}

/// [`drift_bound_check`] with the constant derived by the assumption checker.
pub fn drift_bound_check_a(ledger: &SemimartingaleLedger, report: &AssumptionReport) -> Result<DriftBoundReport, DiagnosticsError> {
    let c = report
        .drift_constant
        .ok_or_else(|| DiagnosticsError::Precondition("the assumption report carries no drift constant".into()))?;
    Ok(drift_bound_check(ledger, c))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoobRow {
    pub m: f64,
    pub exceed: usize,
    pub paths: usize,
    pub frequency: f64,
    pub bound: f64,
    /// Binomial standard error at `p = min(bound, 1)`.
    pub std_error: f64,
    pub pass: bool,
}

/// Which display the bound follows.
#[derive(Debug, Clone)]
pub enum DoobCase<'a> {
    /// `(log(1 + I0) + (C + 2 pi eps^{-alpha}) T) / log(1 + M)`.
    A,
    /// Same with `G(log(·))` in place of `log(·)`, `G` built from `g`.
    B { g: &'a ScalarFunctionModel, gamma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoobInputs {
    pub i0: f64,
    pub horizon: f64,
    pub eps: f64,
    pub alpha: f64,
    pub constant: f64,
}

pub fn doob_bound(case: &DoobCase<'_>, inp: DoobInputs, m: f64) -> Result<f64, DiagnosticsError> {
    let budget = inp.constant + 2.0 * std::f64::consts::PI * inp.eps.powf(-inp.alpha);
    match case {
        DoobCase::A => Ok(((1.0 + inp.i0).ln() + budget * inp.horizon) / (1.0 + m).ln()),
        DoobCase::B { g, gamma } => {
            let big = |x: f64| -> Result<f64, DiagnosticsError> {
                if x < 1.0 {
                    // G is only defined from 1 on; below that the numerator is 0
                    return Ok(0.0);
                }
                capital_g(g, *gamma, x).map_err(|e| DiagnosticsError::Parameter(e.to_string()))
            };
            let den = big((1.0 + m).ln())?;
            if den <= 0.0 {
                return Ok(f64::INFINITY);
            }
            Ok((big((1.0 + inp.i0).ln())? + budget * inp.horizon) / den)
        }
    }
}

/// Compares empirical `P(sup I > M)` with the displayed bound at each `M`.
/// A bound of 1 or more cannot be violated.
pub fn doob_bound_check(sup_i: &[f64], m_grid: &[f64], case: &DoobCase<'_>, inp: DoobInputs) -> Result<Vec<DoobRow>, DiagnosticsError> {
    if sup_i.is_empty() {
        return Err(DiagnosticsError::InsufficientData("no paths".into()));
    }
    let n = sup_i.len();
    m_grid
        .iter()
        .map(|&m| {
            let exceed = sup_i.iter().filter(|&&s| s > m || s.is_nan()).count();
            let frequency = exceed as f64 / n as f64;
            let bound = doob_bound(case, inp, m)?;
            let p = bound.min(1.0);
            let std_error = (p * (1.0 - p) / n as f64).sqrt();
            let pass = bound >= 1.0 || frequency <= bound + 3.0 * std_error;
            Ok(DoobRow { m, exceed, paths: n, frequency, bound, std_error, pass })
        })
        .collect()
}
