//! Numerical classification of `∫_lower^∞ du / h(u)`.
//!
//! A finite procedure cannot prove divergence, so the verdict combines two
//! pieces of evidence and records which one decided:
//!
//! * partial integrals under repeated doubling of `ln(upper)` (the integral is
//!   computed in the variable `s = ln u`, so `h` is only ever touched through
//!   [`ScalarFunctionModel::ln_value_at_log`] and never overflows);
//! * comparison of `h` against the divergent tails `u`, `u ln u` and
//!   `u ln u ln ln u` at the far probe points.

use super::{ModelError, ScalarFunctionModel};
use crate::numerics::integrate;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureBudget {
    /// Largest `ln(upper)` explored.
    pub max_log_upper: f64,
    /// Relative size of the last doubling increment below which the partial
    /// integral counts as converged.
    pub rel_tol: f64,
    /// Log-growth of a comparator ratio across the far probes still counted
    /// as bounded.
    pub bounded_slack: f64,
}

impl Default for QuadratureBudget {
    fn default() -> Self {
        Self { max_log_upper: 2f64.powi(24), rel_tol: 1e-6, bounded_slack: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OsgoodClass {
    Convergent,
    Divergent,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OsgoodVerdict {
    pub classification: OsgoodClass,
    /// `∫_lower^upper du / h(u)` at the largest explored upper limit.
    pub partial_integral: f64,
    /// `ln` of the largest explored upper limit.
    pub explored_log_upper: f64,
    pub tail_evidence: String,
}

impl OsgoodVerdict {
    pub fn explored_upper_limit(&self) -> f64 {
        self.explored_log_upper.exp()
    }
}

const COMPARATORS: [&str; 3] = ["u", "u ln u", "u ln u ln ln u"];

/// `ln(h(u) / comparator(u))` at `u = e^s`.
fn comparator_log_ratio(ln_h: f64, s: f64, which: usize) -> f64 {
    match which {
        0 => ln_h - s,
        1 => ln_h - s - s.ln(),
        _ => ln_h - s - s.ln() - s.ln().ln(),
    }
}

pub fn osgood_classify(
    h: &ScalarFunctionModel,
    lower: f64,
    budget: QuadratureBudget,
) -> Result<OsgoodVerdict, ModelError> {
    if !(lower >= 1.0) {
        return Err(ModelError::Precondition(format!("lower limit must be at least 1, got {lower}")));
    }
    let ln_h = |s: f64| -> Result<f64, ModelError> {
        h.ln_value_at_log(s).map_err(|_| {
            ModelError::Precondition(format!("h must be positive on [lower, inf); fails at u = e^{s}"))
        })
    };
    let s0 = lower.ln();
    let mut knots = vec![s0];
    let mut k = 0;
    loop {
        let next = s0 + 2f64.powi(k);
        if next >= budget.max_log_upper {
            if *knots.last().unwrap() < budget.max_log_upper {
                knots.push(budget.max_log_upper);
            }
            break;
        }
        knots.push(next);
        k += 1;
    }

    let mut partial = 0.0;
    let mut increments = Vec::with_capacity(knots.len());
    for w in knots.windows(2) {
        let seg = integrate(|s| ln_h(s).map(|l| (s - l).exp()), w[0], w[1], 1e-14 * (w[1] - w[0]), 8)?;
        partial += seg;
        increments.push(seg);
    }
    let last = *increments.last().unwrap();
    let converged = last <= budget.rel_tol * partial.abs();

    // Comparator ratios at the far probes (the last three knots, all >= e^e
    // so that ln ln u is defined).
    let probes: Vec<f64> = knots.iter().rev().take(3).rev().copied().filter(|&s| s > 1.0).collect();
    let mut bounded_by = None;
    if probes.len() == 3 {
        let lns: Vec<f64> = probes.iter().map(|&s| ln_h(s)).collect::<Result<_, _>>()?;
        for which in 0..COMPARATORS.len() {
            let r: Vec<f64> = probes.iter().zip(&lns).map(|(&s, &l)| comparator_log_ratio(l, s, which)).collect();
            if r.iter().all(|v| v.is_finite()) && r.windows(2).all(|w| w[1] - w[0] <= budget.bounded_slack) {
                bounded_by = Some(which);
                break;
            }
        }
    }

    let (classification, tail_evidence) = match (converged, bounded_by) {
        (true, None) => (
            OsgoodClass::Convergent,
            format!(
                "partial integral stable under doubling of ln(upper): last increment {last:.3e} \
                 relative to {partial:.6e}; h outgrows u ln u ln ln u at the far probes"
            ),
        ),
        (false, Some(which)) => (
            OsgoodClass::Divergent,
            format!(
                "h / ({}) stays bounded at the far probes, so 1/h dominates a divergent tail; \
                 doubling increments do not vanish (last {last:.3e})",
                COMPARATORS[which]
            ),
        ),
        (true, Some(which)) => (
            OsgoodClass::Inconclusive,
            format!(
                "conflicting evidence: partial integral looks converged but h / ({}) stays bounded",
                COMPARATORS[which]
            ),
        ),
        (false, None) => (
            OsgoodClass::Inconclusive,
            format!(
                "budget exhausted: last doubling increment {last:.3e} not below tolerance and no \
                 divergent comparator bounds h"
            ),
        ),
    };
    Ok(OsgoodVerdict { classification, partial_integral: partial, explored_log_upper: *knots.last().unwrap(), tail_evidence })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Family, Domain};

    fn classify(h: &ScalarFunctionModel) -> OsgoodVerdict {
        osgood_classify(h, 1.0, QuadratureBudget::default()).unwrap()
    }

    #[test]
    fn square_converges_to_one() {
        let v = classify(&ScalarFunctionModel::power(1.0, 2.0));
        assert_eq!(v.classification, OsgoodClass::Convergent);
        assert!((v.partial_integral - 1.0).abs() < 1e-6);
    }

    #[test]
    fn u_log_u_and_identity_diverge() {
        let v = classify(&ScalarFunctionModel::one_plus_u_log(1.0, 1.0, 0.0));
        assert_eq!(v.classification, OsgoodClass::Divergent, "{}", v.tail_evidence);
        let v = classify(&ScalarFunctionModel::power(1.0, 1.0));
        assert_eq!(v.classification, OsgoodClass::Divergent);
        let v = classify(&ScalarFunctionModel::u_log_u_loglog_u().with_domain(Domain::HalfLine));
        assert_eq!(v.classification, OsgoodClass::Divergent, "{}", v.tail_evidence);
    }

    #[test]
    fn squared_log_is_not_called_divergent() {
        let h = ScalarFunctionModel::one_plus_u_log(1.0, 2.0, 0.0);
        let v = classify(&h);
        assert_ne!(v.classification, OsgoodClass::Divergent);
    }

    #[test]
    fn scaling_does_not_change_classification() {
        for h in [
            ScalarFunctionModel::power(1.0, 2.0),
            ScalarFunctionModel::power(1.0, 1.0),
            ScalarFunctionModel::one_plus_u_log(1.0, 1.0, 0.0),
        ] {
            let mut scaled = h.clone();
            match &mut scaled.family {
                Family::Power { amplitude, .. } | Family::AffineLogPower { amplitude, .. } => *amplitude *= 7.0,
                _ => unreachable!(),
            }
            assert_eq!(classify(&h).classification, classify(&scaled).classification);
        }
    }

    #[test]
    fn rejects_nonpositive_h_and_small_lower() {
        let h = ScalarFunctionModel::sine(1.0, 1.0, 0.0);
        assert!(matches!(osgood_classify(&h, 1.0, QuadratureBudget::default()), Err(ModelError::Precondition(_))));
        let h = ScalarFunctionModel::power(1.0, 2.0);
        assert!(osgood_classify(&h, 0.5, QuadratureBudget::default()).is_err());
    }
}
