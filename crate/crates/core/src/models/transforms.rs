//! Auxiliary functions built from a dominating function `h`.

use super::{Domain, Family, ModelError, ScalarFunctionModel};
use crate::numerics::{adaptive_simpson, bisect_increasing, expand_bracket, periodic_trapezoid};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// `f(u) = u h(u)` and `g(u) = u h^{-1}(u)` with inverses by monotone bisection.
///
/// `g^{-1}` is obtained by inverting `g` directly rather than through
/// `h(f^{-1})`, so the product identity `f^{-1}(w) g^{-1}(w) = w` is a genuine
/// check of the pair.
#[derive(Debug, Clone)]
pub struct FgPair {
    h: ScalarFunctionModel,
    h0: f64,
}

fn inversion(what: &str, w: f64) -> ModelError {
    ModelError::Inversion(format!("{what}: no bracket contains {w}"))
}

impl FgPair {
    pub fn h(&self) -> &ScalarFunctionModel {
        &self.h
    }

    pub fn f(&self, u: f64) -> Result<f64, ModelError> {
        Ok(u * self.h.evaluate(u, 0)?)
    }

    pub fn h_inverse(&self, y: f64) -> Result<f64, ModelError> {
        if y < self.h0 {
            return Err(inversion("h^{-1}", y));
        }
        let h = |u: f64| self.h.value(u);
        let hi = expand_bracket(h, y, 1.0).ok_or_else(|| inversion("h^{-1}", y))?;
        bisect_increasing(h, y, 0.0, hi).ok_or_else(|| inversion("h^{-1}", y))
    }

    /// Defined for `x >= h(0)`.
    pub fn g(&self, x: f64) -> Result<f64, ModelError> {
        Ok(x * self.h_inverse(x)?)
    }

    pub fn f_inverse(&self, w: f64) -> Result<f64, ModelError> {
        if w < 0.0 {
            return Err(inversion("f^{-1}", w));
        }
        let f = |u: f64| self.f(u).unwrap_or(f64::NAN);
        let hi = expand_bracket(f, w, 1.0).ok_or_else(|| inversion("f^{-1}", w))?;
        bisect_increasing(f, w, 0.0, hi).ok_or_else(|| inversion("f^{-1}", w))
    }

    pub fn g_inverse(&self, w: f64) -> Result<f64, ModelError> {
        let g = |x: f64| self.g(x).unwrap_or(f64::NAN);
        let lo = self.h0;
        let hi = expand_bracket(g, w, lo.max(1.0)).ok_or_else(|| inversion("g^{-1}", w))?;
        bisect_increasing(g, w, lo, hi).ok_or_else(|| inversion("g^{-1}", w))
    }
}

pub fn fg_pair(h: &ScalarFunctionModel) -> Result<FgPair, ModelError> {
    let h0 = h.evaluate(0.0, 0)?;
    if !(h0 >= 0.0) {
        return Err(ModelError::Precondition(format!("h(0) = {h0} must be nonnegative")));
    }
    if h.evaluate(1.0, 0)? <= h0 {
        return Err(ModelError::Precondition("h must be increasing".into()));
    }
    Ok(FgPair { h: h.clone(), h0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JensenReport {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// `∫ h(v) <= 2 pi ∫ (v + 1/(2 pi)) h(v) / (1 + ∫ v)` on the periodic grid.
pub fn jensen_check(h: &ScalarFunctionModel, v: &[f64]) -> Result<JensenReport, ModelError> {
    if let Some(&bad) = v.iter().find(|x| !(**x >= 0.0)) {
        return Err(ModelError::Precondition(format!("grid function has a negative entry {bad}")));
    }
    let hv: Vec<f64> = v.iter().map(|&x| h.evaluate(x, 0)).collect::<Result<_, _>>()?;
    let lhs = periodic_trapezoid(&hv);
    let weighted: Vec<f64> = v.iter().zip(&hv).map(|(x, hx)| (x + 1.0 / (2.0 * PI)) * hx).collect();
    let rhs = 2.0 * PI * periodic_trapezoid(&weighted) / (1.0 + periodic_trapezoid(v));
    let pass = lhs <= rhs + 1e-9 * rhs.abs().max(1.0);
    Ok(JensenReport { lhs, rhs, pass })
}

/// `s -> e^{-s} (h(e^s) - h(0))`, evaluated in log space for large `s`.
pub fn g_transform(h: &ScalarFunctionModel) -> Result<ScalarFunctionModel, ModelError> {
    let h0 = h.evaluate(0.0, 0)?;
    h.evaluate(1.0, 0)?;
    Ok(ScalarFunctionModel::new(
        Family::LogTransform { base: Box::new(h.clone()), base_at_zero: h0 },
        Domain::Real,
    ))
}

/// `∫_1^x du / g(2u / (2 gamma - 1))`.
pub fn capital_g(g: &ScalarFunctionModel, gamma: f64, x: f64) -> Result<f64, ModelError> {
    if !(gamma > 0.5 && gamma < 1.0) {
        return Err(ModelError::Parameter(format!("gamma must lie in (1/2, 1), got {gamma}")));
    }
    if !(x >= 1.0) {
        return Err(ModelError::Precondition(format!("x must be at least 1, got {x}")));
    }
    let k = 2.0 / (2.0 * gamma - 1.0);
    let integrand = |u: f64| -> Result<f64, ModelError> {
        let gv = g.evaluate(k * u, 0)?;
        if !(gv > 0.0) {
            return Err(ModelError::Precondition(format!("g({}) = {gv} is not positive", k * u)));
        }
        Ok(1.0 / gv)
    };
    // Geometric panels keep the relative accuracy uniform over long ranges.
    let mut total = 0.0;
    let mut a = 1.0;
    while a < x {
        let b = (2.0 * a).min(x);
        total += adaptive_simpson(integrand, a, b, 1e-14 * (b - a), 40)?;
        a = b;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fg_pair_examples() {
        let p = fg_pair(&ScalarFunctionModel::power(1.0, 1.0)).unwrap();
        let w = 7.0;
        assert!((p.f_inverse(w).unwrap() * p.g_inverse(w).unwrap() / w - 1.0).abs() < 1e-10);
        let p = fg_pair(&ScalarFunctionModel::power(1.0, 2.0)).unwrap();
        assert!((p.f_inverse(8.0).unwrap() - 2.0).abs() < 1e-10);
        assert!((p.g_inverse(8.0).unwrap() - 4.0).abs() < 1e-9);
        let p = fg_pair(&ScalarFunctionModel::one_plus_u_log(1.0, 1.0, 0.0)).unwrap();
        for w in [1.0, 10.0, 1e3] {
            let prod = p.f_inverse(w).unwrap() * p.g_inverse(w).unwrap();
            assert!((prod / w - 1.0).abs() < 1e-8, "{w}: {prod}");
        }
    }

    #[test]
    fn jensen_examples() {
        let h = ScalarFunctionModel::power(1.0, 2.0);
        let r = jensen_check(&h, &[0.0; 32]).unwrap();
        assert_eq!((r.lhs, r.rhs, r.pass), (0.0, 0.0, true));
        let r = jensen_check(&h, &[1.0; 32]).unwrap();
        assert!((r.lhs - 2.0 * PI).abs() < 1e-12 && (r.rhs - 2.0 * PI).abs() < 1e-12 && r.pass);
        let v: Vec<f64> = (0..256).map(|i| 1.0 + (-PI + 2.0 * PI * i as f64 / 256.0).sin()).collect();
        let r = jensen_check(&h, &v).unwrap();
        assert!(r.pass && r.lhs < r.rhs);
        assert!(jensen_check(&h, &[1.0, -0.1]).is_err());
    }

    #[test]
    fn g_transform_examples() {
        let g = g_transform(&ScalarFunctionModel::power(1.0, 1.0)).unwrap();
        for s in [-3.0, 0.0, 5.0, 800.0] {
            assert!((g.value(s) - 1.0).abs() < 1e-12);
        }
        let g = g_transform(&ScalarFunctionModel::power(1.0, 2.0)).unwrap();
        assert!((g.value(2.0) - 2f64.exp()).abs() < 1e-12);
        assert!((g.ln_value_at_log(1000f64.ln()).unwrap() - 1000.0).abs() < 1e-9);
        let h = ScalarFunctionModel::new(
            Family::AffineLogPower { amplitude: 1.0, offset: 0.0, shift: 1.0, exponent: 1.0, floor: None, constant: 0.0 },
            Domain::HalfLine,
        );
        let g = g_transform(&h).unwrap();
        for s in [-2.0, 0.5, 30.0] {
            let want = (1.0 + f64::exp(s)).ln();
            assert!((g.value(s) - want).abs() < 1e-12 * want.max(1.0));
        }
    }

    #[test]
    fn capital_g_examples() {
        let one = ScalarFunctionModel::constant(1.0);
        assert!((capital_g(&one, 0.75, 5.0).unwrap() - 4.0).abs() < 1e-12);
        let e = g_transform(&ScalarFunctionModel::power(1.0, 2.0)).unwrap();
        let want = ((-4f64).exp() - (-8f64).exp()) / 4.0;
        assert!((capital_g(&e, 0.75, 2.0).unwrap() - want).abs() < 1e-13);
        let lin = ScalarFunctionModel::power_plus(1.0, 1.0, 1.0).with_domain(Domain::HalfLine);
        let want = 0.25 * (41.0f64 / 5.0).ln();
        assert!((capital_g(&lin, 0.75, 10.0).unwrap() - want).abs() < 1e-12);
        assert!(matches!(capital_g(&ScalarFunctionModel::constant(-1.0), 0.75, 2.0), Err(ModelError::Precondition(_))));
    }
}
