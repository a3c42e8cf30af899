//! Parameterized scalar function families for the reaction term `b`, the
//! noise coefficient `sigma` and the dominating function `h`, together with
//! the analytic condition checkers built on top of them.
//!
//! A [`ScalarFunctionModel`] is an immutable value: a [`Family`] (closed-form
//! formula on its natural domain), a [`Domain`] describing how the formula is
//! carried to the real line, and an optional clamp level (see
//! [`ScalarFunctionModel::cutoff`]).

mod conditions;
mod osgood;
mod spline;
mod transforms;

pub use conditions::{
    check_assumption_a, check_assumption_b, check_small_noise_bound, convexity_ratio_check, AssumptionCase, AssumptionReport,
    CaseAOptions, CaseBOptions, ConvexityReport, Verdict, Witness, WitnessStatus,
};
pub use osgood::{osgood_classify, OsgoodClass, OsgoodVerdict, QuadratureBudget};
pub use spline::CubicSpline;
pub use transforms::{capital_g, fg_pair, g_transform, jensen_check, FgPair, JensenReport};

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::E;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("domain error at u = {u}: {reason}")]
    Domain { u: f64, reason: String },
    #[error("u = {u} lies outside the table range [{lo}, {hi}]")]
    Range { u: f64, lo: f64, hi: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("h'(u) vanishes at u = {u}")]
    SingularPoint { u: f64 },
    #[error("inversion failed: {0}")]
    Inversion(String),
    #[error("model spec key `{key}`: {reason}")]
    Spec { key: String, reason: String },
}

/// How a family formula is extended to the whole real line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    /// Only `u >= 0` is admissible.
    #[default]
    HalfLine,
    /// The formula is used as written for every real `u`.
    Real,
    /// `u -> f(|u|)`.
    Even,
    /// `u -> sign(u) f(|u|)`.
    Odd,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// `A u^beta + c`.
    Power { amplitude: f64, exponent: f64, constant: f64 },
    /// `A (offset + u) (ln max(shift + u, floor))^beta + c`.
    AffineLogPower {
        amplitude: f64,
        offset: f64,
        shift: f64,
        exponent: f64,
        floor: Option<f64>,
        constant: f64,
    },
    /// `A (e + u) ln(e + u) ln ln(e + u) + c`.
    LogIterated { amplitude: f64, constant: f64 },
    Constant { value: f64 },
    /// `A exp(rate u)`.
    Exponential { amplitude: f64, rate: f64 },
    /// `A sin(omega u + phase)`.
    Sine { amplitude: f64, omega: f64, phase: f64 },
    Tabulated(CubicSpline),
    /// `s -> e^{-s} (h(e^s) - h(0))`.
    LogTransform { base: Box<ScalarFunctionModel>, base_at_zero: f64 },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Power { .. } => "power",
            Family::AffineLogPower { .. } => "affine-log-power",
            Family::LogIterated { .. } => "log-iterated",
            Family::Constant { .. } => "constant",
            Family::Exponential { .. } => "exponential",
            Family::Sine { .. } => "sine",
            Family::Tabulated(_) => "tabulated",
            Family::LogTransform { .. } => "log-transform",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarFunctionModel {
    pub family: Family,
    pub domain: Domain,
    pub cutoff: Option<f64>,
}

fn domain_err(u: f64, reason: impl Into<String>) -> ModelError {
    ModelError::Domain { u, reason: reason.into() }
}

/// Falling factorial `e (e-1) ... (e-k+1)`.
fn falling(e: f64, k: u8) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (e - j as f64))
}

fn is_integer(x: f64) -> bool {
    x.fract() == 0.0 && x.abs() < 1e15
}

/// `x^p` for a possibly negative base; `None` when undefined.
fn signed_pow(x: f64, p: f64) -> Option<f64> {
    if x > 0.0 {
        // integer and half-integer exponents avoid powf in the stepping loop
        let twice = 2.0 * p;
        Some(if is_integer(p) && p.abs() < 64.0 {
            x.powi(p as i32)
        } else if is_integer(twice) && p.abs() < 64.0 {
            x.powi((p - 0.5) as i32) * x.sqrt()
        } else {
            x.powf(p)
        })
    } else if x == 0.0 {
        if p > 0.0 {
            Some(0.0)
        } else if p == 0.0 {
            Some(1.0)
        } else {
            None
        }
    } else if is_integer(p) {
        Some(x.powi(p as i32))
    } else {
        None
    }
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

impl ScalarFunctionModel {
    pub fn new(family: Family, domain: Domain) -> Self {
        Self { family, domain, cutoff: None }
    }

    /// `A u^beta` evaluated as `A |u|^beta` off the half line.
    pub fn power(amplitude: f64, exponent: f64) -> Self {
        Self::new(Family::Power { amplitude, exponent, constant: 0.0 }, Domain::Even)
    }

    /// `A |u|^beta + c`.
    pub fn power_plus(amplitude: f64, exponent: f64, constant: f64) -> Self {
        Self::new(Family::Power { amplitude, exponent, constant }, Domain::Even)
    }

    /// Odd extension `sign(u) A |u|^beta`.
    pub fn odd_power(amplitude: f64, exponent: f64) -> Self {
        Self::new(Family::Power { amplitude, exponent, constant: 0.0 }, Domain::Odd)
    }

    pub fn constant(value: f64) -> Self {
        Self::new(Family::Constant { value }, Domain::Real)
    }

    /// `A (1 + u) (ln(1 + u))^beta + c` on the half line.
    pub fn one_plus_u_log(amplitude: f64, exponent: f64, constant: f64) -> Self {
        Self::new(
            Family::AffineLogPower { amplitude, offset: 1.0, shift: 1.0, exponent, floor: None, constant },
            Domain::HalfLine,
        )
    }

    /// `u ln(max(u, 1))`, odd-extended to the real line.
    pub fn u_log_u() -> Self {
        Self::new(
            Family::AffineLogPower {
                amplitude: 1.0,
                offset: 0.0,
                shift: 0.0,
                exponent: 1.0,
                floor: Some(1.0),
                constant: 0.0,
            },
            Domain::Odd,
        )
    }

    /// `(e + u) ln(e + u) ln ln(e + u)`, odd-extended: a drift growing just
    /// faster than `u ln u` that still satisfies the non-explosive Osgood
    /// condition. It vanishes at `u = 0`.
    pub fn u_log_u_loglog_u() -> Self {
        Self::new(Family::LogIterated { amplitude: 1.0, constant: 0.0 }, Domain::Odd)
    }

    pub fn exponential(amplitude: f64, rate: f64) -> Self {
        Self::new(Family::Exponential { amplitude, rate }, Domain::Real)
    }

    pub fn sine(amplitude: f64, omega: f64, phase: f64) -> Self {
        Self::new(Family::Sine { amplitude, omega, phase }, Domain::Real)
    }

    pub fn tabulated(knots: &[[f64; 2]]) -> Result<Self, ModelError> {
        let spline = CubicSpline::new(knots).map_err(|e| ModelError::Spec { key: "table".into(), reason: e })?;
        Ok(Self::new(Family::Tabulated(spline), Domain::Real))
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }

    /// Clamped copy: `m(u)` on `[-n, n]`, `m(-n)` below and `m(n)` above.
    ///
    /// Nested clamps compose to the tighter level.
    pub fn cutoff(&self, n: f64) -> Self {
        let level = match self.cutoff {
            Some(prev) => prev.min(n),
            None => n,
        };
        Self { cutoff: Some(level), ..self.clone() }
    }

    /// True for the families that are positive, nondecreasing and convex on
    /// `[0, inf)` for the stored parameters (candidates for `h`).
    pub fn is_increasing_convex(&self) -> bool {
        match &self.family {
            Family::Power { amplitude, exponent, constant } => {
                *amplitude > 0.0 && *exponent >= 1.0 && *constant >= 0.0
            }
            Family::AffineLogPower { amplitude, offset, shift, exponent, floor, constant } => {
                *amplitude > 0.0
                    && *exponent >= 1.0
                    && offset == shift
                    && *shift >= 1.0
                    && floor.is_none()
                    && *constant >= 0.0
            }
            Family::LogIterated { amplitude, constant } => *amplitude > 0.0 && *constant >= 0.0,
            Family::Constant { value } => *value >= 0.0,
            Family::Exponential { amplitude, rate } => *amplitude > 0.0 && *rate >= 0.0,
            _ => false,
        }
    }

    /// Proposes a dominating `h` for a drift model: the half-line envelope of
    /// `|b|` plus `slack`. Only closed-form families with a monotone envelope
    /// are supported.
    pub fn propose_envelope(&self, slack: f64) -> Result<Self, ModelError> {
        let family = match &self.family {
            Family::Power { amplitude, exponent, constant } if *exponent >= 0.0 => Family::Power {
                amplitude: amplitude.abs(),
                exponent: *exponent,
                constant: constant.abs() + slack,
            },
            Family::AffineLogPower { amplitude, offset, shift, exponent, floor, constant } => {
                // (offset + u) ln(...)^beta is dominated by (1 + u) (ln(1 + u))^beta
                // once offset, shift <= 1 and a floor of at most e is used.
                let floor_ok = match floor {
                    None => true,
                    Some(f) => *f <= 1.0 || (*f <= E && *exponent == 1.0),
                };
                if *offset > 1.0 || *shift > 1.0 || !floor_ok {
                    return Err(ModelError::Precondition(
                        "no closed-form envelope for this affine-log-power parameterization".into(),
                    ));
                }
                Family::AffineLogPower {
                    amplitude: amplitude.abs(),
                    offset: 1.0,
                    shift: 1.0,
                    exponent: *exponent,
                    floor: None,
                    constant: constant.abs() + slack,
                }
            }
            Family::LogIterated { amplitude, constant } => {
                Family::LogIterated { amplitude: amplitude.abs(), constant: constant.abs() + slack }
            }
            Family::Constant { value } => Family::Constant { value: value.abs() + slack },
            other => {
                return Err(ModelError::Precondition(format!(
                    "no closed-form envelope for the {} family",
                    other.name()
                )))
            }
        };
        Ok(Self::new(family, Domain::HalfLine))
    }

    /// Value (`order = 0`) or derivative (`order = 1, 2`) at `u`.
    pub fn evaluate(&self, u: f64, order: u8) -> Result<f64, ModelError> {
        if order > 2 {
            return Err(ModelError::Parameter(format!("derivative order {order} is not supported")));
        }
        if u.is_nan() {
            return Err(domain_err(u, "argument is NaN"));
        }
        if let Some(n) = self.cutoff {
            if u > n {
                return if order == 0 { self.extended(n, 0) } else { Ok(0.0) };
            }
            if u < -n {
                return if order == 0 { self.extended(-n, 0) } else { Ok(0.0) };
            }
        }
        self.extended(u, order)
    }

    /// Value at `u`, or NaN when undefined. Used in the stepping hot loop.
    #[inline]
    pub fn value(&self, u: f64) -> f64 {
        let u = match self.cutoff {
            Some(n) => u.clamp(-n, n),
            None => u,
        };
        match (&self.family, self.domain) {
            (Family::Power { amplitude, exponent, constant }, Domain::Even | Domain::Odd) if !u.is_nan() => {
                let x = u.abs();
                let pw = match *exponent {
                    1.0 => x,
                    2.0 => x * x,
                    3.0 => x * x * x,
                    1.5 => x * x.sqrt(),
                    _ => signed_pow(x, *exponent).unwrap_or(f64::NAN),
                };
                let v = amplitude * pw + constant;
                if self.domain == Domain::Odd && u < 0.0 {
                    -v
                } else {
                    v
                }
            }
            (Family::Constant { value }, Domain::Real | Domain::Even) if !u.is_nan() => *value,
            _ => self.evaluate(u, 0).unwrap_or(f64::NAN),
        }
    }

    fn extended(&self, u: f64, order: u8) -> Result<f64, ModelError> {
        match self.domain {
            Domain::HalfLine => {
                if u < 0.0 {
                    Err(domain_err(u, "model is declared on the half line [0, inf)"))
                } else {
                    self.family.eval(u, order)
                }
            }
            Domain::Real => self.family.eval(u, order),
            Domain::Even => {
                let s = if u < 0.0 { -1.0 } else { 1.0 };
                let v = self.family.eval(u.abs(), order)?;
                Ok(if order == 1 { s * v } else { v })
            }
            Domain::Odd => {
                let s = if u < 0.0 { -1.0 } else { 1.0 };
                let v = self.family.eval(u.abs(), order)?;
                Ok(if order == 1 { v } else { s * v })
            }
        }
    }

    /// `ln m(e^s)` computed without forming `e^s` when the family allows it.
    ///
    /// Requires `m(e^s) > 0`.
    pub fn ln_value_at_log(&self, s: f64) -> Result<f64, ModelError> {
        if let Some(n) = self.cutoff {
            if s > n.ln() {
                let v = self.evaluate(n, 0)?;
                return positive_ln(v, n);
            }
        }
        let ln = match &self.family {
            Family::Power { amplitude, exponent, constant } if *amplitude > 0.0 && *constant >= 0.0 => {
                let main = amplitude.ln() + exponent * s;
                if *constant > 0.0 {
                    log_add_exp(main, constant.ln())
                } else {
                    main
                }
            }
            Family::AffineLogPower { amplitude, offset, shift, exponent, floor, constant }
                if *amplitude > 0.0 && *offset >= 0.0 && *shift >= 0.0 && *constant >= 0.0 =>
            {
                let ln_affine = s + (offset * (-s).exp()).ln_1p();
                let mut big_l = s + (shift * (-s).exp()).ln_1p();
                if let Some(f) = floor {
                    big_l = big_l.max(f.ln());
                }
                if big_l <= 0.0 && *exponent != 0.0 {
                    return self.fallback_ln(s);
                }
                let main = amplitude.ln() + ln_affine + exponent * big_l.ln();
                if *constant > 0.0 {
                    log_add_exp(main, constant.ln())
                } else {
                    main
                }
            }
            Family::LogIterated { amplitude, constant } if *amplitude > 0.0 && *constant >= 0.0 => {
                let big_l = s + (E * (-s).exp()).ln_1p();
                if big_l <= 1.0 {
                    return self.fallback_ln(s);
                }
                let main = amplitude.ln() + big_l + big_l.ln() + big_l.ln().ln();
                if *constant > 0.0 {
                    log_add_exp(main, constant.ln())
                } else {
                    main
                }
            }
            Family::Constant { value } => return positive_ln(*value, s.exp()),
            Family::Exponential { amplitude, rate } if *amplitude > 0.0 => amplitude.ln() + rate * s.exp(),
            Family::LogTransform { base, base_at_zero } if s > 0.0 => {
                // ln g(t) = ln h(e^t) - t + ln(1 - h(0)/h(e^t)) with t = e^s
                let t = s.exp();
                let ln_h = base.ln_value_at_log(t)?;
                let corr = if *base_at_zero > 0.0 { (-(base_at_zero.ln() - ln_h).exp()).ln_1p() } else { 0.0 };
                if !corr.is_finite() {
                    return self.fallback_ln(s);
                }
                ln_h - t + corr
            }
            _ => return self.fallback_ln(s),
        };
        Ok(ln)
    }

    fn fallback_ln(&self, s: f64) -> Result<f64, ModelError> {
        let u = s.exp();
        let v = self.evaluate(u, 0)?;
        positive_ln(v, u)
    }

    pub fn to_spec(&self) -> ModelSpec {
        let mut params = BTreeMap::new();
        let mut table = None;
        match &self.family {
            Family::Power { amplitude, exponent, constant } => {
                params.insert("A".into(), *amplitude);
                params.insert("beta".into(), *exponent);
                params.insert("c".into(), *constant);
            }
            Family::AffineLogPower { amplitude, offset, shift, exponent, floor, constant } => {
                params.insert("A".into(), *amplitude);
                params.insert("offset".into(), *offset);
                params.insert("shift".into(), *shift);
                params.insert("beta".into(), *exponent);
                if let Some(f) = floor {
                    params.insert("floor".into(), *f);
                }
                params.insert("c".into(), *constant);
            }
            Family::LogIterated { amplitude, constant } => {
                params.insert("A".into(), *amplitude);
                params.insert("c".into(), *constant);
            }
            Family::Constant { value } => {
                params.insert("value".into(), *value);
            }
            Family::Exponential { amplitude, rate } => {
                params.insert("A".into(), *amplitude);
                params.insert("rate".into(), *rate);
            }
            Family::Sine { amplitude, omega, phase } => {
                params.insert("A".into(), *amplitude);
                params.insert("omega".into(), *omega);
                params.insert("phase".into(), *phase);
            }
            Family::Tabulated(s) => table = Some(s.knots()),
            Family::LogTransform { base, .. } => {
                return ModelSpec {
                    family: "log-transform".into(),
                    params,
                    domain: self.domain,
                    cutoff: self.cutoff,
                    table: None,
                    base: Some(Box::new(base.to_spec())),
                }
            }
        }
        ModelSpec {
            family: self.family.name().into(),
            params,
            domain: self.domain,
            cutoff: self.cutoff,
            table,
            base: None,
        }
    }

    pub fn from_spec(spec: &ModelSpec) -> Result<Self, ModelError> {
        let p = ParamReader::new(&spec.params);
        let family = match spec.family.as_str() {
            "power" => Family::Power {
                amplitude: p.get_or("A", 1.0),
                exponent: p.require("beta")?,
                constant: p.get_or("c", 0.0),
            },
            "affine-log-power" => Family::AffineLogPower {
                amplitude: p.get_or("A", 1.0),
                offset: p.get_or("offset", 1.0),
                shift: p.get_or("shift", 1.0),
                exponent: p.get_or("beta", 1.0),
                floor: p.get("floor"),
                constant: p.get_or("c", 0.0),
            },
            "log-iterated" => Family::LogIterated { amplitude: p.get_or("A", 1.0), constant: p.get_or("c", 0.0) },
            "constant" => Family::Constant { value: p.require("value")? },
            "exponential" => Family::Exponential { amplitude: p.get_or("A", 1.0), rate: p.get_or("rate", 1.0) },
            "sine" => Family::Sine {
                amplitude: p.get_or("A", 1.0),
                omega: p.get_or("omega", 1.0),
                phase: p.get_or("phase", 0.0),
            },
            "tabulated" => {
                let knots = spec.table.as_ref().ok_or_else(|| ModelError::Spec {
                    key: "table".into(),
                    reason: "the tabulated family needs a `table` of [u, value] pairs".into(),
                })?;
                Family::Tabulated(
                    CubicSpline::new(knots).map_err(|e| ModelError::Spec { key: "table".into(), reason: e })?,
                )
            }
            "log-transform" => {
                let base = spec.base.as_ref().ok_or_else(|| ModelError::Spec {
                    key: "base".into(),
                    reason: "log-transform needs a base model".into(),
                })?;
                return g_transform(&Self::from_spec(base)?).map(|m| Self { cutoff: spec.cutoff, ..m });
            }
            other => {
                return Err(ModelError::Spec { key: "family".into(), reason: format!("unknown family `{other}`") })
            }
        };
        p.reject_unknown(&spec.family)?;
        for (k, v) in &spec.params {
            if !v.is_finite() {
                return Err(ModelError::Spec { key: format!("params.{k}"), reason: "must be finite".into() });
            }
        }
        if let Some(n) = spec.cutoff {
            if !(n > 0.0) {
                return Err(ModelError::Spec { key: "cutoff".into(), reason: "cutoff level must be positive".into() });
            }
        }
        Ok(Self { family, domain: spec.domain, cutoff: spec.cutoff })
    }
}

fn positive_ln(v: f64, u: f64) -> Result<f64, ModelError> {
    if v > 0.0 {
        Ok(v.ln())
    } else {
        Err(domain_err(u, "logarithm of a nonpositive value"))
    }
}

impl Family {
    fn eval(&self, u: f64, order: u8) -> Result<f64, ModelError> {
        match self {
            Family::Power { amplitude, exponent, constant } => {
                let p = exponent - order as f64;
                let base = signed_pow(u, p).ok_or_else(|| {
                    domain_err(u, format!("u^{p} is undefined (power family, order {order})"))
                })?;
                let coeff = falling(*exponent, order);
                let v = amplitude * coeff * if coeff == 0.0 { 0.0 } else { base };
                Ok(if order == 0 { v + constant } else { v })
            }
            Family::AffineLogPower { amplitude, offset, shift, exponent, floor, constant } => {
                let arg = shift + u;
                let floored = match floor {
                    Some(f) => arg < *f,
                    None => false,
                };
                let (big_l, dl, d2l) = if floored {
                    (floor.unwrap().ln(), 0.0, 0.0)
                } else {
                    if arg <= 0.0 {
                        return Err(domain_err(u, "logarithm argument shift + u must be positive"));
                    }
                    (arg.ln(), 1.0 / arg, -1.0 / (arg * arg))
                };
                let pw = |p: f64| {
                    signed_pow(big_l, p).ok_or_else(|| domain_err(u, format!("(ln(shift + u))^{p} is undefined")))
                };
                let a = offset + u;
                let beta = *exponent;
                let v = match order {
                    0 => a * pw(beta)? + 0.0,
                    1 => {
                        let first = pw(beta)?;
                        let second = if beta == 0.0 || dl == 0.0 { 0.0 } else { a * beta * pw(beta - 1.0)? * dl };
                        first + second
                    }
                    _ => {
                        if beta == 0.0 || dl == 0.0 {
                            0.0
                        } else {
                            let t1 = 2.0 * beta * pw(beta - 1.0)? * dl;
                            let t2 = if beta == 1.0 { 0.0 } else { beta * (beta - 1.0) * pw(beta - 2.0)? * dl * dl };
                            let t3 = beta * pw(beta - 1.0)? * d2l;
                            t1 + a * (t2 + t3)
                        }
                    }
                };
                let v = amplitude * v;
                Ok(if order == 0 { v + constant } else { v })
            }
            Family::LogIterated { amplitude, constant } => {
                let w = E + u;
                if w <= 1.0 {
                    return Err(domain_err(u, "ln ln(e + u) requires e + u > 1"));
                }
                let big_l = w.ln();
                if big_l <= 0.0 {
                    return Err(domain_err(u, "ln ln(e + u) requires e + u > 1"));
                }
                let ll = big_l.ln();
                let v = match order {
                    0 => w * big_l * ll,
                    1 => big_l * ll + ll + 1.0,
                    _ => (ll + 1.0 + 1.0 / big_l) / w,
                };
                let v = amplitude * v;
                Ok(if order == 0 { v + constant } else { v })
            }
            Family::Constant { value } => Ok(if order == 0 { *value } else { 0.0 }),
            Family::Exponential { amplitude, rate } => {
                Ok(amplitude * rate.powi(order as i32) * (rate * u).exp())
            }
            Family::Sine { amplitude, omega, phase } => {
                let arg = omega * u + phase;
                Ok(match order {
                    0 => amplitude * arg.sin(),
                    1 => amplitude * omega * arg.cos(),
                    _ => -amplitude * omega * omega * arg.sin(),
                })
            }
            Family::Tabulated(spline) => spline.eval(u, order).ok_or_else(|| {
                let (lo, hi) = spline.range();
                ModelError::Range { u, lo, hi }
            }),
            Family::LogTransform { base, base_at_zero } => log_transform_eval(base, *base_at_zero, u, order),
        }
    }
}

/// `g(s) = e^{-s}(h(e^s) - h0)` and its first two derivatives.
fn log_transform_eval(h: &ScalarFunctionModel, h0: f64, s: f64, order: u8) -> Result<f64, ModelError> {
    let g = if h0 > 0.0 {
        let ln_h = h.ln_value_at_log(s)?;
        // e^{ln h - s} (1 - h0 / h)
        (ln_h - s).exp() * -((h0.ln() - ln_h).exp_m1())
    } else if h0 == 0.0 {
        (h.ln_value_at_log(s)? - s).exp()
    } else {
        let u = s.exp();
        (-s).exp() * (h.evaluate(u, 0)? - h0)
    };
    if order == 0 {
        return Ok(g);
    }
    let u = s.exp();
    let g1 = h.evaluate(u, 1)? - g;
    if order == 1 {
        return Ok(g1);
    }
    Ok(u * h.evaluate(u, 2)? - g1)
}

struct ParamReader<'a> {
    params: &'a BTreeMap<String, f64>,
    used: std::cell::RefCell<Vec<&'static str>>,
}

impl<'a> ParamReader<'a> {
    fn new(params: &'a BTreeMap<String, f64>) -> Self {
        Self { params, used: Default::default() }
    }

    fn get(&self, key: &'static str) -> Option<f64> {
        self.used.borrow_mut().push(key);
        self.params.get(key).copied()
    }

    fn get_or(&self, key: &'static str, default: f64) -> f64 {
        self.get(key).unwrap_or(default)
    }

    fn require(&self, key: &'static str) -> Result<f64, ModelError> {
        self.get(key)
            .ok_or_else(|| ModelError::Spec { key: format!("params.{key}"), reason: "required parameter is missing".into() })
    }

    fn reject_unknown(&self, family: &str) -> Result<(), ModelError> {
        let used = self.used.borrow();
        for k in self.params.keys() {
            if !used.iter().any(|u| u == k) {
                return Err(ModelError::Spec {
                    key: format!("params.{k}"),
                    reason: format!("not a parameter of the {family} family"),
                });
            }
        }
        Ok(())
    }
}

/// Serialized form of a model: family name, named parameters and domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub family: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub domain: Domain,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<Box<ModelSpec>>,
}

impl Serialize for ScalarFunctionModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_spec().serialize(s)
    }
}

impl<'de> Deserialize<'de> for ScalarFunctionModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let spec = ModelSpec::deserialize(d)?;
        Self::from_spec(&spec).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd1(m: &ScalarFunctionModel, u: f64) -> f64 {
        let h = 1e-5 * u.abs().max(1.0);
        (m.value(u + h) - m.value(u - h)) / (2.0 * h)
    }

    fn fd2(m: &ScalarFunctionModel, u: f64) -> f64 {
        let h = 1e-4 * u.abs().max(1.0);
        (m.value(u + h) - 2.0 * m.value(u) + m.value(u - h)) / (h * h)
    }

    #[test]
    fn power_family_closed_forms() {
        let m = ScalarFunctionModel::power(1.0, 2.0);
        assert_eq!(m.evaluate(3.0, 0).unwrap(), 9.0);
        assert_eq!(m.evaluate(5.0, 2).unwrap(), 2.0);
        assert_eq!(m.evaluate(-3.0, 0).unwrap(), 9.0);
        assert_eq!(m.evaluate(-3.0, 1).unwrap(), -6.0);
    }

    #[test]
    fn affine_log_power_at_e_minus_one() {
        // (1+u) ln(1+u) at u = e - 1 is e * ln(e) = e.
        let h = ScalarFunctionModel::one_plus_u_log(1.0, 1.0, 0.0);
        let v = h.evaluate(E - 1.0, 0).unwrap();
        assert!((v - E).abs() < 1e-14);
    }

    #[test]
    fn domain_and_range_errors() {
        let h = ScalarFunctionModel::one_plus_u_log(1.0, 1.0, 0.0);
        assert!(matches!(h.evaluate(-0.5, 0), Err(ModelError::Domain { .. })));
        let log = ScalarFunctionModel::new(
            Family::AffineLogPower { amplitude: 1.0, offset: 0.0, shift: 0.0, exponent: 1.0, floor: None, constant: 0.0 },
            Domain::Real,
        );
        assert!(matches!(log.evaluate(0.0, 0), Err(ModelError::Domain { .. })));
        let t = ScalarFunctionModel::tabulated(&[[0.0, 0.0], [1.0, 1.0], [2.0, 4.0]]).unwrap();
        assert!(matches!(t.evaluate(2.5, 0), Err(ModelError::Range { .. })));
        let frac = ScalarFunctionModel::power(1.0, 1.5).with_domain(Domain::Real);
        assert!(frac.evaluate(-1.0, 0).is_err());
        let cube = ScalarFunctionModel::power(1.0, 3.0).with_domain(Domain::Real);
        assert_eq!(cube.evaluate(-2.0, 0).unwrap(), -8.0);
        assert!(ScalarFunctionModel::power(1.0, 0.5).evaluate(0.0, 1).is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let models = [
            ScalarFunctionModel::power(2.0, 1.7),
            ScalarFunctionModel::one_plus_u_log(1.3, 1.5, 0.2),
            ScalarFunctionModel::u_log_u(),
            ScalarFunctionModel::u_log_u_loglog_u(),
            ScalarFunctionModel::exponential(0.5, 0.8),
            ScalarFunctionModel::sine(1.0, 2.0, 0.3),
            ScalarFunctionModel::tabulated(&[[0.0, 1.0], [1.0, 2.0], [2.0, 5.0], [3.0, 4.0], [5.0, 0.0]]).unwrap(),
        ];
        for m in &models {
            for &u in &[0.37, 1.9, 2.6, 4.2] {
                let d1 = m.evaluate(u, 1).unwrap();
                let d2 = m.evaluate(u, 2).unwrap();
                assert!((d1 - fd1(m, u)).abs() <= 1e-6 * d1.abs().max(1.0), "{:?} d1 at {u}", m.family.name());
                assert!((d2 - fd2(m, u)).abs() <= 1e-4 * d2.abs().max(1.0), "{:?} d2 at {u}", m.family.name());
            }
        }
    }

    #[test]
    fn cutoff_clamps_outside_band() {
        let sq = ScalarFunctionModel::power(1.0, 2.0);
        let c = sq.cutoff(2.0);
        assert_eq!(c.evaluate(5.0, 0).unwrap(), 4.0);
        assert_eq!(c.evaluate(1.0, 0).unwrap(), 1.0);
        assert_eq!(c.evaluate(5.0, 1).unwrap(), 0.0);
        let cube = ScalarFunctionModel::odd_power(1.0, 3.0).cutoff(3.0);
        assert_eq!(cube.evaluate(-10.0, 0).unwrap(), -27.0);
        assert_eq!(sq.cutoff(5.0).cutoff(3.0).cutoff, Some(3.0));
    }

    #[test]
    fn u_log_u_extension_is_odd_and_floored() {
        let b = ScalarFunctionModel::u_log_u();
        assert_eq!(b.evaluate(0.5, 0).unwrap(), 0.0);
        assert!((b.evaluate(E, 0).unwrap() - E).abs() < 1e-15);
        assert!((b.evaluate(-E, 0).unwrap() + E).abs() < 1e-15);
    }

    #[test]
    fn ln_value_matches_direct_log() {
        let models = [
            ScalarFunctionModel::power_plus(2.0, 1.5, 0.3),
            ScalarFunctionModel::one_plus_u_log(1.0, 1.0, 1.0),
            ScalarFunctionModel::u_log_u_loglog_u(),
            ScalarFunctionModel::exponential(1.0, 1.0),
        ];
        for m in &models {
            for s in [0.5, 2.0, 10.0] {
                let direct = m.value(f64::exp(s)).ln();
                if !direct.is_finite() {
                    continue;
                }
                let viaspec = m.ln_value_at_log(s).unwrap();
                assert!((direct - viaspec).abs() < 1e-12 * direct.abs().max(1.0), "{} at {s}", m.family.name());
            }
        }
        // stays finite far beyond the f64 range of u itself
        let p = ScalarFunctionModel::power(1.0, 2.0);
        assert!((p.ln_value_at_log(1000.0).unwrap() - 2000.0).abs() < 1e-9);
    }

    #[test]
    fn spec_round_trip_and_errors() {
        let m = ScalarFunctionModel::one_plus_u_log(1.0, 2.0, 0.5).cutoff(7.0);
        let back = ScalarFunctionModel::from_spec(&m.to_spec()).unwrap();
        assert_eq!(back, m);
        let mut spec = ScalarFunctionModel::power(1.0, 2.0).to_spec();
        spec.params.insert("gamma".into(), 1.0);
        match ScalarFunctionModel::from_spec(&spec) {
            Err(ModelError::Spec { key, .. }) => assert_eq!(key, "params.gamma"),
            other => panic!("unexpected {other:?}"),
        }
        spec.params.clear();
        assert!(matches!(ScalarFunctionModel::from_spec(&spec), Err(ModelError::Spec { .. })));
    }

    #[test]
    fn envelope_dominates_drift() {
        let b = ScalarFunctionModel::u_log_u();
        let h = b.propose_envelope(1.0).unwrap();
        for u in [0.0, 0.5, 1.0, 3.0, 100.0, 1e6] {
            assert!(b.value(u).abs() <= h.value(u));
            assert!(b.value(-u).abs() <= h.value(u));
        }
        assert!(ScalarFunctionModel::sine(1.0, 1.0, 0.0).propose_envelope(0.0).is_err());
    }
}
