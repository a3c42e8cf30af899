//! Randomized validation of the pointwise and functional inequalities the
//! non-explosion argument rests on, plus consistency suites for the
//! diagnostics. Every suite is seeded and reproducible.

use crate::diagnostics::{ledger_build, tripling_sequence};
use crate::models::{convexity_ratio_check, fg_pair, g_transform, jensen_check, ScalarFunctionModel};
use crate::numerics::log_space;
use crate::spde::{simulate_path, ExtraDrift, FieldState, NoiseSource, RunOptions, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub suite: String,
    pub cases: usize,
    pub violations: usize,
    /// Largest error or ratio seen, per the suite's own measure.
    pub worst: f64,
    pub pass: bool,
}

pub const SUITES: [&str; 6] = ["jensen", "fg-pair", "convexity", "g-transform", "ledger-closure", "tripling"];

fn report(suite: &str, cases: usize, violations: usize, worst: f64) -> LemmaReport {
    LemmaReport { suite: suite.into(), cases, violations, worst, pass: violations == 0 }
}

/// Convex increasing `h` with `h(0) >= 0` used across the suites.
pub fn h_families() -> Vec<(String, ScalarFunctionModel)> {
    let mut v: Vec<(String, ScalarFunctionModel)> = [1.0, 1.5, 2.0, 3.0]
        .iter()
        .map(|&b| (format!("u^{b}"), ScalarFunctionModel::power(1.0, b)))
        .collect();
    v.push(("1+u^2".into(), ScalarFunctionModel::power_plus(1.0, 2.0, 1.0)));
    v.push(("(1+u)ln(1+u)".into(), ScalarFunctionModel::one_plus_u_log(1.0, 1.0, 0.0)));
    v.push(("(1+u)ln(1+u)^2".into(), ScalarFunctionModel::one_plus_u_log(1.0, 2.0, 0.0)));
    v
}

fn random_field(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let nx = rng.gen_range(8..=64);
    let scale = 10f64.powf(rng.gen_range(-3.0..3.0));
    match rng.gen_range(0..3) {
        0 => (0..nx).map(|_| scale * rng.gen::<f64>()).collect(),
        // a few tall spikes on a low floor
        1 => (0..nx).map(|_| if rng.gen_bool(0.1) { scale * 10.0 * rng.gen::<f64>() } else { 1e-3 * rng.gen::<f64>() }).collect(),
        _ => {
            let phase = rng.gen_range(0.0..6.3);
            (0..nx).map(|i| scale * (1.0 + (phase + i as f64 * 6.283 / nx as f64).sin())).collect()
        }
    }
}

pub fn jensen_suite(fields: usize, seed: u64) -> LemmaReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hs = h_families();
    let mut bad = 0;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..fields {
        let v = random_field(&mut rng);
        let (_, h) = &hs[rng.gen_range(0..hs.len())];
        match jensen_check(h, &v) {
            Ok(r) => {
                if !r.pass {
                    bad += 1;
                }
                if r.rhs > 0.0 {
                    worst = worst.max(r.lhs / r.rhs);
                }
            }
            Err(_) => bad += 1,
        }
    }
    report("jensen", fields, bad, worst)
}

pub fn fg_pair_suite(points: usize, seed: u64) -> LemmaReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut bad, mut cases) = (0, 0);
    let mut worst: f64 = 0.0;
    for (_, h) in h_families() {
        let Ok(pair) = fg_pair(&h) else {
            bad += 1;
            continue;
        };
        for _ in 0..points {
            let w = 10f64.powf(rng.gen_range(-2.0..4.0)).max(h.value(0.0) * 1.01 + 1e-12);
            cases += 1;
            let err = match (pair.f_inverse(w), pair.g_inverse(w)) {
                (Ok(a), Ok(b)) => (a * b / w - 1.0).abs(),
                _ => f64::INFINITY,
            };
            worst = worst.max(err);
            if !(err <= 1e-8) {
                bad += 1;
            }
        }
    }
    report("fg-pair", cases, bad, worst)
}

/// Power ratios equal `(beta - 1) / beta`; log-family ratios stay at most 2.
pub fn convexity_suite() -> LemmaReport {
    let grid = log_space(1e-2, 1e6, 200);
    let (mut bad, mut cases) = (0, 0);
    let mut worst: f64 = 0.0;
    for b in [1.5, 2.0, 2.5, 3.0] {
        cases += 1;
        match convexity_ratio_check(&ScalarFunctionModel::power(1.0, b), &grid) {
            Ok(r) => {
                let err = (r.max_ratio - (b - 1.0) / b).abs();
                worst = worst.max(err);
                if err > 1e-9 || !r.pass {
                    bad += 1;
                }
            }
            Err(_) => bad += 1,
        }
    }
    for b in [0.5, 1.0, 2.0] {
        cases += 1;
        match convexity_ratio_check(&ScalarFunctionModel::one_plus_u_log(1.0, b, 0.0), &grid) {
            Ok(r) if r.pass => {}
            _ => bad += 1,
        }
    }
    report("convexity", cases, bad, worst)
}

/// `e^s g(s) + h(0)` recovers `h(e^s)`.
pub fn g_transform_suite() -> LemmaReport {
    let (mut bad, mut cases) = (0, 0);
    let mut worst: f64 = 0.0;
    for (_, h) in h_families() {
        let Ok(g) = g_transform(&h) else {
            bad += 1;
            continue;
        };
        let h0 = h.value(0.0);
        for k in 0..=60 {
            let s = -5.0 + 0.25 * k as f64;
            cases += 1;
            let back = s.exp() * g.value(s) + h0;
            let want = h.value(s.exp());
            let err = ((back - want) / want).abs();
            worst = worst.max(err);
            if !(err <= 1e-10) {
                bad += 1;
            }
        }
    }
    report("g-transform", cases, bad, worst)
}

/// The ledger closes to rounding on random short runs.
pub fn ledger_closure_suite(runs: usize, seed: u64) -> LemmaReport {
    let cfg = SolverConfig { dt: 1e-3, horizon: 0.05, ..SolverConfig::default() }.with_grid(32).expect("grid");
    let b = ScalarFunctionModel::sine(1.0, 1.0, 0.0);
    let s = ScalarFunctionModel::sine(1.0, 1.0, std::f64::consts::FRAC_PI_2);
    let u0 = FieldState::from_fn(cfg.grid, |x| 1.0 + 0.5 * x.cos());
    let opts = RunOptions::new(1e6).with_snapshots(1);
    let mut bad = 0;
    let mut worst: f64 = 0.0;
    for k in 0..runs {
        let ok = simulate_path(&u0, &cfg, &b, &s, ExtraDrift::None, NoiseSource::new(seed, k as u64), &opts)
            .ok()
            .and_then(|t| ledger_build(&t, &b, &s, None, cfg.eps_floor).ok());
        match ok {
            Some(l) => {
                let e = l.closure_error() / l.i[0].abs().max(1.0);
                worst = worst.max(e);
                if e > 1e-12 {
                    bad += 1;
                }
            }
            None => bad += 1,
        }
    }
    report("ledger-closure", runs, bad, worst)
}

/// Random positive series: adjacent tripling levels differ by one and the
/// event times never decrease.
pub fn tripling_suite(series: usize, seed: u64) -> LemmaReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = 0;
    for _ in 0..series {
        let mut y: f64 = 1.0;
        let pts: Vec<(f64, f64)> = (0..200)
            .map(|i| {
                y = (y * (rng.gen_range(-1.5f64..1.5)).exp()).max(1e-6);
                (i as f64 * 0.01, y)
            })
            .collect();
        let ok = match tripling_sequence(&pts, 0) {
            Ok(ev) => {
                ev.windows(2).all(|w| w[1].time >= w[0].time && w[1].from == w[0].to)
                    && ev.iter().all(|e| (e.to - e.from).abs() == 1)
                    && tripling_sequence(&pts, 0).map(|again| again == ev).unwrap_or(false)
            }
            Err(_) => false,
        };
        if !ok {
            bad += 1;
        }
    }
    report("tripling", series, bad, 0.0)
}

/// Runs the named suites (all of [`SUITES`] when `only` is empty) at the
/// acceptance sizes.
pub fn run_suites(only: &[String], seed: u64) -> Result<Vec<LemmaReport>, String> {
    if let Some(u) = only.iter().find(|s| !SUITES.contains(&s.as_str())) {
        return Err(format!("unknown suite `{u}`; known: {}", SUITES.join(", ")));
    }
    let want = |s: &str| only.is_empty() || only.iter().any(|o| o == s);
    let mut out = vec![];
    if want("jensen") {
        out.push(jensen_suite(10_000, seed));
    }
    if want("fg-pair") {
        out.push(fg_pair_suite(100, seed));
    }
    if want("convexity") {
        out.push(convexity_suite());
    }
    if want("g-transform") {
        out.push(g_transform_suite());
    }
    if want("ledger-closure") {
        out.push(ledger_closure_suite(8, seed));
    }
    if want("tripling") {
        out.push(tripling_suite(200, seed));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suites_pass() {
        assert!(jensen_suite(200, 1).pass);
        assert!(fg_pair_suite(5, 1).pass);
        assert!(convexity_suite().pass);
        assert!(tripling_suite(20, 1).pass);
    }

    #[test]
    fn unknown_suite_rejected() {
        assert!(run_suites(&["nope".into()], 0).is_err());
    }
}
