use proptest::prelude::*;
use shelab::diagnostics::*;
use shelab::experiments::*;
use shelab::io::{decode_dump, effective_config, encode_dump, parse_config, DumpContext, PathKind};
use shelab::models::*;
use shelab::numerics::log_space;
use shelab::spde::*;
use std::f64::consts::PI;

fn cfg(proptest_cases: u32) -> ProptestConfig {
    ProptestConfig { cases: proptest_cases, ..ProptestConfig::default() }
}

fn zero() -> ScalarFunctionModel {
    ScalarFunctionModel::constant(0.0)
}

fn field(grid: Grid1D, coeffs: &[f64], offset: f64) -> FieldState {
    FieldState::from_fn(grid, |x| {
        offset + coeffs.iter().enumerate().map(|(k, c)| c * ((k + 1) as f64 * x).cos()).sum::<f64>()
    })
}

proptest! {
    #![proptest_config(cfg(64))]

    #[test]
    fn cutoff_matches_inside_and_freezes_outside(a in 0.1f64..5.0, beta in 1.0f64..3.0, n in 0.5f64..50.0, u in -200.0f64..200.0) {
        let m = ScalarFunctionModel::odd_power(a, beta);
        let c = m.cutoff(n);
        if u.abs() <= n {
            prop_assert_eq!(c.value(u), m.value(u));
        } else {
            prop_assert_eq!(c.value(u), m.value(n * u.signum()));
        }
    }

    #[test]
    fn increasing_convex_families_have_nonnegative_curvature(which in 0usize..4, a in 0.1f64..3.0, p in 1.0f64..3.0) {
        let h = match which {
            0 => ScalarFunctionModel::power(a, p),
            1 => ScalarFunctionModel::power_plus(a, p, 1.0),
            2 => ScalarFunctionModel::one_plus_u_log(a, p.min(2.0), 0.0),
            _ => ScalarFunctionModel::exponential(a, p),
        };
        prop_assert!(h.is_increasing_convex());
        let top = if which == 3 { 100.0 } else { 1e3 };
        let grid = log_space(1e-2, top, 60);
        for w in grid.windows(3) {
            let (x0, x1, x2) = (w[0], w[1], w[2]);
            let s1 = (h.value(x1) - h.value(x0)) / (x1 - x0);
            let s2 = (h.value(x2) - h.value(x1)) / (x2 - x1);
            prop_assert!(s2 - s1 >= -1e-9 * s1.abs().max(1.0), "slope drop {} at {}", s1 - s2, x1);
        }
    }

    #[test]
    fn fg_pair_product_identity(which in 0usize..3, lw in 0.0f64..13.8) {
        let h = match which {
            0 => ScalarFunctionModel::power(1.0, 2.0),
            1 => ScalarFunctionModel::power(1.0, 1.5),
            _ => ScalarFunctionModel::one_plus_u_log(1.0, 1.0, 0.0),
        };
        let p = fg_pair(&h).unwrap();
        let w = lw.exp();
        let prod = p.f_inverse(w).unwrap() * p.g_inverse(w).unwrap();
        prop_assert!((prod / w - 1.0).abs() <= 1e-8, "w = {w}: {prod}");
    }

    #[test]
    fn g_transform_round_trip(which in 0usize..3, lu in -6.9f64..18.4) {
        let h = match which {
            0 => ScalarFunctionModel::power(1.0, 2.0),
            1 => ScalarFunctionModel::power_plus(2.0, 1.5, 1.0),
            _ => ScalarFunctionModel::one_plus_u_log(1.0, 1.0, 1.0),
        };
        let g = g_transform(&h).unwrap();
        let u = lu.exp();
        let (hu, h0) = (h.value(u), h.value(0.0));
        let err = (hu - h0 - u * g.value(u.ln())).abs() / hu.max(1.0);
        prop_assert!(err <= 1e-10, "u = {u}: {err}");
    }

    #[test]
    fn jensen_holds_on_random_fields(which in 0usize..3, vals in prop::collection::vec(0.0f64..50.0, 8..128), spike in 0.0f64..1e3) {
        let h = match which {
            0 => ScalarFunctionModel::power(1.0, 2.0),
            1 => ScalarFunctionModel::one_plus_u_log(1.0, 1.0, 0.0),
            _ => ScalarFunctionModel::power(1.0, 1.5),
        };
        let mut v = vals;
        v[0] += spike;
        prop_assert!(jensen_check(&h, &v).unwrap().pass);
    }

    #[test]
    fn semigroup_composes(s in 1e-4f64..1.0, t in 1e-4f64..1.0, coeffs in prop::collection::vec(-1.0f64..1.0, 1..12)) {
        let f = field(Grid1D::new(64).unwrap(), &coeffs, 0.3);
        let two = semigroup_apply(&semigroup_apply(&f, s), t);
        let one = semigroup_apply(&f, s + t);
        for (a, b) in two.values().iter().zip(one.values()) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn heat_kernel_positive(lt in -9.2f64..2.3, x in -PI..PI) {
        let t = lt.exp();
        let g = heat_kernel(t, x, Truncation::Auto).unwrap();
        // past ~745 the Gaussian factor is below the smallest subnormal
        if x * x / (4.0 * t) < 700.0 {
            prop_assert!(g > 0.0, "t = {t}, x = {x}: {g}");
        } else {
            prop_assert!(g >= 0.0);
        }
    }

    #[test]
    fn wilson_interval_brackets_estimate(n in 1u64..10_000, frac in 0.0f64..=1.0) {
        let k = ((n as f64) * frac).floor() as u64;
        let (lo, hi) = wilson_interval(k, n);
        let p = k as f64 / n as f64;
        prop_assert!(0.0 <= lo && lo <= p + 1e-15 && p <= hi + 1e-15 && hi <= 1.0);
    }

    #[test]
    fn path_seeds_are_injective(m in any::<u64>(), a in 0u64..=u32::MAX as u64, b in 0u64..=u32::MAX as u64, c in 0u64..=u32::MAX as u64) {
        let x = derive_path_seed(m, a, b).unwrap();
        let y = derive_path_seed(m, a, c).unwrap();
        prop_assert_eq!(x == y, b == c);
    }

    #[test]
    fn annotation_is_the_case_split(beta in 1.01f64..=2.0, g in 0usize..40, a in 1e-3f64..2.0) {
        let gamma = g as f64 * 0.05;
        let r = Regime::annotate(beta, gamma, a).unwrap();
        let want = if gamma == 0.0 {
            Regime::BgExplosive
        } else if gamma > 1.5 {
            Regime::MuellerExplosive
        } else if beta + 1.0 < 2.0 * gamma {
            Regime::Thm1NonExplosive
        } else if beta + 1.0 == 2.0 * gamma && a < BOUNDARY_AMPLITUDE {
            Regime::Thm1NonExplosive
        } else {
            Regime::Open
        };
        prop_assert_eq!(r, want);
        prop_assert_eq!(Regime::annotate(beta, gamma, a), Some(r));
    }

    #[test]
    fn doob_never_fails_a_vacuous_bound(sups in prop::collection::vec(0.0f64..1e4, 1..40), i0 in 0.1f64..10.0, c in 0.0f64..1e3) {
        let inp = DoobInputs { i0, horizon: 0.5, eps: 1e-3, alpha: 4.0, constant: c };
        for row in doob_bound_check(&sups, &[1.0, 10.0, 100.0, 1e3], &DoobCase::A, inp).unwrap() {
            if row.bound >= 1.0 {
                prop_assert!(row.pass);
            }
        }
    }

    #[test]
    fn tripling_levels_are_adjacent_powers(ys in prop::collection::vec(0.5f64..1e5, 2..200)) {
        let series: Vec<(f64, f64)> = ys.iter().enumerate().map(|(i, &y)| (i as f64, y)).collect();
        let a = tripling_sequence(&series, 0).unwrap();
        prop_assert_eq!(&a, &tripling_sequence(&series, 0).unwrap());
        let mut prev_time = f64::NEG_INFINITY;
        for e in &a {
            prop_assert_eq!((e.to - e.from).abs(), 1);
            prop_assert!(e.time >= prev_time);
            prev_time = e.time;
        }
        for w in a.windows(2) {
            prop_assert_eq!(w[0].to, w[1].from);
        }
    }
}

proptest! {
    #![proptest_config(cfg(12))]

    #[test]
    fn osgood_class_is_scale_free(bi in 0usize..5, c in prop_oneof![Just(0.0), Just(1.0)]) {
        let beta = [0.5, 1.0, 1.5, 2.0, 3.0][bi];
        let h = ScalarFunctionModel::power_plus(1.0, beta, c);
        let h7 = ScalarFunctionModel::power_plus(7.0, beta, 7.0 * c);
        let a = osgood_classify(&h, 1.0, QuadratureBudget::default()).unwrap();
        let b = osgood_classify(&h7, 1.0, QuadratureBudget::default()).unwrap();
        prop_assert_eq!(a.classification, b.classification);
    }

    #[test]
    fn case_a_reproduces_published_regime(bi in 0usize..4, gi in 0usize..12) {
        let beta = [1.25, 1.5, 1.75, 2.0][bi];
        let gamma = 0.5 + gi as f64 * 0.125;
        prop_assume!((2.0 * gamma - beta - 1.0).abs() > 0.1);
        let b = ScalarFunctionModel::power(1.0, beta);
        let s = ScalarFunctionModel::power(1.0, gamma);
        let r = check_assumption_a(&b, &s, Some(&b), CaseAOptions::default()).unwrap();
        let inside = beta + 1.0 < 2.0 * gamma && 2.0 * gamma <= 3.0;
        prop_assert_eq!(r.verdict == Verdict::Satisfied, inside, "beta {} gamma {}: {:?}", beta, gamma, r.verdict);
    }

    #[test]
    fn mean_is_conserved_without_forcing(coeffs in prop::collection::vec(-1.0f64..1.0, 1..8), offset in -2.0f64..2.0) {
        let c = SolverConfig { dt: 1e-4, horizon: 1.0, ..SolverConfig::default() }.with_grid(32).unwrap();
        let u0 = field(c.grid, &coeffs, offset);
        let tr = simulate_path(&u0, &c, &zero(), &zero(), ExtraDrift::None, NoiseSource::new(1, 0), &RunOptions::new(1e6).with_record_stride(1000).with_snapshots(10_000)).unwrap();
        prop_assert_eq!(tr.steps, 10_000);
        let i0 = u0.integral();
        for s in &tr.snapshots {
            prop_assert!((s.integral() - i0).abs() <= 1e-12 * i0.abs().max(1.0));
        }
    }

    #[test]
    fn raising_the_cap_never_undoes_an_explosion(seed in any::<u64>(), cap in 10.0f64..1e3) {
        let c = SolverConfig { dt: 1e-3, horizon: 1.5, ..SolverConfig::default() }.with_grid(32).unwrap();
        let u0 = FieldState::constant(c.grid, 1.0);
        let b = ScalarFunctionModel::power(1.0, 2.0);
        let s = ScalarFunctionModel::constant(0.5);
        let run = |cap: f64| {
            let tr = simulate_path(&u0, &c, &b, &s, ExtraDrift::None, NoiseSource::new(seed, 0), &RunOptions::new(cap)).unwrap();
            classify_explosion(&tr, None, cap, c.horizon).exploded_at()
        };
        let (lo, hi) = (run(cap), run(10.0 * cap));
        if let Some(t_hi) = hi {
            let t_lo = lo.expect("lower cap crossed too");
            prop_assert!(t_lo <= t_hi);
        }
    }

    #[test]
    fn dump_round_trip(seed in any::<u64>(), snaps in any::<bool>()) {
        let c = SolverConfig { dt: 1e-3, horizon: 0.05, ..SolverConfig::default() }.with_grid(16).unwrap();
        let b = ScalarFunctionModel::sine(1.0, 1.0, 0.0);
        let s = ScalarFunctionModel::constant(1.0);
        let opts = if snaps { RunOptions::new(1e6).with_snapshots(1) } else { RunOptions::new(1e6).with_record_stride(7) };
        let tr = simulate_path(&FieldState::constant(c.grid, 0.2), &c, &b, &s, ExtraDrift::None, NoiseSource::new(seed, 3), &opts).unwrap();
        let ctx = DumpContext { kind: PathKind::U, solver: &c, b: &b, sigma: &s, master_seed: seed, path_id: 3 };
        let (side, body) = encode_dump(&tr, &ctx);
        let d = decode_dump(&side, &body).unwrap();
        prop_assert_eq!(d.trajectory, tr);
        prop_assert_eq!(d.header.master_seed, seed);
    }

    #[test]
    fn effective_config_keeps_the_hash(betas in prop::collection::vec(1.01f64..2.0, 1..4), gammas in prop::collection::vec(0.0f64..2.0, 1..4), r in 1u64..500, seed in 0..=i64::MAX as u64, dt in 1e-5f64..1e-2) {
        let spec = ExperimentSpec {
            name: "p".into(),
            lattice: Some(Lattice { betas, gammas, amplitudes: vec![1.0, 0.01] }),
            solver: SolverConfig { dt, horizon: 1.0, ..SolverConfig::default() },
            replications: r,
            master_seed: seed,
            ..Default::default()
        };
        let text = effective_config(&spec);
        let back = parse_config(&text).unwrap().experiment(&text).unwrap();
        prop_assert_eq!(back.hash(), spec.hash());
    }
}

#[test]
fn ensemble_martingale_residual_has_zero_mean() {
    let c = SolverConfig { dt: 1e-3, horizon: 0.5, ..SolverConfig::default() }.with_grid(32).unwrap();
    let b = ScalarFunctionModel::sine(1.0, 1.0, 0.0);
    let s = ScalarFunctionModel::sine(1.0, 1.0, PI / 2.0);
    let opts = RunOptions::new(1e6).with_snapshots(1);
    let totals: Vec<f64> = (0..200)
        .map(|k| {
            let tr = simulate_path(&FieldState::constant(c.grid, 1.0), &c, &b, &s, ExtraDrift::None, NoiseSource::new(21, k), &opts).unwrap();
            let l = ledger_build(&tr, &b, &s, None, c.eps_floor).unwrap();
            assert!(l.closure_error() <= 1e-9 * l.sup_i().abs().max(1.0));
            l.martingale_total()
        })
        .collect();
    let n = totals.len() as f64;
    let mean = totals.iter().sum::<f64>() / n;
    let se = (totals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    assert!(mean.abs() <= 3.0 * se, "mean {mean}, se {se}");
}

#[test]
fn residual_quadratic_variation_matches_sigma_budget() {
    let b = ScalarFunctionModel::sine(1.0, 1.0, 0.0);
    let s = ScalarFunctionModel::sine(1.0, 1.0, PI / 2.0);
    let mut ratios = vec![];
    for dt in [1e-3, 1e-4] {
        let c = SolverConfig { dt, horizon: 0.2, ..SolverConfig::default() }.with_grid(32).unwrap();
        let mut qv = 0.0;
        let mut ds = 0.0;
        for k in 0..20 {
            let tr = simulate_path(&FieldState::constant(c.grid, 1.0), &c, &b, &s, ExtraDrift::None, NoiseSource::new(4, k), &RunOptions::new(1e6).with_snapshots(1)).unwrap();
            let l = ledger_build(&tr, &b, &s, None, c.eps_floor).unwrap();
            qv += l.quadratic_variation();
            ds += l.sigma_sq_total();
        }
        ratios.push(qv / ds);
    }
    assert!((ratios[1] - 1.0).abs() <= 0.15, "{ratios:?}");
}

#[test]
fn schemes_agree_on_a_lipschitz_model() {
    let b = ScalarFunctionModel::sine(1.0, 1.0, 0.0);
    let s = ScalarFunctionModel::sine(1.0, 1.0, PI / 2.0);
    let mean_linf = |scheme: Scheme| {
        let c = SolverConfig { dt: 1e-4, horizon: 0.25, scheme, ..SolverConfig::default() }.with_grid(64).unwrap();
        let xs: Vec<f64> = (0..100)
            .map(|k| {
                let tr = simulate_path(&FieldState::constant(c.grid, 1.0), &c, &b, &s, ExtraDrift::None, NoiseSource::new(8, k), &RunOptions::new(1e6).with_record_stride(2500)).unwrap();
                tr.final_row().unwrap().linf
            })
            .collect();
        xs.iter().sum::<f64>() / xs.len() as f64
    };
    let (a, f) = (mean_linf(Scheme::SpectralExponential), mean_linf(Scheme::SemiImplicitFd));
    assert!((a / f - 1.0).abs() <= 0.05, "spectral {a}, fd {f}");
}

#[test]
fn csv_numbers_round_trip() {
    let solver = SolverConfig { dt: 1e-3, horizon: 0.3, ..SolverConfig::default() }.with_grid(32).unwrap();
    let spec = ExperimentSpec {
        name: "csv".into(),
        lattice: Some(Lattice { betas: vec![2.0], gammas: vec![0.0, 1.5], amplitudes: vec![1.0] }),
        solver,
        replications: 7,
        master_seed: 5,
        ..Default::default()
    };
    let r = run_ensemble(&spec, 1).unwrap();
    let text = result_csv(&r);
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let h = rdr.headers().unwrap().clone();
    let col = |n: &str| h.iter().position(|c| c == n).unwrap();
    for (rec, p) in rdr.records().zip(&r.points) {
        let rec = rec.unwrap();
        assert_eq!(rec[col("freq")].parse::<f64>().unwrap(), p.frequency);
        assert_eq!(rec[col("ci_lo")].parse::<f64>().unwrap(), p.ci_lo);
        assert_eq!(rec[col("ci_hi")].parse::<f64>().unwrap(), p.ci_hi);
    }
}
