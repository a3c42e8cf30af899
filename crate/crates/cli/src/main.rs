//! `shelab` command-line front end.

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use shelab::diagnostics::{classify_explosion, ledger_build, tripling_probability_audit, DiagnosticsError, ExplosionVerdict};
use shelab::experiments::{canonical_json, result_csv, run_ensemble, ExperimentResult, CODE_VERSION};
use shelab::io::{
    effective_config, encode_dump, parse_config, read_dump, rows_dat, sha256_hex, ConfigError, ConfigFile, Dump, DumpContext,
    OutputDir, PathKind,
};
use shelab::lemmas;
use shelab::models::{
    check_assumption_a, check_assumption_b, check_small_noise_bound, convexity_ratio_check, osgood_classify, AssumptionReport, CaseAOptions,
    CaseBOptions, QuadratureBudget, Verdict,
};
use shelab::numerics::log_space;
use shelab::spde::{simulate_coupled, FieldState, NoiseSource, RunOptions, SolverConfig, Trajectory};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Default output directory when `--out-dir` is absent.
const OUT_DIR_ENV: &str = "SHELAB_OUT_DIR";

#[derive(Parser)]
#[command(name = "shelab", version, about = "Stochastic heat equation laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for ensembles.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    dt: Option<f64>,
    #[arg(long, global = true)]
    nx: Option<usize>,
    #[arg(long, global = true)]
    horizon: Option<f64>,
    /// Overflow cap U_cap.
    #[arg(long, global = true)]
    ucap: Option<f64>,
    /// Confirm explosions on a refined noise path.
    #[arg(long, global = true)]
    refine: bool,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// One coupled run of u, v and v_-.
    Simulate { config: PathBuf },
    /// Assumption and Osgood checks for the models of a config.
    Check { config: PathBuf },
    /// Explosion-frequency campaign.
    PhaseDiagram { config: PathBuf },
    /// Diagnostics over trajectory dumps.
    Audit {
        /// Dump stems or sidecar paths.
        #[arg(required = true)]
        dumps: Vec<PathBuf>,
        /// Comma-separated: explosion, ledger, tripling.
        #[arg(long, value_delimiter = ',', default_value = "explosion")]
        audits: Vec<String>,
    },
    /// Run the property suites.
    ValidateLemmas {
        /// Suites to run; all when empty.
        #[arg(long = "suite")]
        suites: Vec<String>,
    },
}

/// Failure carrying its exit status.
struct Fail {
    code: u8,
    message: String,
}

impl Fail {
    fn config(e: impl std::fmt::Display) -> Self {
        Fail { code: 2, message: e.to_string() }
    }
    fn resource(e: impl std::fmt::Display) -> Self {
        Fail { code: 3, message: e.to_string() }
    }
}

type Outcome = Result<u8, Fail>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let c = cli.common;
    let result = match cli.command {
        Command::Simulate { config } => simulate(&config, &c),
        Command::Check { config } => check(&config, &c),
        Command::PhaseDiagram { config } => phase_diagram(&config, &c),
        Command::Audit { dumps, audits } => audit(&dumps, &audits, &c),
        Command::ValidateLemmas { suites } => validate_lemmas(&suites, &c),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn out_dir(c: &Common) -> PathBuf {
    c.out_dir
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("shelab-out"))
}

fn workers(c: &Common) -> usize {
    c.workers.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)).max(1)
}

fn load(path: &Path) -> Result<(String, ConfigFile), Fail> {
    let src = std::fs::read_to_string(path).map_err(|e| Fail::config(format!("{}: {e}", path.display())))?;
    let file = parse_config(&src).map_err(Fail::config)?;
    Ok((src, file))
}

fn flag_error(flag: &str, e: impl std::fmt::Display) -> Fail {
    Fail::config(format!("--{flag}: {e}"))
}

/// Applies the solver flags; a flag that breaks validation is named.
fn override_solver(mut s: SolverConfig, c: &Common) -> Result<SolverConfig, Fail> {
    if let Some(dt) = c.dt {
        s.dt = dt;
    }
    if let Some(nx) = c.nx {
        s = s.with_grid(nx).map_err(|e| flag_error("nx", e))?;
    }
    if let Some(h) = c.horizon {
        s.horizon = h;
    }
    if let Some(u) = c.ucap {
        s.u_cap = u;
    }
    Ok(s)
}

fn json_bytes<T: serde::Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

fn simulate(path: &Path, c: &Common) -> Outcome {
    let (src, file) = load(path)?;
    let mut cfg = file.simulate(&src).map_err(Fail::config)?;
    cfg.solver = override_solver(cfg.solver, c)?;
    cfg.solver.validate(Some(cfg.initial.abs().max(1.0)), true).map_err(Fail::config)?;
    let seed = c.seed.unwrap_or(cfg.master_seed);
    let solver = &cfg.solver;
    let u0 = FieldState::constant(solver.grid, cfg.initial);
    let mut opts = RunOptions::new(solver.u_cap);
    opts = if cfg.snapshots { opts.with_snapshots(1) } else { opts.with_record_stride((solver.n_steps() / 1000).max(1)) };
    let (b, sigma) = (&cfg.model.b, &cfg.model.sigma);
    let run = simulate_coupled(&u0, solver, b, sigma, NoiseSource::new(seed, 0), &opts).map_err(Fail::resource)?;

    let spec = json!({ "model": cfg.model, "solver": solver, "initial": cfg.initial, "snapshots": cfg.snapshots });
    let hash = sha256_hex(canonical_json(&spec).as_bytes());
    let mut out = OutputDir::create(out_dir(c)).map_err(Fail::resource)?;
    for (name, kind, tr) in [("u", PathKind::U, &run.u), ("v", PathKind::Auxiliary, &run.v), ("v_minus", PathKind::Auxiliary, &run.v_minus)] {
        let ctx = DumpContext { kind, solver, b, sigma, master_seed: seed, path_id: 0 };
        let (side, body) = encode_dump(tr, &ctx);
        out.write(&format!("{name}.json"), side.as_bytes()).map_err(Fail::resource)?;
        out.write(&format!("{name}.bin"), &body).map_err(Fail::resource)?;
        out.write(&format!("{name}.dat"), rows_dat(tr).as_bytes()).map_err(Fail::resource)?;
    }
    let summary = json!({
        "spec_hash": hash,
        "master_seed": seed,
        "u": run.u.outcome,
        "first_stop": run.first_stop,
        "max_order_violation": run.max_order_violation,
        "steps": run.u.steps,
    });
    out.write("summary.json", &json_bytes(&summary)).map_err(Fail::resource)?;
    out.finish("simulate", &hash, seed, true).map_err(Fail::resource)?;
    println!("u: {:?} after {} steps; max order violation {:.3e}", run.u.outcome, run.u.steps, run.max_order_violation);
    Ok(0)
}

fn verdict_word(v: Verdict) -> &'static str {
    match v {
        Verdict::Satisfied => "satisfied",
        Verdict::Violated => "violated",
        Verdict::Inconclusive => "inconclusive",
    }
}

fn check(path: &Path, c: &Common) -> Outcome {
    let (src, file) = load(path)?;
    let model = file.model.clone().ok_or_else(|| Fail::config(ConfigError { key: "model".into(), line: None, message: "section is required".into() }))?;
    let section = file.check.clone().unwrap_or_default();
    let mut human = String::new();
    let mut reports: Vec<AssumptionReport> = vec![];
    let mut machine = serde_json::Map::new();
    let mut violated = false;
    for case in &section.cases {
        let report = match case.as_str() {
            "a" => {
                let opts = CaseAOptions { theta: section.theta, sigma_upper: section.sigma_upper, ..CaseAOptions::default() };
                check_assumption_a(&model.b, &model.sigma, model.h.as_ref(), opts).map_err(Fail::config)?
            }
            "b" => {
                let missing = |k: &str| Fail::config(ConfigError { key: k.into(), line: None, message: "required for case b".into() });
                let h = model.h.as_ref().ok_or_else(|| missing("model.h"))?;
                let cb = section.case_b.as_ref().ok_or_else(|| missing("check.case_b"))?;
                check_assumption_b(&model.b, &model.sigma, h, CaseBOptions::new(cb.c_lower, cb.c_upper, cb.gamma)).map_err(Fail::config)?
            }
            other => {
                let line = shelab::io::locate_key(&src, "check", "cases");
                return Err(Fail::config(ConfigError { key: "check.cases".into(), line, message: format!("unknown case `{other}`, expected a or b") }));
            }
        };
        violated |= report.verdict == Verdict::Violated;
        let _ = writeln!(human, "assumption ({case}): {}", verdict_word(report.verdict));
        for s in &report.sub_checks {
            let _ = writeln!(human, "  {}: {}", s.id, s.detail);
        }
        if let Some(w) = report.violations().next() {
            let scale = if w.log_scale { " (log scale)" } else { "" };
            let _ = writeln!(human, "  witness {} at u = {}: {} > {}{scale}", w.condition, w.u, w.lhs, w.rhs);
        }
        if let Some(k) = report.drift_constant {
            let _ = writeln!(human, "  drift constant C = {k}");
        }
        reports.push(report);
    }
    machine.insert("assumptions".into(), serde_json::to_value(&reports).expect("serializable"));
    match model.h.as_ref() {
        Some(h) => {
            if section.osgood {
                let v = osgood_classify(h, 1.0, QuadratureBudget::default()).map_err(Fail::config)?;
                let _ = writeln!(human, "osgood: {:?} ({})", v.classification, v.tail_evidence);
                machine.insert("osgood".into(), serde_json::to_value(&v).expect("serializable"));
            }
            if let Some(sn) = &section.small_noise {
                let r = check_small_noise_bound(&model.sigma, h, sn.c_upper, sn.gamma_1, sn.exponent, (0.0, 1e6)).map_err(Fail::config)?;
                let word = match r.passed {
                    Some(true) => "satisfied",
                    Some(false) => "violated",
                    None => "inconclusive",
                };
                let _ = writeln!(human, "small-noise bound: {word} ({})", r.detail);
                machine.insert("small_noise".into(), serde_json::to_value(&r).expect("serializable"));
            }
            if section.convexity {
                let r = convexity_ratio_check(h, &log_space(1e-3, 1e6, 400)).map_err(Fail::config)?;
                let _ = writeln!(human, "convexity: max h h''/(h')^2 = {} at u = {} ({})", r.max_ratio, r.argmax, if r.pass { "pass" } else { "fail" });
                machine.insert("convexity".into(), serde_json::to_value(&r).expect("serializable"));
            }
        }
        None => {
            let _ = writeln!(human, "osgood/convexity: skipped, no model.h");
        }
    }
    print!("{human}");
    let hash = sha256_hex(canonical_json(&serde_json::to_value(&file).expect("serializable")).as_bytes());
    let mut out = OutputDir::create(out_dir(c)).map_err(Fail::resource)?;
    out.write("check.txt", human.as_bytes()).map_err(Fail::resource)?;
    out.write("check.json", &json_bytes(&machine)).map_err(Fail::resource)?;
    out.finish("check", &hash, 0, true).map_err(Fail::resource)?;
    Ok(if violated { 1 } else { 0 })
}

/// Whitespace-separated columns for gnuplot.
fn phase_dat(r: &ExperimentResult) -> String {
    let mut s = String::from("# beta gamma A freq ci_lo ci_hi median_t explosions replications\n");
    for p in &r.points {
        let f = |x: Option<f64>| x.map_or("nan".to_string(), |v| v.to_string());
        let _ = writeln!(
            s,
            "{} {} {} {} {} {} {} {} {}",
            f(p.beta),
            f(p.gamma),
            f(p.amplitude),
            p.frequency,
            p.ci_lo,
            p.ci_hi,
            f(p.median_t),
            p.explosions,
            p.replications
        );
    }
    s
}

fn phase_diagram(path: &Path, c: &Common) -> Outcome {
    let (src, file) = load(path)?;
    let mut spec = file.experiment(&src).map_err(Fail::config)?;
    spec.solver = override_solver(spec.solver, c)?;
    if let Some(s) = c.seed {
        spec.master_seed = s;
    }
    spec.refine |= c.refine;
    spec.validate().map_err(Fail::config)?;
    let result = run_ensemble(&spec, workers(c)).map_err(Fail::resource)?;
    let mut out = OutputDir::create(out_dir(c)).map_err(Fail::resource)?;
    out.write("result.csv", result_csv(&result).as_bytes()).map_err(Fail::resource)?;
    out.write("result.json", &json_bytes(&result)).map_err(Fail::resource)?;
    out.write("phase.dat", phase_dat(&result).as_bytes()).map_err(Fail::resource)?;
    out.write("effective.toml", effective_config(&spec).as_bytes()).map_err(Fail::resource)?;
    out.finish("phase-diagram", &result.spec_hash, spec.master_seed, result.complete).map_err(Fail::resource)?;
    for p in &result.points {
        println!("{}: {}/{} exploded, freq {:.3} [{:.3}, {:.3}]", p.label, p.explosions, p.replications, p.frequency, p.ci_lo, p.ci_hi);
    }
    if !result.complete {
        eprintln!("campaign incomplete: budget exhausted before all paths ran");
        return Ok(4);
    }
    Ok(0)
}

fn stem(p: &Path) -> PathBuf {
    match p.extension().and_then(|e| e.to_str()) {
        Some("json" | "bin" | "dat") => p.with_extension(""),
        _ => p.to_path_buf(),
    }
}

fn audit(paths: &[PathBuf], audits: &[String], c: &Common) -> Outcome {
    for a in audits {
        if !matches!(a.as_str(), "explosion" | "ledger" | "tripling") {
            return Err(Fail::config(format!("unknown audit `{a}`, expected explosion, ledger or tripling")));
        }
    }
    let dumps: Vec<(String, Dump)> = paths
        .iter()
        .map(|p| {
            let s = stem(p);
            let d = read_dump(&s).map_err(|e| Fail::config(format!("{}: {e}", s.display())))?;
            Ok((s.display().to_string(), d))
        })
        .collect::<Result<_, Fail>>()?;
    let want = |k: &str| audits.iter().any(|a| a == k);
    let mut out = OutputDir::create(out_dir(c)).map_err(Fail::resource)?;
    let mut index = vec![];

    if want("explosion") {
        let mut w = csv::Writer::from_writer(vec![]);
        w.write_record(["dump", "verdict", "t"]).expect("in-memory write");
        for (name, d) in &dumps {
            let s = &d.header.solver;
            let (verdict, t) = match classify_explosion(&d.trajectory, None, s.u_cap, s.horizon) {
                ExplosionVerdict::Exploded { t } => ("exploded", t.to_string()),
                ExplosionVerdict::Survived => ("survived", String::new()),
                ExplosionVerdict::Inconclusive => ("inconclusive", String::new()),
            };
            w.write_record([name.as_str(), verdict, &t]).expect("in-memory write");
            println!("{name}: {verdict} {t}");
        }
        out.write("explosion.csv", &w.into_inner().expect("in-memory write")).map_err(Fail::resource)?;
    }

    if want("ledger") {
        let mut w = csv::Writer::from_writer(vec![]);
        w.write_record(["dump", "i0", "i_final", "sup_i", "closure_error", "martingale_total", "quadratic_variation", "sigma_sq_total"])
            .expect("in-memory write");
        for (k, (name, d)) in dumps.iter().enumerate() {
            let h = &d.header;
            let alpha = (h.kind == PathKind::Auxiliary).then_some(h.solver.alpha);
            let l = ledger_build(&d.trajectory, &h.b, &h.sigma, alpha, h.solver.eps_floor).map_err(|e| match e {
                DiagnosticsError::InsufficientData(m) => Fail::config(format!("{name}: insufficient data for the ledger audit: {m}")),
                other => Fail::config(format!("{name}: {other}")),
            })?;
            let cells = [
                l.i[0],
                *l.i.last().unwrap(),
                l.sup_i(),
                l.closure_error(),
                l.martingale_total(),
                l.quadratic_variation(),
                l.sigma_sq_total(),
            ];
            let mut rec = vec![name.clone()];
            rec.extend(cells.iter().map(|x| x.to_string()));
            w.write_record(&rec).expect("in-memory write");
            let mut dat = String::from("# t I dB dA dS dN\n");
            for j in 0..l.steps() {
                let _ = writeln!(dat, "{} {} {} {} {} {}", l.times[j + 1], l.i[j + 1], l.d_b[j], l.d_a[j], l.d_s[j], l.d_n[j]);
            }
            out.write(&format!("ledger_{k}.dat"), dat.as_bytes()).map_err(Fail::resource)?;
            println!("{name}: sup I = {}, closure error {:.3e}", l.sup_i(), l.closure_error());
        }
        out.write("ledger.csv", &w.into_inner().expect("in-memory write")).map_err(Fail::resource)?;
    }

    if want("tripling") {
        let ensemble: Vec<Trajectory> = dumps.iter().filter(|(_, d)| d.header.kind == PathKind::U).map(|(_, d)| d.trajectory.clone()).collect();
        let a = tripling_probability_audit(&ensemble, None, 2).map_err(|e| Fail::config(format!("tripling audit: {e}")))?;
        println!("tripling: mean count {:.3} over {} paths, capped {}", a.counts.mean, a.paths, a.capped_paths);
        out.write("tripling.json", &json_bytes(&a)).map_err(Fail::resource)?;
    }

    for (name, d) in &dumps {
        index.push(json!({ "dump": name, "label": d.header.label, "master_seed": d.header.master_seed, "path_id": d.header.path_id }));
    }
    let inputs = json!({ "audits": audits, "dumps": index });
    let hash = sha256_hex(canonical_json(&inputs).as_bytes());
    let seed = dumps.first().map_or(0, |(_, d)| d.header.master_seed);
    out.finish("audit", &hash, seed, true).map_err(Fail::resource)?;
    Ok(0)
}

fn validate_lemmas(suites: &[String], c: &Common) -> Outcome {
    let seed = c.seed.unwrap_or(2024);
    let reports = lemmas::run_suites(suites, seed).map_err(Fail::config)?;
    for r in &reports {
        println!("{}: {} ({}/{} violations, worst {:.3e})", r.suite, if r.pass { "pass" } else { "FAIL" }, r.violations, r.cases, r.worst);
    }
    let hash = sha256_hex(canonical_json(&json!({ "suites": suites, "seed": seed, "version": CODE_VERSION })).as_bytes());
    let mut out = OutputDir::create(out_dir(c)).map_err(Fail::resource)?;
    out.write("lemmas.json", &json_bytes(&reports)).map_err(Fail::resource)?;
    out.finish("validate-lemmas", &hash, seed, true).map_err(Fail::resource)?;
    Ok(if reports.iter().all(|r| r.pass) { 0 } else { 1 })
}
