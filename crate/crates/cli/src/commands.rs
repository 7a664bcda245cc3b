//! The five subcommands. Each returns the process exit code or a [`Failure`].

use std::path::{Path, PathBuf};

use memwave_core::certificates::{
    average_identity_residual, delta, kato_sequence, memory_ode_surrogate, test_function_certificate,
    CertificateResult, KatoSequence, TestFunctionSpec,
};
use memwave_core::exponents::{kato_exponent, mild_cap, strauss_exponent, weak_cap};
use memwave_core::solver::run;
use memwave_core::{Error, FractionalOrder, ProblemParams, RunConfig, RunResult, Verdict};
use rayon::prelude::*;
use serde::Serialize;

use crate::input::{load_config, load_plan};
use crate::store::{self, Summary};
use crate::svg::{line_chart, Series};
use crate::{exit, verdict_exit_code, CmdResult, Failure};

fn ensure_dir(dir: &Path) -> CmdResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::new(exit::FAILURE, format!("cannot create {}: {e}", dir.display())))
}

fn pool(threads: Option<usize>) -> CmdResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Failure::new(exit::FAILURE, e.to_string()))
}

/// Writes `series.csv`, `summary.json`, and `snapshots.bin` / `series.svg` when asked.
pub fn cmd_run(config_path: &Path, out: &Path, snapshots: Option<usize>, svg: bool) -> CmdResult<i32> {
    let mut config = load_config(config_path)?;
    if let Some(k) = snapshots {
        config.snapshot_every = k;
    }
    ensure_dir(out)?;
    let result = run(&config)?;
    store::write_series(&out.join(store::SERIES), &result.rows)?;
    store::write_json(&out.join(store::SUMMARY), &Summary::new(&config, &result))?;
    if config.snapshot_every > 0 {
        let u1 = result.u1.as_deref().unwrap_or_default();
        store::write_snapshots(&out.join(store::SNAPSHOTS), u1, &result.snapshots)?;
    }
    if svg {
        let pts = |f: fn(&memwave_core::SeriesRow) -> f64| result.rows.iter().map(|r| (r.t, f(r).log10())).collect();
        let chart = line_chart(
            "norms",
            "t",
            "log10",
            &[Series { label: "Linf", points: pts(|r| r.linf) }, Series { label: "H1", points: pts(|r| r.h1) }],
        );
        std::fs::write(out.join("series.svg"), chart)?;
    }
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    eprintln!("{}: {}", result.verdict.as_str(), result.stop_detail);
    Ok(verdict_exit_code(result.verdict))
}

#[derive(Debug, Clone, Serialize)]
struct SweepRow {
    run: usize,
    p: f64,
    gamma: f64,
    amplitude: f64,
    #[serde(rename = "M")]
    m: usize,
    dt: f64,
    verdict: String,
    exit_code: i32,
    t_max: Option<f64>,
    t_max_uncertainty: Option<f64>,
    beta: Option<f64>,
    t_last: f64,
    linf_last: f64,
    dt_halvings: u32,
    detail: String,
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> CmdResult<()> {
    let fail = |e: csv::Error| Failure::new(exit::FAILURE, format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(fail)?;
    for r in rows {
        w.serialize(r).map_err(fail)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs the cartesian plan in parallel; rows land in `sweep.csv` in plan order.
pub fn cmd_sweep(plan_path: &Path, out: &Path, threads: Option<usize>) -> CmdResult<i32> {
    let plan = load_plan(plan_path)?;
    let points = plan.expand()?;
    ensure_dir(out)?;
    let results: Vec<CmdResult<RunResult>> =
        pool(threads)?.install(|| points.par_iter().map(|pt| run(&pt.config).map_err(Failure::from)).collect());
    let mut rows = Vec::with_capacity(points.len());
    for (i, (pt, res)) in points.iter().zip(results).enumerate() {
        let r = res.map_err(|f| Failure::new(f.code, format!("run {i}: {f}")))?;
        let last = r.rows.last().copied().unwrap_or_default();
        rows.push(SweepRow {
            run: i,
            p: pt.p,
            gamma: pt.gamma,
            amplitude: pt.amplitude,
            m: pt.m,
            dt: pt.dt,
            verdict: r.verdict.as_str().into(),
            exit_code: verdict_exit_code(r.verdict),
            t_max: r.blowup.t_max,
            t_max_uncertainty: r.blowup.uncertainty,
            beta: r.blowup.beta,
            t_last: last.t,
            linf_last: last.linf,
            dt_halvings: r.dt_halvings,
            detail: r.stop_detail,
        });
    }
    write_csv(&out.join("sweep.csv"), &rows)?;
    eprintln!("{} runs written to {}", rows.len(), out.join("sweep.csv").display());
    Ok(exit::OK)
}

pub struct BisectArgs {
    pub config: PathBuf,
    pub lo: f64,
    pub hi: f64,
    pub tol: f64,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
struct BisectStep {
    step: usize,
    lo: f64,
    hi: f64,
    amplitude: f64,
    verdict: String,
    t_last: f64,
}

/// Bisects the data scale factor on "blow-up detected before t_end".
pub fn cmd_bisect(args: &BisectArgs) -> CmdResult<i32> {
    let BisectArgs { lo, hi, tol, .. } = *args;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Failure::config(format!("need lo <= hi, got lo = {lo}, hi = {hi}")));
    }
    if !(tol > 0.0) {
        return Err(Failure::config(format!("tol must be positive, got {tol}")));
    }
    let base = load_config(&args.config)?;
    let probe = |a: f64| -> CmdResult<RunResult> {
        let mut c = base.clone();
        c.initial = base.initial.scaled(a)?;
        Ok(run(&c)?)
    };
    ensure_dir(&args.out)?;
    let (r_lo, r_hi) = rayon::join(|| probe(lo), || probe(hi));
    let (r_lo, r_hi) = (r_lo?, r_hi?);
    if r_lo.verdict != Verdict::Completed || r_hi.verdict != Verdict::BlowupDetected {
        return Err(Failure::new(
            exit::NOT_BRACKETING,
            format!(
                "endpoints do not bracket: lo = {lo} gives {} ({}), hi = {hi} gives {} ({}); \
                 need completed at lo and blowup_detected at hi",
                r_lo.verdict.as_str(),
                r_lo.stop_detail,
                r_hi.verdict.as_str(),
                r_hi.stop_detail
            ),
        ));
    }
    let t_last = |r: &RunResult| r.rows.last().map_or(0.0, |x| x.t);
    let mut history = vec![
        BisectStep { step: 0, lo, hi, amplitude: lo, verdict: r_lo.verdict.as_str().into(), t_last: t_last(&r_lo) },
        BisectStep { step: 0, lo, hi, amplitude: hi, verdict: r_hi.verdict.as_str().into(), t_last: t_last(&r_hi) },
    ];
    let (mut a, mut b) = (lo, hi);
    let mut step = 0;
    while b - a > tol {
        step += 1;
        let mid = 0.5 * (a + b);
        let r = probe(mid)?;
        if r.verdict == Verdict::BlowupDetected {
            b = mid;
        } else {
            if r.verdict != Verdict::Completed {
                eprintln!("warning: amplitude {mid} ended as {} ({}), counted as no blow-up", r.verdict.as_str(), r.stop_detail);
            }
            a = mid;
        }
        history.push(BisectStep { step, lo: a, hi: b, amplitude: mid, verdict: r.verdict.as_str().into(), t_last: t_last(&r) });
    }
    write_csv(&args.out.join("bisect.csv"), &history)?;
    store::write_json(
        &args.out.join("bisect.json"),
        &serde_json::json!({ "lo": a, "hi": b, "width": b - a, "tol": tol, "steps": step }),
    )?;
    println!("threshold amplitude in [{a}, {b}]");
    Ok(exit::OK)
}

pub struct ExponentsArgs {
    pub n: Vec<u32>,
    pub gamma: Vec<f64>,
    pub out: PathBuf,
    pub svg: bool,
}

fn num(x: Option<f64>) -> String {
    match x {
        None => "NA".into(),
        Some(v) if v.is_infinite() => "inf".into(),
        Some(v) => format!("{v:.17}"),
    }
}

/// One row per (N, γ) with the critical exponents and the regime boundaries.
pub fn cmd_exponents(args: &ExponentsArgs) -> CmdResult<i32> {
    if let Some(&g) = args.gamma.iter().find(|g| !(**g > 0.0 && **g < 1.0)) {
        return Err(Failure::config(format!("gamma must lie in (0,1), got {g}")));
    }
    if let Some(&n) = args.n.iter().find(|n| **n == 0) {
        return Err(Failure::config(format!("N must be positive, got {n}")));
    }
    ensure_dir(&args.out)?;
    let mut text = String::from(
        "N,gamma,p1,p2,inv_gamma,mild_cap,weak_cap,weak_gap_cap,gamma_floor,kato_gamma_range,strauss_gamma_range,mu_window\n",
    );
    for &n in &args.n {
        let nf = n as f64;
        let mut curves = [Vec::new(), Vec::new(), Vec::new()];
        for &g in &args.gamma {
            let p1 = kato_exponent(n, g);
            let p2 = strauss_exponent(n, g).ok();
            let floor = (nf - 2.0) / nf;
            let kato_range = n == 1 || (n % 2 == 0 && g >= floor);
            let strauss_range = n == 3 && g >= 1.0 / 3.0 || (n >= 5 && n % 2 == 1 && g > floor);
            let gap = (n >= 4).then(|| (nf + 1.0) / (nf - 3.0));
            // p in (N/(N−2), weak cap) is where μ = N/2 − 1/(p−1) is available
            let mu_window = n >= 3 && weak_cap(n, g) > mild_cap(n);
            text.push_str(&format!(
                "{n},{g:.17},{},{},{},{},{},{},{},{},{},{}\n",
                num(p1),
                num(p2),
                num(Some(1.0 / g)),
                num(Some(mild_cap(n))),
                num(Some(weak_cap(n, g))),
                num(gap),
                num((n >= 2).then_some(floor.max(0.0))),
                kato_range,
                strauss_range,
                mu_window
            ));
            curves[0].push((g, p1.unwrap_or(f64::NAN)));
            curves[1].push((g, p2.unwrap_or(f64::NAN)));
            curves[2].push((g, 1.0 / g));
        }
        if args.svg {
            let [a, b, c] = curves;
            let chart = line_chart(
                &format!("critical exponents, N = {n}"),
                "gamma",
                "p",
                &[Series { label: "p1", points: a }, Series { label: "p2", points: b }, Series { label: "1/gamma", points: c }],
            );
            std::fs::write(args.out.join(format!("exponents_N{n}.svg")), chart)?;
        }
    }
    std::fs::write(args.out.join("exponents.csv"), text)?;
    Ok(exit::OK)
}

pub struct CertifyArgs {
    pub run_dir: PathBuf,
    pub out: Option<PathBuf>,
    pub t_scale: Option<f64>,
    pub spatial_scale: Option<f64>,
    pub ell: Option<u32>,
    pub eta: Option<f64>,
    /// Constant c of the memory-ODE surrogate.
    pub surrogate_c: f64,
    pub kato_terms: usize,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "snake_case")]
enum Outcome<T> {
    Value(T),
    Error(String),
}

impl<T> From<memwave_core::Result<T>> for Outcome<T> {
    fn from(r: memwave_core::Result<T>) -> Self {
        match r {
            Ok(v) => Outcome::Value(v),
            Err(e) => Outcome::Error(e.to_string()),
        }
    }
}

#[derive(Debug, Serialize)]
struct SurrogateReport {
    m: f64,
    r: f64,
    c: f64,
    f0: f64,
    f0dot: f64,
    dt: f64,
    t_end: f64,
    blowup: bool,
    t_max: Option<f64>,
    run_t_max: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Certificate {
    params: ProblemParams,
    verdict: Verdict,
    p1: Option<f64>,
    p2: Option<f64>,
    delta: f64,
    average_identity_residual: Outcome<f64>,
    kato: Outcome<KatoSequence>,
    test_function: Outcome<CertificateResult>,
    surrogate: Outcome<SurrogateReport>,
}

const RERUN_HINT: &str = "rerun with `memwave run --snapshots K` to store snapshots";

/// Reads a run directory and writes `certificate.json`.
pub fn cmd_certify(args: &CertifyArgs) -> CmdResult<i32> {
    let dir = &args.run_dir;
    let summary = store::read_summary(dir)?;
    let config: RunConfig = summary.config.clone();
    let rows = store::read_series(&dir.join(store::SERIES))
        .map_err(|e| Failure::new(exit::MISSING_SNAPSHOTS, format!("series.csv is unreadable ({e}); {RERUN_HINT}")))?;
    if rows.len() != summary.rows || rows.is_empty() {
        return Err(Failure::new(
            exit::MISSING_SNAPSHOTS,
            format!("series.csv has {} rows but the run recorded {}; {RERUN_HINT}", rows.len(), summary.rows),
        ));
    }
    let snap_path = dir.join(store::SNAPSHOTS);
    if summary.snapshots == 0 || !snap_path.exists() {
        return Err(Failure::new(exit::MISSING_SNAPSHOTS, format!("no snapshot store in {}; {RERUN_HINT}", dir.display())));
    }
    let (u1, snapshots) = store::read_snapshots(&snap_path)
        .map_err(|e| Failure::new(exit::MISSING_SNAPSHOTS, format!("{e}; {RERUN_HINT}")))?;
    let result = RunResult {
        verdict: summary.verdict,
        rows,
        blowup: summary.blowup,
        agreement: summary.agreement,
        picard_rows: None,
        warnings: summary.warnings.clone(),
        stop_detail: summary.stop_detail.clone(),
        alpha: summary.alpha,
        forcing: summary.forcing,
        data_radius: summary.data_radius,
        dt_halvings: summary.dt_halvings,
        snapshots,
        u1: Some(u1),
    };
    let params = config.params;
    let (n, p, gamma) = (params.n, params.p, params.gamma);

    let order = FractionalOrder::from_gamma(gamma)?;
    let identity = average_identity_residual(&result, order).into();

    let last_snap = result.snapshots.last().map_or(0.0, |s| s.t);
    let mut spec = TestFunctionSpec::default();
    spec.ell = args.ell.unwrap_or(spec.ell);
    spec.eta = args.eta.unwrap_or(spec.eta);
    spec.spatial_scale = args.spatial_scale;
    // φ₁ lives in the ball of radius 2R, which has to fit inside the box
    let fit = 0.25 * config.grid.l;
    spec.t_scale = Some(args.t_scale.unwrap_or(match args.spatial_scale {
        Some(_) => last_snap,
        None => last_snap.min(fit),
    }));
    let test_function = match test_function_certificate(&config, &result, &spec) {
        Err(Error::InsufficientData(m)) => {
            return Err(Failure::new(exit::MISSING_SNAPSHOTS, format!("{m}; {RERUN_HINT} (smaller K stores more)")))
        }
        other => other.into(),
    };

    let grid = config.make_grid()?;
    let f0 = result.rows[0].int_u;
    let f0dot = result.u1.as_ref().map_or(0.0, |u| u.iter().sum::<f64>() * grid.cell_volume());
    let m = n as f64 * (p - 1.0);
    let r = result.data_radius.unwrap_or(1.0).max(grid.spacing());
    let (dt, t_end) = (5e-3, 100.0);
    let surrogate = memory_ode_surrogate(p, gamma, m, r, f0, f0dot, args.surrogate_c, t_end, dt)
        .map(|s| SurrogateReport {
            m,
            r,
            c: args.surrogate_c,
            f0,
            f0dot,
            dt,
            t_end,
            blowup: s.blowup,
            t_max: s.estimate.t_max.filter(|_| s.blowup),
            run_t_max: result.blowup.t_max,
        })
        .into();

    let cert = Certificate {
        params,
        verdict: result.verdict,
        p1: kato_exponent(n, gamma),
        p2: strauss_exponent(n, gamma).ok(),
        delta: delta(n, p, gamma),
        average_identity_residual: identity,
        kato: kato_sequence(p, gamma, args.kato_terms).into(),
        test_function,
        surrogate,
    };
    let out = args.out.clone().unwrap_or_else(|| dir.clone());
    ensure_dir(&out)?;
    store::write_json(&out.join("certificate.json"), &cert)?;
    Ok(exit::OK)
}
