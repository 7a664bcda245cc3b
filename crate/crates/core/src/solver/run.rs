//! Run orchestration: stepping, adaptivity, diagnostics and stop rules.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::blowup::{detect_blowup, BlowupEstimate};
use super::config::{ForcingModel, RunConfig, Scheme};
use super::ledger::MemoryLedger;
use super::picard::picard_window;
use super::stepper::{Leapfrog, Problem};
use crate::error::{Error, Result};
use crate::spectral::{energy_from_spectra, support_radius, tail_fraction, Field, SpatialGrid, WaveState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Completed,
    BlowupDetected,
    HorizonReached,
    ResolutionFailure,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Completed => "completed",
            Verdict::BlowupDetected => "blowup_detected",
            Verdict::HorizonReached => "horizon_reached",
            Verdict::ResolutionFailure => "resolution_failure",
        }
    }
}

/// Diagnostics of one accepted time level.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SeriesRow {
    pub t: f64,
    pub l2: f64,
    pub h1: f64,
    pub linf: f64,
    pub energy: f64,
    /// ∫ u dx
    pub int_u: f64,
    /// ∫ |u|^p dx
    pub int_up: f64,
    pub support_radius: f64,
    pub tail_fraction: f64,
}

impl SeriesRow {
    pub const CSV_HEADER: &'static str = "t,L2,H1,Linf,energy,F,intUp,support_radius,tail_fraction";

    pub fn csv_line(&self) -> String {
        format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            self.t,
            self.l2,
            self.h1,
            self.linf,
            self.energy,
            self.int_u,
            self.int_up,
            self.support_radius,
            self.tail_fraction
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeAgreement {
    pub matched_times: usize,
    /// max ‖u_leapfrog − u_picard‖_{H¹} over matched times
    pub max_h1_diff: f64,
    pub max_rel_h1_diff: f64,
    /// Picard steps covered before stopping.
    pub picard_t_end: f64,
}

/// u on the grid at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub u: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunResult {
    pub verdict: Verdict,
    pub rows: Vec<SeriesRow>,
    pub blowup: BlowupEstimate,
    pub agreement: Option<SchemeAgreement>,
    /// Series of the Picard scheme when it ran alongside leapfrog.
    pub picard_rows: Option<Vec<SeriesRow>>,
    pub warnings: Vec<String>,
    pub stop_detail: String,
    /// Effective α of the memory kernel (after clamping).
    pub alpha: f64,
    pub forcing: ForcingModel,
    pub data_radius: Option<f64>,
    pub dt_halvings: u32,
    pub snapshots: Vec<Snapshot>,
    /// u₁ on the grid (kept with snapshots for the weak-form certificate).
    pub u1: Option<Vec<f64>>,
}

impl RunResult {
    /// Index one past the last row of the initial uniform-step segment.
    pub fn uniform_prefix_len(&self) -> usize {
        uniform_prefix(&self.rows.iter().map(|r| r.t).collect::<Vec<_>>())
    }
}

pub(crate) fn uniform_prefix(t: &[f64]) -> usize {
    if t.len() < 3 {
        return t.len();
    }
    let dt = t[1] - t[0];
    let mut n = 2;
    while n < t.len() && ((t[n] - t[n - 1]) - dt).abs() <= 1e-9 * dt {
        n += 1;
    }
    n
}

struct Diagnostics<'a> {
    grid: &'a SpatialGrid,
    floor: f64,
}

impl Diagnostics<'_> {
    fn row(&self, t: f64, u_hat: &[Complex64], v_hat: &[Complex64], u: &[f64], f: &[f64]) -> SeriesRow {
        let grid = self.grid;
        let pf = grid.parseval_factor();
        let mut l2 = 0.0;
        let mut h1 = 0.0;
        for (z, w) in u_hat.iter().zip(grid.omega()) {
            let a = z.norm_sqr();
            l2 += a;
            h1 += (1.0 + w * w) * a;
        }
        let linf = u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let vol = grid.cell_volume();
        let field = Field::new(grid, u.to_vec()).expect("grid-sized values");
        SeriesRow {
            t,
            l2: (pf * l2).sqrt(),
            h1: (pf * h1).sqrt(),
            linf,
            energy: energy_from_spectra(grid, u_hat, v_hat),
            int_u: vol * u.iter().sum::<f64>(),
            int_up: vol * f.iter().sum::<f64>(),
            support_radius: if linf > 0.0 { support_radius(&field, self.floor * linf) } else { 0.0 },
            tail_fraction: tail_fraction(grid, u_hat),
        }
    }
}

/// What ended a trajectory.
#[derive(Debug, Clone, PartialEq)]
enum Stop {
    Completed,
    Threshold(String),
    Overflow(f64),
    Resolution(String),
    Horizon(String),
    Stalled(String),
}

struct Context<'a> {
    config: &'a RunConfig,
    problem: Problem,
    grid: SpatialGrid,
    u0: Field,
    v0: Field,
    data_radius: Option<f64>,
}

impl Context<'_> {
    fn check_row(&self, row: &SeriesRow) -> Option<Stop> {
        let th = &self.config.thresholds;
        if row.linf > th.linf_cap {
            return Some(Stop::Threshold(format!("L∞ = {:.3e} exceeds {:.1e}", row.linf, th.linf_cap)));
        }
        if row.h1 > th.h1_cap {
            return Some(Stop::Threshold(format!("H¹ = {:.3e} exceeds {:.1e}", row.h1, th.h1_cap)));
        }
        if row.tail_fraction > th.tail_cap {
            return Some(Stop::Resolution(format!(
                "spectral tail fraction {:.3e} exceeds {:.1e}",
                row.tail_fraction, th.tail_cap
            )));
        }
        // r + t never exceeds the horizon (checked before each step), so a measured
        // support outside the light cone is leakage from an unresolved core
        if let Some(r) = self.data_radius {
            let cone = r + row.t + 3.0 * self.grid.spacing();
            if row.support_radius > cone {
                return Some(Stop::Resolution(format!(
                    "numerical support {:.4} left the light cone r + t + 3h = {cone:.4}",
                    row.support_radius
                )));
            }
        }
        None
    }

    /// Whether stepping to `t` would leave the finite-speed validity region.
    fn beyond_horizon(&self, t: f64) -> Option<Stop> {
        let r = self.data_radius?;
        let h = self.config.horizon_radius();
        (r + t > h * (1.0 + 1e-12)).then(|| {
            Stop::Horizon(format!("data radius {r} + t = {:.6} would exceed the horizon L/2 − padding = {h}", r + t))
        })
    }
}

struct Trajectory {
    rows: Vec<SeriesRow>,
    stop: Stop,
    halvings: u32,
    snapshots: Vec<Snapshot>,
    /// (t, û) kept for cross-scheme comparison.
    states: Vec<(f64, Vec<Complex64>)>,
}

fn run_leapfrog(
    ctx: &Context<'_>,
    observer: &mut dyn FnMut(&SeriesRow),
    keep_states: bool,
) -> Result<Trajectory> {
    let cfg = ctx.config;
    let diag = Diagnostics { grid: &ctx.grid, floor: cfg.support_floor };
    let start = WaveState::new(ctx.u0.clone(), ctx.v0.clone(), 0.0)?;
    let ledger = MemoryLedger::new(ctx.problem.alpha(), ctx.grid.len());
    let mut lf = Leapfrog::new(&ctx.problem, &start, ledger, cfg.dt)?;
    let mut out = Trajectory { rows: Vec::new(), stop: Stop::Completed, halvings: 0, snapshots: Vec::new(), states: Vec::new() };
    let row0 = diag.row(0.0, &lf.u_hat, &lf.v_hat, &lf.u, &lf.f);
    observer(&row0);
    out.rows.push(row0);
    if cfg.snapshot_every > 0 {
        out.snapshots.push(Snapshot { t: 0.0, u: lf.u.clone() });
    }
    if keep_states {
        out.states.push((0.0, lf.u_hat.clone()));
    }
    if let Some(stop) = ctx.check_row(&row0) {
        out.stop = stop;
        return Ok(out);
    }
    let mut dt = cfg.dt;
    let mut seg_start = 0.0;
    let mut seg_steps: u64 = 0;
    let mut accepted: usize = 0;
    let t_end = cfg.t_end;
    loop {
        if lf.t >= t_end * (1.0 - 1e-12) {
            out.stop = Stop::Completed;
            break;
        }
        let mut t_next = seg_start + (seg_steps + 1) as f64 * dt;
        if t_next > t_end * (1.0 - 1e-12) {
            t_next = t_end;
        }
        if let Some(stop) = ctx.beyond_horizon(t_next) {
            out.stop = stop;
            break;
        }
        let step = t_next - lf.t;
        let can_halve = cfg.adaptivity.enabled && out.halvings < cfg.adaptivity.max_halvings;
        let cand = match lf.propose(step) {
            Ok(c) => c,
            Err(_) if can_halve => {
                halve(&mut dt, &mut seg_start, &mut seg_steps, &mut out.halvings, &mut lf);
                continue;
            }
            Err(_) => {
                out.stop = Stop::Overflow(t_next);
                break;
            }
        };
        let h1_old = out.rows.last().unwrap().h1;
        let row = diag.row(cand.t, &cand.u_hat, &cand.v_hat, &cand.u, &cand.f);
        if can_halve && h1_old > 0.0 && ((row.h1 - h1_old) / h1_old).abs() > cfg.adaptivity.h1_increment {
            halve(&mut dt, &mut seg_start, &mut seg_steps, &mut out.halvings, &mut lf);
            continue;
        }
        lf.accept(cand)?;
        seg_steps += 1;
        accepted += 1;
        observer(&row);
        out.rows.push(row);
        if cfg.snapshot_every > 0 && accepted.is_multiple_of(cfg.snapshot_every) {
            out.snapshots.push(Snapshot { t: lf.t, u: lf.u.clone() });
        }
        if keep_states {
            out.states.push((lf.t, lf.u_hat.clone()));
        }
        if let Some(stop) = ctx.check_row(&row) {
            out.stop = stop;
            break;
        }
    }
    Ok(out)
}

fn halve(dt: &mut f64, seg_start: &mut f64, seg_steps: &mut u64, halvings: &mut u32, lf: &mut Leapfrog<'_>) {
    *dt *= 0.5;
    *seg_start = lf.t;
    *seg_steps = 0;
    *halvings += 1;
    lf.set_dt(*dt);
}

fn run_picard(ctx: &Context<'_>, observer: &mut dyn FnMut(&SeriesRow), t_stop: f64) -> Result<Trajectory> {
    let cfg = ctx.config;
    let grid = &ctx.grid;
    let diag = Diagnostics { grid, floor: cfg.support_floor };
    let pr = &ctx.problem;
    let mut state = WaveState::new(ctx.u0.clone(), ctx.v0.clone(), 0.0)?;
    let mut ledger = MemoryLedger::new(pr.alpha(), grid.len());
    let f0 = pr.power(ctx.u0.values());
    ledger.push(0.0, f0.clone())?;
    let mut out = Trajectory { rows: Vec::new(), stop: Stop::Completed, halvings: 0, snapshots: Vec::new(), states: Vec::new() };
    let row0 = diag.row(0.0, state.u.spectrum(), state.v.spectrum(), ctx.u0.values(), &f0);
    observer(&row0);
    out.rows.push(row0);
    out.states.push((0.0, state.u.spectrum().to_vec()));
    if cfg.snapshot_every > 0 {
        out.snapshots.push(Snapshot { t: 0.0, u: ctx.u0.values().to_vec() });
    }
    if let Some(stop) = ctx.check_row(&row0) {
        out.stop = stop;
        return Ok(out);
    }
    let dt = cfg.dt;
    let mut w_steps = ((cfg.picard.window / dt).round() as u64).max(1);
    let mut step_index: u64 = 0;
    let total = ((t_stop / dt) - 1e-9).ceil() as u64;
    'windows: while step_index < total {
        let n = w_steps.min(total - step_index);
        let t_s = step_index as f64 * dt;
        let t_e = if step_index + n == total { t_stop } else { (step_index + n) as f64 * dt };
        if let Some(stop) = ctx.beyond_horizon(t_e) {
            out.stop = stop;
            break;
        }
        let window = match picard_window(pr, &state, &ledger, t_e - t_s, dt * (1.0 + 1e-12), &cfg.picard) {
            Ok(w) if w.ratio < 0.5 || n == 1 => w,
            Ok(_) | Err(Error::NonContraction { .. }) if n > 1 => {
                w_steps = (n / 2).max(1);
                out.halvings += 1;
                continue;
            }
            Err(Error::NonContraction { ratio, iterations }) => {
                out.stop = Stop::Stalled(format!(
                    "single-step window did not contract (ratio {ratio:.3e} after {iterations} iterations)"
                ));
                break;
            }
            Err(Error::NumericalOverflow { t }) => {
                out.stop = Stop::Overflow(t);
                break;
            }
            Err(e) => return Err(e),
            Ok(_) => unreachable!("single-step windows are always accepted"),
        };
        for k in 0..window.times.len() {
            let t = window.times[k];
            if pr.forcing() == crate::solver::config::ForcingModel::Memory {
                ledger.push(t, window.f[k].clone())?;
            }
            let row = diag.row(t, &window.u_hat[k], &window.v_hat[k], &window.u[k], &window.f[k]);
            observer(&row);
            out.rows.push(row);
            out.states.push((t, window.u_hat[k].clone()));
            let idx = step_index + k as u64 + 1;
            if cfg.snapshot_every > 0 && idx.is_multiple_of(cfg.snapshot_every as u64) {
                out.snapshots.push(Snapshot { t, u: window.u[k].clone() });
            }
            if let Some(stop) = ctx.check_row(&row) {
                out.stop = stop;
                break 'windows;
            }
        }
        let last = window.times.len() - 1;
        state = WaveState {
            u: Field::from_spectrum(grid, &window.u_hat[last]),
            v: Field::from_spectrum(grid, &window.v_hat[last]),
            t: window.times[last],
        };
        step_index += n;
    }
    Ok(out)
}

fn agreement(grid: &SpatialGrid, a: &[(f64, Vec<Complex64>)], b: &[(f64, Vec<Complex64>)]) -> SchemeAgreement {
    let pf = grid.parseval_factor();
    let h1 = |z: &[Complex64]| -> f64 {
        (pf * z.iter().zip(grid.omega()).map(|(x, w)| (1.0 + w * w) * x.norm_sqr()).sum::<f64>()).sqrt()
    };
    let mut out = SchemeAgreement {
        matched_times: 0,
        max_h1_diff: 0.0,
        max_rel_h1_diff: 0.0,
        picard_t_end: b.last().map_or(0.0, |s| s.0),
    };
    let mut j = 0;
    for (t, ua) in a {
        while j < b.len() && b[j].0 < t - 1e-9 * t.abs().max(1.0) {
            j += 1;
        }
        if j == b.len() {
            break;
        }
        if (b[j].0 - t).abs() <= 1e-9 * t.abs().max(1.0) {
            let diff: Vec<Complex64> = ua.iter().zip(&b[j].1).map(|(x, y)| x - y).collect();
            let d = h1(&diff);
            let scale = h1(ua);
            out.matched_times += 1;
            out.max_h1_diff = out.max_h1_diff.max(d);
            if scale > 0.0 {
                out.max_rel_h1_diff = out.max_rel_h1_diff.max(d / scale);
            }
        }
    }
    out
}

fn verdict_of(stop: &Stop) -> (Verdict, String) {
    match stop {
        Stop::Completed => (Verdict::Completed, "reached t_end".into()),
        Stop::Threshold(s) => (Verdict::BlowupDetected, s.clone()),
        Stop::Overflow(t) => (Verdict::BlowupDetected, format!("numerical overflow at t = {t}")),
        Stop::Resolution(s) => (Verdict::ResolutionFailure, s.clone()),
        Stop::Horizon(s) => (Verdict::HorizonReached, s.clone()),
        Stop::Stalled(s) => (Verdict::ResolutionFailure, s.clone()),
    }
}

pub fn run(config: &RunConfig) -> Result<RunResult> {
    run_with_observer(config, |_| {})
}

/// Runs `config`, handing every accepted row of the primary scheme to
/// `observer` as soon as it is computed.
pub fn run_with_observer(config: &RunConfig, mut observer: impl FnMut(&SeriesRow)) -> Result<RunResult> {
    config.validate()?;
    let grid = config.make_grid()?;
    let u0 = config.initial.u0.sample(&grid)?;
    let v0 = config.initial.u1.sample(&grid)?;
    let r0 = config.initial.u0.support_radius(&u0);
    let r1 = config.initial.u1.support_radius(&v0);
    let data_radius = match (r0, r1) {
        (Some(a), Some(b)) => Some(a.max(b)),
        _ => None,
    };
    let mut warnings = Vec::new();
    match data_radius {
        Some(r) if r + config.t_end > config.horizon_radius() => warnings.push(format!(
            "data radius {r} + t_end {} exceeds L/2 − padding = {}; the run stops at the horizon",
            config.t_end,
            config.horizon_radius()
        )),
        None => warnings.push("periodic initial data: no finite-speed horizon is enforced".into()),
        _ => {}
    }
    let problem = Problem::new(&grid, &config.params, config.forcing, &u0)?;
    if config.params.alpha() < problem.alpha() {
        warnings.push(format!("alpha = {} clamped to {}", config.params.alpha(), problem.alpha()));
    }
    let ctx = Context { config, problem, grid: grid.clone(), u0, v0, data_radius };

    let (primary, picard_rows, agree) = match config.scheme {
        Scheme::Leapfrog => (run_leapfrog(&ctx, &mut observer, false)?, None, None),
        Scheme::Picard => (run_picard(&ctx, &mut observer, config.t_end)?, None, None),
        Scheme::Both => {
            let lf = run_leapfrog(&ctx, &mut observer, true)?;
            let t_stop = lf.rows.last().map_or(config.t_end, |r| r.t);
            let pc = run_picard(&ctx, &mut |_| {}, t_stop)?;
            let agree = agreement(&grid, &lf.states, &pc.states);
            if pc.stop != Stop::Completed {
                warnings.push(format!("Picard scheme stopped early: {}", verdict_of(&pc.stop).1));
            }
            (lf, Some(pc.rows), Some(agree))
        }
    };
    let (verdict, stop_detail) = verdict_of(&primary.stop);
    let mut series = primary.rows.clone();
    if let Stop::Overflow(t) = primary.stop {
        series.push(SeriesRow { t, linf: f64::INFINITY, h1: f64::INFINITY, ..SeriesRow::default() });
    }
    let blowup = detect_blowup(&series, &config.thresholds);
    let keep_u1 = config.snapshot_every > 0;
    Ok(RunResult {
        verdict,
        rows: primary.rows,
        blowup,
        agreement: agree,
        picard_rows,
        warnings,
        stop_detail,
        alpha: ctx.problem.alpha(),
        forcing: config.forcing,
        data_radius,
        dt_halvings: primary.halvings,
        snapshots: primary.snapshots,
        u1: keep_u1.then(|| ctx.v0.values().to_vec()),
    })
}
