//! Exponential-integrator time stepping with a memory forcing.
//!
//! Over one step the forcing g = J^α(|u|^p) is split as
//! g(t) = F₀ φ(t) + g̃(t) with φ(t) = t^α/Γ(α+1) and F₀ = |u₀|^p. The first
//! part carries the t^α startup singularity and is integrated against the wave
//! kernel by quadrature; the remainder is smooth enough for the exact
//! linear-in-time Duhamel formulas of [`StepTable`].

use num_complex::Complex64;

use super::config::ForcingModel;
use super::ledger::MemoryLedger;
use crate::error::{Error, Result};
use crate::exponents::ProblemParams;
use crate::fractional::interval_weights;
use crate::special::gamma;
use crate::spectral::{Field, SpatialGrid, StepTable, WaveState};

/// Smallest α used by the memory forcing; γ closer to 1 is clamped here.
pub const ALPHA_FLOOR: f64 = 1e-3;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

// 8-point Gauss–Legendre rule mapped to [0, 1].
const GL_X: [f64; 8] = [
    0.019855071751231856,
    0.10166676129318664,
    0.2372337950418355,
    0.4082826787521751,
    0.591717321247825,
    0.7627662049581645,
    0.8983332387068134,
    0.9801449282487681,
];
const GL_W: [f64; 8] = [
    0.05061426814518813,
    0.11119051722668724,
    0.15685332293894363,
    0.181341891689181,
    0.181341891689181,
    0.15685332293894363,
    0.11119051722668724,
    0.05061426814518813,
];

/// Equation data shared by both schemes.
#[derive(Debug, Clone)]
pub struct Problem {
    grid: SpatialGrid,
    p: f64,
    alpha: f64,
    forcing: ForcingModel,
    gamma_a1: f64,
    f0_hat: Vec<Complex64>,
}

impl Problem {
    pub fn new(grid: &SpatialGrid, params: &ProblemParams, forcing: ForcingModel, u0: &Field) -> Result<Self> {
        params.validate()?;
        if u0.grid() != grid {
            return Err(Error::contract("initial data lives on a different grid"));
        }
        let alpha = params.alpha().max(ALPHA_FLOOR);
        let mut me = Self {
            grid: grid.clone(),
            p: params.p,
            alpha,
            forcing,
            gamma_a1: gamma(alpha + 1.0),
            f0_hat: Vec::new(),
        };
        let f0 = me.power(u0.values());
        let mut f0_hat = grid.to_spectrum(&f0);
        grid.dealias(&mut f0_hat);
        me.f0_hat = f0_hat;
        Ok(me)
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Effective α after clamping at [`ALPHA_FLOOR`].
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn forcing(&self) -> ForcingModel {
        self.forcing
    }

    /// |u|^p pointwise.
    pub fn power(&self, u: &[f64]) -> Vec<f64> {
        if self.p == 2.0 {
            u.iter().map(|x| x * x).collect()
        } else {
            u.iter().map(|x| x.abs().powf(self.p)).collect()
        }
    }

    pub(crate) fn phi(&self, t: f64) -> f64 {
        if self.forcing == ForcingModel::Memory {
            t.powf(self.alpha) / self.gamma_a1
        } else {
            0.0
        }
    }

    /// Dealiased spectrum of g − F₀φ(t) for the real-space forcing `g`.
    pub(crate) fn reduced_spectrum(&self, g: &[f64], t: f64) -> Vec<Complex64> {
        if self.forcing == ForcingModel::Off {
            return vec![ZERO; g.len()];
        }
        let mut s = self.grid.to_spectrum(g);
        self.grid.dealias(&mut s);
        let ph = self.phi(t);
        if ph != 0.0 {
            for (z, f) in s.iter_mut().zip(&self.f0_hat) {
                *z -= f * ph;
            }
        }
        s
    }

    /// Real-space forcing at t_new given the ledger (ending at t_old, F_old)
    /// and the tentative F at t_new.
    /// Ledger part of J^α(F)(t); `None` unless the forcing has memory.
    pub(crate) fn history(&self, ledger: &MemoryLedger, t: f64) -> Option<Vec<f64>> {
        (self.forcing == ForcingModel::Memory).then(|| {
            let mut g = vec![0.0; self.grid.len()];
            ledger.history_at(t, &mut g);
            g
        })
    }

    /// Forcing at `t_new` given the ledger history evaluated there.
    pub(crate) fn forcing_with(&self, hist: Option<&[f64]>, t_old: f64, f_old: &[f64], t_new: f64, f_new: &[f64]) -> Vec<f64> {
        match self.forcing {
            ForcingModel::Off => vec![0.0; f_new.len()],
            ForcingModel::Local => f_new.to_vec(),
            ForcingModel::Memory => {
                let mut g = hist.expect("memory forcing needs its history").to_vec();
                let (wa, wb) = interval_weights(self.alpha, t_new, t_old, t_new);
                for ((gi, a), b) in g.iter_mut().zip(f_old).zip(f_new) {
                    *gi += wa * a + wb * b;
                }
                g
            }
        }
    }
}

/// Per-mode multipliers for one step length.
#[derive(Debug, Clone)]
pub(crate) struct StepKit {
    pub table: StepTable,
    gl_sinc: Vec<Vec<f64>>,
    gl_cos: Vec<Vec<f64>>,
    first_u: Vec<f64>,
    first_v: Vec<f64>,
}

impl StepKit {
    pub fn new(problem: &Problem, dt: f64) -> Self {
        let grid = &problem.grid;
        let table = StepTable::new(grid, dt);
        let mut kit = Self { table, gl_sinc: Vec::new(), gl_cos: Vec::new(), first_u: Vec::new(), first_v: Vec::new() };
        if problem.forcing != ForcingModel::Memory {
            return kit;
        }
        let omega = grid.omega();
        for &x in &GL_X {
            let tau = dt * (1.0 - x);
            kit.gl_sinc.push(omega.iter().map(|&w| sin_over(w, tau)).collect());
            kit.gl_cos.push(omega.iter().map(|&w| (w * tau).cos()).collect());
        }
        let a = problem.alpha;
        let (fu, fv): (Vec<f64>, Vec<f64>) = omega.iter().map(|&w| first_interval(w, dt, a, problem.gamma_a1)).unzip();
        kit.first_u = fu;
        kit.first_v = fv;
        kit
    }

    pub fn dt(&self) -> f64 {
        self.table.dt
    }

    /// (û, v̂) at t_n → t_n + dt given reduced forcing spectra at both ends.
    pub fn advance(
        &self,
        problem: &Problem,
        t_n: f64,
        u: &mut [Complex64],
        v: &mut [Complex64],
        g0: &[Complex64],
        g1: &[Complex64],
    ) {
        self.table.rotate(u, v);
        if problem.forcing == ForcingModel::Off {
            return;
        }
        self.table.add_forcing(u, v, g0, g1);
        if problem.forcing == ForcingModel::Memory {
            self.add_startup(problem, t_n, u, v);
        }
    }

    /// Adds ∫ K(t_{n+1}−s) F̂₀ φ(s) ds over the step (and the K̇ analogue).
    pub fn add_startup(&self, problem: &Problem, t_n: f64, u: &mut [Complex64], v: &mut [Complex64]) {
        let f0 = &problem.f0_hat;
        if t_n == 0.0 {
            for i in 0..u.len() {
                u[i] += f0[i] * self.first_u[i];
                v[i] += f0[i] * self.first_v[i];
            }
            return;
        }
        let dt = self.dt();
        let c: Vec<f64> = GL_X.iter().zip(&GL_W).map(|(x, w)| dt * w * problem.phi(t_n + dt * x)).collect();
        for i in 0..u.len() {
            let mut su = 0.0;
            let mut sv = 0.0;
            for q in 0..8 {
                su += c[q] * self.gl_sinc[q][i];
                sv += c[q] * self.gl_cos[q][i];
            }
            u[i] += f0[i] * su;
            v[i] += f0[i] * sv;
        }
    }
}

fn sin_over(w: f64, tau: f64) -> f64 {
    if w * tau == 0.0 {
        tau
    } else if (w * tau).abs() < 1e-4 {
        let x2 = (w * tau).powi(2);
        tau * (1.0 - x2 / 6.0 + x2 * x2 / 120.0)
    } else {
        (w * tau).sin() / w
    }
}

/// (∫₀^dt K(dt−s)φ(s)ds, ∫₀^dt K̇(dt−s)φ(s)ds) with φ(s) = s^α/Γ(α+1).
fn first_interval(w: f64, dt: f64, alpha: f64, gamma_a1: f64) -> (f64, f64) {
    let x = w * dt;
    if x < 1.0 {
        // Σ (−1)^k x^{2k} dt^{2+α}/Γ(2k+3+α) and Σ (−1)^k x^{2k} dt^{1+α}/Γ(2k+2+α)
        let x2 = x * x;
        let mut tu = 1.0 / gamma(3.0 + alpha);
        let mut tv = 1.0 / gamma(2.0 + alpha);
        let (mut su, mut sv) = (tu, tv);
        for k in 0..30 {
            let kf = k as f64;
            tu *= -x2 / ((2.0 * kf + 3.0 + alpha) * (2.0 * kf + 4.0 + alpha));
            tv *= -x2 / ((2.0 * kf + 2.0 + alpha) * (2.0 * kf + 3.0 + alpha));
            su += tu;
            sv += tv;
            if tu.abs() < 1e-18 * su.abs() && tv.abs() < 1e-18 * sv.abs() {
                break;
            }
        }
        (dt.powf(2.0 + alpha) * su, dt.powf(1.0 + alpha) * sv)
    } else {
        // dyadic grading towards the s^α endpoint
        let (mut su, mut sv) = (0.0, 0.0);
        for k in 0..60 {
            let b = dt * 0.5f64.powi(k);
            let a = 0.5 * b;
            let h = b - a;
            for (xq, wq) in GL_X.iter().zip(&GL_W) {
                let s = a + h * xq;
                let ph = s.powf(alpha) / gamma_a1;
                su += h * wq * ph * sin_over(w, dt - s);
                sv += h * wq * ph * (w * (dt - s)).cos();
            }
        }
        (su, sv)
    }
}

/// Raised when a field stops being finite.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Overflow;

/// Result of advancing the leapfrog state by one step, before acceptance.
#[derive(Debug, Clone)]
pub(crate) struct Candidate {
    pub t: f64,
    pub u_hat: Vec<Complex64>,
    pub v_hat: Vec<Complex64>,
    pub u: Vec<f64>,
    pub f: Vec<f64>,
    /// Ledger history at `t`, reused on acceptance.
    pub hist: Option<Vec<f64>>,
}

/// Leapfrog-with-memory integrator state: the linear part is the exact
/// propagator, the forcing is predicted by linear extrapolation of F and
/// corrected once.
#[derive(Debug, Clone)]
pub(crate) struct Leapfrog<'a> {
    problem: &'a Problem,
    kit: StepKit,
    pub t: f64,
    pub u_hat: Vec<Complex64>,
    pub v_hat: Vec<Complex64>,
    pub u: Vec<f64>,
    pub f: Vec<f64>,
    f_prev: Option<Vec<f64>>,
    g_hat: Vec<Complex64>,
    pub ledger: MemoryLedger,
}

impl<'a> Leapfrog<'a> {
    pub fn new(problem: &'a Problem, state: &WaveState, ledger: MemoryLedger, dt: f64) -> Result<Self> {
        let u = state.u.values().to_vec();
        let f = problem.power(&u);
        let mut ledger = ledger;
        if problem.forcing == ForcingModel::Memory {
            if ledger.is_empty() {
                ledger.push(state.t, f.clone())?;
            } else if ledger.last_time() != Some(state.t) {
                return Err(Error::contract("ledger does not end at the state time"));
            }
        }
        let g = match problem.forcing {
            ForcingModel::Memory => {
                let mut g = vec![0.0; u.len()];
                ledger.history_at(state.t, &mut g);
                g
            }
            _ => f.clone(),
        };
        let g_hat = problem.reduced_spectrum(&g, state.t);
        Ok(Self {
            problem,
            kit: StepKit::new(problem, dt),
            t: state.t,
            u_hat: state.u.spectrum().to_vec(),
            v_hat: state.v.spectrum().to_vec(),
            u,
            f,
            f_prev: None,
            g_hat,
            ledger,
        })
    }

    pub fn set_dt(&mut self, dt: f64) {
        if dt != self.kit.dt() {
            self.kit = StepKit::new(self.problem, dt);
        }
    }

    fn sweep(&self, kit: &StepKit, hist: Option<&[f64]>, t1: f64, f1: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let pr = self.problem;
        let g = pr.forcing_with(hist, self.t, &self.f, t1, f1);
        let g1 = pr.reduced_spectrum(&g, t1);
        let mut u = self.u_hat.clone();
        let mut v = self.v_hat.clone();
        kit.advance(pr, self.t, &mut u, &mut v, &self.g_hat, &g1);
        (u, v)
    }

    /// One predictor-corrector step of length `dt` (the kit is rebuilt when
    /// dt differs from the current step size).
    pub fn propose(&self, dt: f64) -> std::result::Result<Candidate, Overflow> {
        let owned;
        let kit = if dt == self.kit.dt() {
            &self.kit
        } else {
            owned = StepKit::new(self.problem, dt);
            &owned
        };
        let pr = self.problem;
        let grid = &pr.grid;
        let t1 = self.t + dt;
        let predicted: Vec<f64> = match &self.f_prev {
            Some(prev) => self.f.iter().zip(prev).map(|(a, b)| (2.0 * a - b).max(0.0)).collect(),
            None => self.f.clone(),
        };
        // the ledger is fixed during the step: one history sum serves all stages
        let hist = pr.history(&self.ledger, t1);
        let (u_star, _) = self.sweep(kit, hist.as_deref(), t1, &predicted);
        let f_star = pr.power(&grid.to_values(&u_star));
        let (u_hat, v_hat) = self.sweep(kit, hist.as_deref(), t1, &f_star);
        let u = grid.to_values(&u_hat);
        if u.iter().any(|x| !x.is_finite()) || v_hat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Overflow);
        }
        let f = pr.power(&u);
        if f.iter().any(|x| !x.is_finite()) {
            return Err(Overflow);
        }
        Ok(Candidate { t: t1, u_hat, v_hat, u, f, hist })
    }

    pub fn accept(&mut self, c: Candidate) -> Result<()> {
        let pr = self.problem;
        let g = pr.forcing_with(c.hist.as_deref(), self.t, &self.f, c.t, &c.f);
        self.g_hat = pr.reduced_spectrum(&g, c.t);
        if pr.forcing == ForcingModel::Memory {
            self.ledger.push(c.t, c.f.clone())?;
        }
        self.f_prev = Some(std::mem::replace(&mut self.f, c.f));
        self.t = c.t;
        self.u_hat = c.u_hat;
        self.v_hat = c.v_hat;
        self.u = c.u;
        Ok(())
    }

    pub fn state(&self) -> WaveState {
        let grid = &self.problem.grid;
        WaveState {
            u: Field::from_spectrum(grid, &self.u_hat),
            v: Field::from_spectrum(grid, &self.v_hat),
            t: self.t,
        }
    }
}

/// One leapfrog step from `state`, appending the accepted snapshot to
/// `ledger` (which must end at `state.t`; an empty ledger is seeded with
/// |u(state.t)|^p). Without `f_prev` the predictor is constant in time.
pub fn step_leapfrog(
    problem: &Problem,
    state: &WaveState,
    ledger: &mut MemoryLedger,
    f_prev: Option<&[f64]>,
    dt: f64,
) -> Result<WaveState> {
    let mut lf = Leapfrog::new(problem, state, std::mem::replace(ledger, MemoryLedger::new(0.0, 0)), dt)?;
    lf.f_prev = f_prev.map(<[f64]>::to_vec);
    let out = lf.propose(dt).map_err(|_| Error::NumericalOverflow { t: state.t + dt });
    let c = match out {
        Ok(c) => c,
        Err(e) => {
            *ledger = lf.ledger;
            return Err(e);
        }
    };
    lf.accept(c)?;
    let next = lf.state();
    *ledger = lf.ledger;
    Ok(next)
}
