//! Windowed fixed-point iteration on the mild (Duhamel) formulation.
//!
//! On a window [t_s, t_s + T_win] every iterate is assembled directly as
//! u(t_k) = K̇(t_k−t_s)u_s + K(t_k−t_s)v_s + Σ_j R(t_k − t_{j+1}) d_j, with
//! rotations evaluated from closed-form trigonometry rather than by repeated
//! stepping. The memory integral keeps its lower limit at t = 0: the part
//! over [0, t_s] comes from the frozen ledger.

use num_complex::Complex64;

use super::config::{ForcingModel, PicardSettings};
use super::ledger::MemoryLedger;
use super::stepper::{Problem, StepKit};
use crate::error::{Error, Result};
use crate::fractional::interval_weights;
use crate::spectral::{SpatialGrid, WaveState};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const TABLE_BYTES_CAP: usize = 1 << 29;

/// Converged trajectory on one window (nodes after the start only).
#[derive(Debug, Clone)]
pub struct PicardWindow {
    pub times: Vec<f64>,
    pub u_hat: Vec<Vec<Complex64>>,
    pub v_hat: Vec<Vec<Complex64>>,
    pub u: Vec<Vec<f64>>,
    /// |u|^p at every node, ready for the ledger.
    pub f: Vec<Vec<f64>>,
    pub iterations: usize,
    /// Largest observed ratio of successive iterate differences.
    pub ratio: f64,
}

struct Rotations {
    cos: Vec<Vec<f64>>,
    sinc: Vec<Vec<f64>>,
    wsin: Vec<Vec<f64>>,
}

impl Rotations {
    fn new(grid: &SpatialGrid, h: f64, n: usize) -> Self {
        let mut r = Rotations { cos: Vec::new(), sinc: Vec::new(), wsin: Vec::new() };
        for m in 0..=n {
            let tau = m as f64 * h;
            let mut c = Vec::with_capacity(grid.len());
            let mut s = Vec::with_capacity(grid.len());
            let mut ws = Vec::with_capacity(grid.len());
            for &w in grid.omega() {
                let x = w * tau;
                c.push(x.cos());
                if w == 0.0 {
                    s.push(tau);
                    ws.push(0.0);
                } else {
                    s.push(x.sin() / w);
                    ws.push(w * x.sin());
                }
            }
            r.cos.push(c);
            r.sinc.push(s);
            r.wsin.push(ws);
        }
        r
    }

    /// (u, v) += R_m (a, b)
    fn add(&self, m: usize, a: &[Complex64], b: &[Complex64], u: &mut [Complex64], v: &mut [Complex64]) {
        let (c, s, ws) = (&self.cos[m], &self.sinc[m], &self.wsin[m]);
        for i in 0..u.len() {
            u[i] += a[i] * c[i] + b[i] * s[i];
            v[i] += b[i] * c[i] - a[i] * ws[i];
        }
    }
}

fn h1_sq(grid: &SpatialGrid, z: &[Complex64]) -> f64 {
    z.iter().zip(grid.omega()).map(|(a, w)| (1.0 + w * w) * a.norm_sqr()).sum()
}

/// Iterates the mild equation on [start.t, start.t + t_win] with steps of
/// at most `dt`. `ledger` must end at `start.t` for the memory forcing.
pub fn picard_window(
    problem: &Problem,
    start: &WaveState,
    ledger: &MemoryLedger,
    t_win: f64,
    dt: f64,
    settings: &PicardSettings,
) -> Result<PicardWindow> {
    if !(t_win > 0.0 && dt > 0.0) {
        return Err(Error::domain(format!("window {t_win} and step {dt} must be positive")));
    }
    let grid = problem.grid();
    let memory = problem.forcing() == ForcingModel::Memory;
    if memory && ledger.last_time() != Some(start.t) {
        return Err(Error::contract("ledger does not cover [0, start.t]"));
    }
    let n = ((t_win / dt) - 1e-9).ceil().max(1.0) as usize;
    let h = t_win / n as f64;
    let modes = grid.len();
    if 3 * (n + 1) * modes * 8 > TABLE_BYTES_CAP {
        return Err(Error::Resource(format!("Picard window of {n} steps on {modes} modes exceeds the table budget")));
    }
    let t_s = start.t;
    let times: Vec<f64> = (0..=n).map(|k| t_s + k as f64 * h).collect();
    let rot = Rotations::new(grid, h, n);
    let kit = StepKit::new(problem, h);
    let alpha = problem.alpha();
    let local_w: Vec<(f64, f64)> =
        (0..=n).map(|m| if m == 0 { (0.0, 0.0) } else { interval_weights(alpha, m as f64 * h, 0.0, h) }).collect();
    let hist: Vec<Vec<f64>> = if memory {
        times
            .iter()
            .map(|&t| {
                let mut out = vec![0.0; modes];
                ledger.history_at(t, &mut out);
                out
            })
            .collect()
    } else {
        Vec::new()
    };

    let u_s = start.u.spectrum();
    let v_s = start.v.spectrum();
    let free = |k: usize| {
        let mut u = vec![ZERO; modes];
        let mut v = vec![ZERO; modes];
        rot.add(k, u_s, v_s, &mut u, &mut v);
        (u, v)
    };
    let mut u_hat: Vec<Vec<Complex64>> = (0..=n).map(|k| free(k).0).collect();
    let mut v_hat: Vec<Vec<Complex64>>;
    let f_start = problem.power(start.u.values());

    let mut prev_diff = f64::NAN;
    let mut ratio: f64 = 0.0;
    let mut rising = 0;
    for it in 1..=settings.max_iters {
        let mut f = Vec::with_capacity(n + 1);
        f.push(f_start.clone());
        for z in u_hat.iter().skip(1) {
            let vals = grid.to_values(z);
            if vals.iter().any(|x| !x.is_finite()) {
                return Err(Error::NumericalOverflow { t: times[n] });
            }
            f.push(problem.power(&vals));
        }
        let g_hat: Vec<Vec<Complex64>> = (0..=n)
            .map(|k| {
                let g = match problem.forcing() {
                    ForcingModel::Off => vec![0.0; modes],
                    ForcingModel::Local => f[k].clone(),
                    ForcingModel::Memory => {
                        let mut g = hist[k].clone();
                        for j in 0..k {
                            let (wa, wb) = local_w[k - j];
                            for ((gi, a), b) in g.iter_mut().zip(&f[j]).zip(&f[j + 1]) {
                                *gi += wa * a + wb * b;
                            }
                        }
                        g
                    }
                };
                problem.reduced_spectrum(&g, times[k])
            })
            .collect();
        let increments: Vec<(Vec<Complex64>, Vec<Complex64>)> = (0..n)
            .map(|j| {
                let mut du = vec![ZERO; modes];
                let mut dv = vec![ZERO; modes];
                if problem.forcing() != ForcingModel::Off {
                    kit.table.add_forcing(&mut du, &mut dv, &g_hat[j], &g_hat[j + 1]);
                    if memory {
                        kit.add_startup(problem, times[j], &mut du, &mut dv);
                    }
                }
                (du, dv)
            })
            .collect();
        let mut num: f64 = 0.0;
        let mut den: f64 = 0.0;
        let mut new_u = Vec::with_capacity(n + 1);
        let mut new_v = Vec::with_capacity(n + 1);
        new_u.push(u_s.to_vec());
        new_v.push(v_s.to_vec());
        for k in 1..=n {
            let (mut u, mut v) = free(k);
            for (j, (du, dv)) in increments.iter().enumerate().take(k) {
                rot.add(k - 1 - j, du, dv, &mut u, &mut v);
            }
            let diff: Vec<Complex64> = u.iter().zip(&u_hat[k]).map(|(a, b)| a - b).collect();
            num = num.max(h1_sq(grid, &diff));
            den = den.max(h1_sq(grid, &u));
            new_u.push(u);
            new_v.push(v);
        }
        u_hat = new_u;
        v_hat = new_v;
        let diff = if den > 0.0 { (num / den).sqrt() } else { 0.0 };
        if !diff.is_finite() {
            return Err(Error::NumericalOverflow { t: times[n] });
        }
        if prev_diff.is_finite() && prev_diff > 1e3 * settings.tol {
            let r = diff / prev_diff;
            ratio = ratio.max(r);
            rising = if r >= 1.0 { rising + 1 } else { 0 };
            if rising >= 2 {
                return Err(Error::NonContraction { ratio: r, iterations: it });
            }
        }
        if diff <= settings.tol {
            let u: Vec<Vec<f64>> = u_hat.iter().skip(1).map(|z| grid.to_values(z)).collect();
            let f = u.iter().map(|x| problem.power(x)).collect();
            return Ok(PicardWindow {
                times: times[1..].to_vec(),
                u_hat: u_hat.split_off(1),
                v_hat: v_hat.split_off(1),
                u,
                f,
                iterations: it,
                ratio,
            });
        }
        prev_diff = diff;
    }
    Err(Error::NonContraction { ratio: ratio.max(1.0), iterations: settings.max_iters })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::ProblemParams;
    use crate::solver::stepper::Leapfrog;
    use crate::spectral::{make_grid, Field};

    fn setup(amp: f64) -> (Problem, WaveState) {
        let g = make_grid(1, 64, 20.0).unwrap();
        let u0 = Field::from_fn(&g, |x| amp * (-x[0] * x[0]).exp());
        let pr = Problem::new(&g, &ProblemParams { n: 1, gamma: 0.5, p: 2.0 }, ForcingModel::Memory, &u0).unwrap();
        let s = WaveState::new(u0, Field::zeros(&g), 0.0).unwrap();
        (pr, s)
    }

    #[test]
    fn zero_data_converges_in_one_iteration() {
        let (pr, s) = setup(0.0);
        let mut ledger = MemoryLedger::new(pr.alpha(), s.grid().len());
        ledger.push(0.0, vec![0.0; s.grid().len()]).unwrap();
        let w = picard_window(&pr, &s, &ledger, 0.5, 0.01, &PicardSettings::default()).unwrap();
        assert_eq!(w.iterations, 1);
        assert!(w.u.iter().flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn agrees_with_leapfrog_on_small_data() {
        let (pr, s) = setup(0.5);
        let mut ledger = MemoryLedger::new(pr.alpha(), s.grid().len());
        ledger.push(0.0, pr.power(s.u.values())).unwrap();
        let dt = 0.01;
        let w = picard_window(&pr, &s, &ledger, 0.5, dt, &PicardSettings::default()).unwrap();
        assert!(w.ratio < 0.5, "ratio {}", w.ratio);
        let mut lf = Leapfrog::new(&pr, &s, MemoryLedger::new(pr.alpha(), s.grid().len()), dt).unwrap();
        for k in 0..50 {
            let c = lf.propose(dt).unwrap();
            lf.accept(c).unwrap();
            let d: f64 = lf.u.iter().zip(&w.u[k]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(d < 1e-5, "step {k}: {d}");
        }
    }

    #[test]
    fn large_windows_fail_to_contract_and_halving_helps() {
        let (pr, s) = setup(100.0);
        let mut ledger = MemoryLedger::new(pr.alpha(), s.grid().len());
        ledger.push(0.0, pr.power(s.u.values())).unwrap();
        let settings = PicardSettings { window: 2.0, max_iters: 40, tol: 1e-10 };
        let big = picard_window(&pr, &s, &ledger, 2.0, 0.01, &settings);
        assert!(matches!(big, Err(Error::NonContraction { .. }) | Err(Error::NumericalOverflow { .. })), "{big:?}");
        let small = picard_window(&pr, &s, &ledger, 0.05, 0.01, &settings).unwrap();
        assert!(small.ratio < 1.0);
    }
}
