//! Reference integrator for the memoryless equation u_tt − Δu = |u|^p.
//!
//! Classical RK4 on the spectral system (û, v̂)' = (v̂, −|k|²û + 𝓕|u|^p). It
//! shares nothing with the exponential integrator beyond the transforms, so
//! it serves as an oracle for the α → 0 limit of the memory forcing.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{Field, SpatialGrid, WaveState};

fn rhs(grid: &SpatialGrid, p: f64, u: &[Complex64], v: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
    let vals = grid.to_values(u);
    let pw: Vec<f64> = vals.iter().map(|x| x.abs().powf(p)).collect();
    let mut f = grid.to_spectrum(&pw);
    grid.dealias(&mut f);
    let du = v.to_vec();
    let dv = u.iter().zip(grid.omega()).zip(&f).map(|((z, w), g)| g - z * (w * w)).collect();
    (du, dv)
}

fn axpy(a: &[Complex64], s: f64, b: &[Complex64]) -> Vec<Complex64> {
    a.iter().zip(b).map(|(x, y)| x + y * s).collect()
}

/// States at every multiple of dt up to t_end.
pub fn run_local_rk4(start: &WaveState, p: f64, dt: f64, t_end: f64) -> Result<Vec<WaveState>> {
    if !(dt > 0.0 && t_end > 0.0) {
        return Err(Error::domain("dt and t_end must be positive"));
    }
    let grid = start.grid().clone();
    let n = (t_end / dt).round().max(1.0) as usize;
    let mut u = start.u.spectrum().to_vec();
    let mut v = start.v.spectrum().to_vec();
    let mut out = Vec::with_capacity(n + 1);
    out.push(start.clone());
    for step in 1..=n {
        let (k1u, k1v) = rhs(&grid, p, &u, &v);
        let (k2u, k2v) = rhs(&grid, p, &axpy(&u, 0.5 * dt, &k1u), &axpy(&v, 0.5 * dt, &k1v));
        let (k3u, k3v) = rhs(&grid, p, &axpy(&u, 0.5 * dt, &k2u), &axpy(&v, 0.5 * dt, &k2v));
        let (k4u, k4v) = rhs(&grid, p, &axpy(&u, dt, &k3u), &axpy(&v, dt, &k3v));
        for i in 0..u.len() {
            u[i] += (k1u[i] + (k2u[i] + k3u[i]) * 2.0 + k4u[i]) * (dt / 6.0);
            v[i] += (k1v[i] + (k2v[i] + k3v[i]) * 2.0 + k4v[i]) * (dt / 6.0);
        }
        if u.iter().any(|z| !z.re.is_finite()) {
            return Err(Error::NumericalOverflow { t: start.t + step as f64 * dt });
        }
        out.push(WaveState {
            u: Field::from_spectrum(&grid, &u),
            v: Field::from_spectrum(&grid, &v),
            t: start.t + step as f64 * dt,
        });
    }
    Ok(out)
}
