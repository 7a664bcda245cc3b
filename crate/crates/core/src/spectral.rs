//! Periodic-box pseudospectral fields and exact per-mode wave propagation.
//!
//! Grid points sit at x_i = −L/2 + i·h on every axis, so the box is centred at
//! the origin. Transforms are unnormalised forward DFTs; the inverse divides by
//! M^N. Norms carry the L^N/M^{2N} Parseval factor so they approximate the
//! continuum integrals.

use std::fmt;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{ConfigIssue, Error, Result};

/// Environment variable overriding the grid memory budget (bytes).
pub const MEM_CAP_ENV: &str = "MEMWAVE_MEM_CAP_BYTES";
pub const DEFAULT_MEM_CAP_BYTES: u64 = 1 << 30;
/// Working-set estimate per grid point: a handful of real and complex arrays.
pub const BYTES_PER_POINT: u64 = 128;

pub fn memory_cap_bytes() -> u64 {
    std::env::var(MEM_CAP_ENV)
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(DEFAULT_MEM_CAP_BYTES)
}

struct GridInner {
    dim: usize,
    m: usize,
    l: f64,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    omega: Vec<f64>,
    dealias: Vec<bool>,
    tail: Vec<bool>,
}

/// Periodic N-dimensional box with M points per axis. Cheap to clone.
#[derive(Clone)]
pub struct SpatialGrid {
    inner: Arc<GridInner>,
}

impl fmt::Debug for SpatialGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpatialGrid")
            .field("dim", &self.inner.dim)
            .field("m", &self.inner.m)
            .field("l", &self.inner.l)
            .finish()
    }
}

impl PartialEq for SpatialGrid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.dim == other.inner.dim && self.inner.m == other.inner.m && self.inner.l == other.inner.l)
    }
}

/// Builds a grid under the memory budget from [`memory_cap_bytes`].
pub fn make_grid(dim: usize, m: usize, l: f64) -> Result<SpatialGrid> {
    SpatialGrid::with_cap(dim, m, l, memory_cap_bytes())
}

impl SpatialGrid {
    pub fn new(dim: usize, m: usize, l: f64) -> Result<Self> {
        make_grid(dim, m, l)
    }

    pub fn with_cap(dim: usize, m: usize, l: f64, cap_bytes: u64) -> Result<Self> {
        let mut issues = Vec::new();
        if !(1..=3).contains(&dim) {
            issues.push(ConfigIssue { path: "grid.N".into(), message: format!("dimension must be 1, 2 or 3, got {dim}") });
        }
        if m < 8 || !m.is_power_of_two() {
            issues.push(ConfigIssue { path: "grid.M".into(), message: format!("points per axis must be a power of two >= 8, got {m}") });
        }
        if !(l > 0.0 && l.is_finite()) {
            issues.push(ConfigIssue { path: "grid.L".into(), message: format!("box length must be positive, got {l}") });
        }
        if !issues.is_empty() {
            return Err(Error::Configuration(issues));
        }
        let points = (m as u64).checked_pow(dim as u32).unwrap_or(u64::MAX);
        let estimate = points.saturating_mul(BYTES_PER_POINT);
        if estimate > cap_bytes {
            return Err(Error::Resource(format!(
                "grid {m}^{dim} needs about {estimate} bytes, above the cap of {cap_bytes} bytes (set {MEM_CAP_ENV} to raise it)"
            )));
        }
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(m);
        let ifft = planner.plan_fft_inverse(m);
        let n_pts = points as usize;
        let dk = 2.0 * std::f64::consts::PI / l;
        let mut omega = Vec::with_capacity(n_pts);
        let mut dealias = Vec::with_capacity(n_pts);
        let mut tail = Vec::with_capacity(n_pts);
        let keep = (m / 3) as i64;
        let quarter = (m / 4) as i64;
        for idx in 0..n_pts {
            let mut k2 = 0.0;
            let mut inf = 0i64;
            let mut rest = idx;
            for _ in 0..dim {
                let j = rest % m;
                rest /= m;
                let md = signed_mode(j, m);
                k2 += (dk * md as f64).powi(2);
                inf = inf.max(md.abs());
            }
            omega.push(k2.sqrt());
            dealias.push(inf <= keep);
            tail.push(inf > quarter);
        }
        Ok(Self { inner: Arc::new(GridInner { dim, m, l, fft, ifft, omega, dealias, tail }) })
    }

    pub fn dim(&self) -> usize {
        self.inner.dim
    }

    pub fn points_per_dim(&self) -> usize {
        self.inner.m
    }

    pub fn len(&self) -> usize {
        self.inner.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn length(&self) -> f64 {
        self.inner.l
    }

    pub fn spacing(&self) -> f64 {
        self.inner.l / self.inner.m as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.inner.dim as i32)
    }

    /// L^N / M^{2N}: turns Σ|û|² into ∫|u|² dx.
    pub fn parseval_factor(&self) -> f64 {
        let (l, m, d) = (self.inner.l, self.inner.m as f64, self.inner.dim as i32);
        l.powi(d) / m.powi(2 * d)
    }

    /// Wave number 2πm/L of FFT index j along one axis, m ∈ [−M/2, M/2).
    pub fn wave_number(&self, j: usize) -> f64 {
        2.0 * std::f64::consts::PI * signed_mode(j, self.inner.m) as f64 / self.inner.l
    }

    /// |k| for every mode, in storage order.
    pub fn omega(&self) -> &[f64] {
        &self.inner.omega
    }

    /// Modes kept by the two-thirds rule (|m_d| ≤ M/3 on every axis).
    pub fn dealias_mask(&self) -> &[bool] {
        &self.inner.dealias
    }

    /// Modes with |m|_∞ > M/4, used to monitor resolution.
    pub fn tail_mask(&self) -> &[bool] {
        &self.inner.tail
    }

    /// Coordinates of the point with flat index `idx` (axis 0 varies fastest).
    pub fn coords(&self, idx: usize) -> [f64; 3] {
        let (m, h, l) = (self.inner.m, self.spacing(), self.inner.l);
        let mut x = [0.0; 3];
        let mut rest = idx;
        for xd in x.iter_mut().take(self.inner.dim) {
            *xd = -0.5 * l + (rest % m) as f64 * h;
            rest /= m;
        }
        x
    }

    pub fn radius(&self, idx: usize) -> f64 {
        let x = self.coords(idx);
        (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
    }

    /// In-place unnormalised forward transform.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inner.fft);
    }

    /// In-place inverse transform including the 1/M^N factor.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inner.ifft);
        let s = 1.0 / self.len() as f64;
        for z in data.iter_mut() {
            *z *= s;
        }
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let m = self.inner.m;
        assert_eq!(data.len(), self.len(), "array does not match the grid");
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        // axis 0 is contiguous
        for line in data.chunks_exact_mut(m) {
            plan.process_with_scratch(line, &mut scratch);
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        for axis in 1..self.inner.dim {
            let stride = m.pow(axis as u32);
            let block = stride * m;
            for base in (0..data.len()).step_by(block) {
                for off in 0..stride {
                    let start = base + off;
                    for (i, b) in buf.iter_mut().enumerate() {
                        *b = data[start + i * stride];
                    }
                    plan.process_with_scratch(&mut buf, &mut scratch);
                    for (i, b) in buf.iter().enumerate() {
                        data[start + i * stride] = *b;
                    }
                }
            }
        }
    }

    pub fn to_spectrum(&self, values: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut data);
        data
    }

    pub fn to_values(&self, spectrum: &[Complex64]) -> Vec<f64> {
        let mut data = spectrum.to_vec();
        self.inverse(&mut data);
        data.iter().map(|z| z.re).collect()
    }

    /// Zeroes modes outside the two-thirds band.
    pub fn dealias(&self, spectrum: &mut [Complex64]) {
        for (z, &keep) in spectrum.iter_mut().zip(self.dealias_mask()) {
            if !keep {
                *z = Complex64::new(0.0, 0.0);
            }
        }
    }
}

fn signed_mode(j: usize, m: usize) -> i64 {
    if j < m / 2 {
        j as i64
    } else {
        j as i64 - m as i64
    }
}

/// A real scalar field on a grid with a lazily computed spectrum.
#[derive(Clone)]
pub struct Field {
    grid: SpatialGrid,
    values: Vec<f64>,
    spectrum: OnceLock<Vec<Complex64>>,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field").field("grid", &self.grid).field("len", &self.values.len()).finish()
    }
}

impl Field {
    pub fn new(grid: &SpatialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::contract(format!(
                "field has {} values but the grid has {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid: grid.clone(), values, spectrum: OnceLock::new() })
    }

    pub fn zeros(grid: &SpatialGrid) -> Self {
        Self { grid: grid.clone(), values: vec![0.0; grid.len()], spectrum: OnceLock::new() }
    }

    /// Samples `f(x)` with x the point coordinates (unused axes are 0).
    pub fn from_fn(grid: &SpatialGrid, f: impl Fn(&[f64; 3]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.coords(i))).collect();
        Self { grid: grid.clone(), values, spectrum: OnceLock::new() }
    }

    /// Real part of the inverse transform of `spectrum`.
    pub fn from_spectrum(grid: &SpatialGrid, spectrum: &[Complex64]) -> Self {
        Self { grid: grid.clone(), values: grid.to_values(spectrum), spectrum: OnceLock::new() }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn spectrum(&self) -> &[Complex64] {
        self.spectrum.get_or_init(|| self.grid.to_spectrum(&self.values))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// ∫ f dx by the (spectrally exact) rectangle rule.
    pub fn integral(&self) -> f64 {
        self.grid.cell_volume() * self.values.iter().sum::<f64>()
    }
}

/// (u, u_t) at time t.
#[derive(Debug, Clone)]
pub struct WaveState {
    pub u: Field,
    pub v: Field,
    pub t: f64,
}

impl WaveState {
    pub fn new(u: Field, v: Field, t: f64) -> Result<Self> {
        if u.grid != v.grid {
            return Err(Error::contract("u and u_t live on different grids"));
        }
        Ok(Self { u, v, t })
    }

    pub fn grid(&self) -> &SpatialGrid {
        self.u.grid()
    }
}

/// Σ_k (−1)^k x^{2k}/(2k+offset)!, the entire functions behind sin x/x,
/// (1−cos x)/x² and (x−sin x)/x³.
fn even_series(x: f64, offset: u32) -> f64 {
    let x2 = x * x;
    let mut fact = (1..=offset as u64).product::<u64>() as f64;
    let mut term = 1.0 / fact;
    let mut sum = term;
    let mut n = offset as f64;
    for _ in 0..20 {
        let next = n + 2.0;
        fact = (n + 1.0) * next;
        term *= -x2 / fact;
        sum += term;
        n = next;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// sin x / x
fn s1(x: f64) -> f64 {
    if x.abs() < 0.5 {
        even_series(x, 1)
    } else {
        x.sin() / x
    }
}

/// (1 − cos x)/x²
fn c2(x: f64) -> f64 {
    if x.abs() < 0.5 {
        even_series(x, 2)
    } else {
        let s = (0.5 * x).sin();
        2.0 * s * s / (x * x)
    }
}

/// (x − sin x)/x³
fn s3(x: f64) -> f64 {
    if x.abs() < 0.5 {
        even_series(x, 3)
    } else {
        (x - x.sin()) / (x * x * x)
    }
}

/// Per-mode multipliers of one step of length dt: the homogeneous rotation
/// and the Duhamel integrals for forcing linear in time over the step.
#[derive(Debug, Clone)]
pub struct StepTable {
    pub dt: f64,
    pub cos: Vec<f64>,
    /// sin(ω dt)/ω
    pub sinc: Vec<f64>,
    /// ω sin(ω dt)
    pub wsin: Vec<f64>,
    /// ∫ K(dt−s)(1−s/dt) ds and ∫ K(dt−s) s/dt ds
    pub du_start: Vec<f64>,
    pub du_end: Vec<f64>,
    /// the same with K̇ = cos
    pub dv_start: Vec<f64>,
    pub dv_end: Vec<f64>,
}

impl StepTable {
    pub fn new(grid: &SpatialGrid, dt: f64) -> Self {
        let n = grid.len();
        let mut t = StepTable {
            dt,
            cos: Vec::with_capacity(n),
            sinc: Vec::with_capacity(n),
            wsin: Vec::with_capacity(n),
            du_start: Vec::with_capacity(n),
            du_end: Vec::with_capacity(n),
            dv_start: Vec::with_capacity(n),
            dv_end: Vec::with_capacity(n),
        };
        for &w in grid.omega() {
            let x = w * dt;
            let (sx, cx, tx) = (s1(x), c2(x), s3(x));
            t.cos.push(x.cos());
            t.sinc.push(dt * sx);
            t.wsin.push(w * w * dt * sx);
            t.du_start.push(dt * dt * (cx - tx));
            t.du_end.push(dt * dt * tx);
            t.dv_start.push(dt * (sx - cx));
            t.dv_end.push(dt * cx);
        }
        t
    }

    /// Homogeneous rotation of (û, v̂) in place.
    pub fn rotate(&self, u: &mut [Complex64], v: &mut [Complex64]) {
        for i in 0..u.len() {
            let (uo, vo) = (u[i], v[i]);
            u[i] = uo * self.cos[i] + vo * self.sinc[i];
            v[i] = vo * self.cos[i] - uo * self.wsin[i];
        }
    }

    /// Adds the Duhamel contribution of forcing ĝ linear between `g0` and `g1`.
    pub fn add_forcing(&self, u: &mut [Complex64], v: &mut [Complex64], g0: &[Complex64], g1: &[Complex64]) {
        for i in 0..u.len() {
            u[i] += g0[i] * self.du_start[i] + g1[i] * self.du_end[i];
            v[i] += g0[i] * self.dv_start[i] + g1[i] * self.dv_end[i];
        }
    }
}

/// Exact homogeneous evolution over dt (any sign).
pub fn propagate_linear(state: &WaveState, dt: f64) -> WaveState {
    let grid = state.grid();
    let table = StepTable::new(grid, dt);
    let mut u = state.u.spectrum().to_vec();
    let mut v = state.v.spectrum().to_vec();
    table.rotate(&mut u, &mut v);
    WaveState { u: Field::from_spectrum(grid, &u), v: Field::from_spectrum(grid, &v), t: state.t + dt }
}

/// Exact per-mode integrals ∫₀^dt K(dt−s) f̂(s) ds and ∫₀^dt K̇(dt−s) f̂(s) ds for
/// f̂ linear between `f_start` and `f_end`.
pub fn duhamel_increment(f_start: &Field, f_end: &Field, dt: f64) -> Result<(Field, Field)> {
    if f_start.grid != f_end.grid {
        return Err(Error::contract("forcing fields live on different grids"));
    }
    let grid = f_start.grid();
    let table = StepTable::new(grid, dt);
    let zero = Complex64::new(0.0, 0.0);
    let mut du = vec![zero; grid.len()];
    let mut dv = vec![zero; grid.len()];
    table.add_forcing(&mut du, &mut dv, f_start.spectrum(), f_end.spectrum());
    Ok((Field::from_spectrum(grid, &du), Field::from_spectrum(grid, &dv)))
}

pub(crate) fn weighted_sq(spectrum: &[Complex64], weights: impl Iterator<Item = f64>) -> f64 {
    spectrum.iter().zip(weights).map(|(z, w)| w * z.norm_sqr()).sum()
}

/// ½(‖v‖² + ‖∇u‖²) from spectra.
pub fn energy_from_spectra(grid: &SpatialGrid, u: &[Complex64], v: &[Complex64]) -> f64 {
    let gu = weighted_sq(u, grid.omega().iter().map(|w| w * w));
    let gv = weighted_sq(v, std::iter::repeat(1.0));
    0.5 * grid.parseval_factor() * (gu + gv)
}

pub fn energy(state: &WaveState) -> f64 {
    energy_from_spectra(state.grid(), state.u.spectrum(), state.v.spectrum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub l2: f64,
    pub h1: f64,
    pub linf: f64,
}

/// (‖u‖_{L²}, ‖u‖_{H¹}, ‖u‖_{L∞}) with H¹ weight 1 + |k|².
pub fn sobolev_norms(state: &WaveState) -> Norms {
    field_norms(&state.u)
}

pub fn field_norms(u: &Field) -> Norms {
    let grid = u.grid();
    let pf = grid.parseval_factor();
    let s = u.spectrum();
    let l2 = (pf * weighted_sq(s, std::iter::repeat(1.0))).sqrt();
    let h1 = (pf * weighted_sq(s, grid.omega().iter().map(|w| 1.0 + w * w))).sqrt();
    Norms { l2, h1, linf: u.max_abs() }
}

/// Fraction of the H¹ mass of û carried by modes with |m|_∞ > M/4.
pub fn tail_fraction(grid: &SpatialGrid, spectrum: &[Complex64]) -> f64 {
    let mut total = 0.0;
    let mut tail = 0.0;
    for ((z, w), &t) in spectrum.iter().zip(grid.omega()).zip(grid.tail_mask()) {
        let e = (1.0 + w * w) * z.norm_sqr();
        total += e;
        if t {
            tail += e;
        }
    }
    if total > 0.0 {
        tail / total
    } else {
        0.0
    }
}

/// Largest distance from the box centre among points with |f| > floor.
pub fn support_radius(f: &Field, floor: f64) -> f64 {
    let grid = f.grid();
    f.values()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.abs() > floor)
        .map(|(i, _)| grid.radius(i))
        .fold(0.0, f64::max)
}
