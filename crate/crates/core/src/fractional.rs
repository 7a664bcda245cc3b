//! Riemann–Liouville fractional integrals and derivatives on uniform grids.
//!
//! The integral J^α uses product integration: the integrand is interpolated
//! piecewise-linearly and the kernel (t−s)^{α−1}/Γ(α) is integrated exactly on
//! every subinterval. Derivatives are D∘J^{1−α} with second-order differences.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::special::{binom, gamma, gamma_ratio};

/// The pair (γ, α = 1 − γ) governing the memory kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionalOrder {
    gamma: f64,
    alpha: f64,
}

impl FractionalOrder {
    pub fn from_gamma(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::domain(format!("gamma must lie in (0,1), got {gamma}")));
        }
        Ok(Self { gamma, alpha: 1.0 - gamma })
    }

    pub fn from_alpha(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::domain(format!("alpha must lie in (0,1), got {alpha}")));
        }
        Ok(Self { gamma: 1.0 - alpha, alpha })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// Uniform grid t_j = j·dt, j = 0..=n_steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    dt: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, n_steps: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::domain(format!("time step must be positive, got {dt}")));
        }
        if n_steps == 0 {
            return Err(Error::domain("time grid needs at least one step"));
        }
        Ok(Self { dt, n_steps })
    }

    /// `n_steps` equal steps covering [0, t_end].
    pub fn over(t_end: f64, n_steps: usize) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::domain("time grid needs at least one step"));
        }
        Self::new(t_end / n_steps as f64, n_steps)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of nodes, `n_steps + 1`.
    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node(&self, j: usize) -> f64 {
        j as f64 * self.dt
    }

    pub fn end(&self) -> f64 {
        self.node(self.n_steps)
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.node(j)).collect()
    }
}

/// Real values on the nodes of a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl SampledSignal {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::contract(format!(
                "signal has {} values but the grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.len()).map(|j| f(grid.node(j))).collect();
        Self { grid, values }
    }

    /// Builds a signal from explicit sample times, which must start at 0 and be
    /// uniformly spaced.
    pub fn from_samples(times: &[f64], values: Vec<f64>) -> Result<Self> {
        if times.len() < 2 || times.len() != values.len() {
            return Err(Error::contract("need at least two samples and one value per time"));
        }
        let n_steps = times.len() - 1;
        let dt = (times[n_steps] - times[0]) / n_steps as f64;
        let tol = 1e-9 * dt.abs().max(f64::MIN_POSITIVE);
        if times[0].abs() > tol {
            return Err(Error::contract(format!("time grid must start at 0, starts at {}", times[0])));
        }
        for (j, w) in times.windows(2).enumerate() {
            if ((w[1] - w[0]) - dt).abs() > tol.max(1e-12 * w[1].abs()) {
                return Err(Error::contract(format!(
                    "non-uniform time grid: step {j} has width {} instead of {dt}",
                    w[1] - w[0]
                )));
            }
        }
        Self::new(TimeGrid::new(dt, n_steps)?, values)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// Time reversal t ↦ T − t.
    pub fn reversed(&self) -> Self {
        let mut values = self.values.clone();
        values.reverse();
        Self { grid: self.grid, values }
    }

    /// Pointwise `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        same_grid(self, other)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        Ok(Self { grid: self.grid, values })
    }
}

fn same_grid(f: &SampledSignal, g: &SampledSignal) -> Result<()> {
    let (a, b) = (f.grid, g.grid);
    if a.n_steps != b.n_steps || (a.dt - b.dt).abs() > 1e-12 * a.dt {
        return Err(Error::contract("signals live on different time grids"));
    }
    Ok(())
}

/// Product-integration weights b_{n,j} of J^μ on a uniform grid, for any
/// order μ > 0. Row n gives J^μ f(t_n) ≈ Σ_{j≤n} b_{n,j} f(t_j).
///
/// With a = μ + 1 and scale dt^μ/Γ(μ+2):
/// b_{n,0} = scale·((n−1)^a − (n−1−μ)n^μ), b_{n,j} = scale·c_{n−j} for j ≥ 1,
/// c_0 = 1 and c_k = (k+1)^a − 2k^a + (k−1)^a.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureWeights {
    order: f64,
    dt: f64,
    scale: f64,
    interior: Vec<f64>,
    endpoint: Vec<f64>,
}

impl QuadratureWeights {
    pub fn new(order: f64, grid: &TimeGrid) -> Result<Self> {
        Self::with_steps(order, grid.dt(), grid.n_steps())
    }

    pub fn with_steps(order: f64, dt: f64, n_max: usize) -> Result<Self> {
        if !(order > 0.0 && order.is_finite()) {
            return Err(Error::domain(format!("integration order must be positive, got {order}")));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::domain(format!("time step must be positive, got {dt}")));
        }
        let scale = dt.powf(order) / gamma(order + 2.0);
        let mut w = Self { order, dt, scale, interior: vec![1.0], endpoint: vec![0.0] };
        w.ensure(n_max);
        Ok(w)
    }

    /// Extends the tables so rows up to `n_max` are available.
    pub fn ensure(&mut self, n_max: usize) {
        for k in self.interior.len()..=n_max {
            self.interior.push(second_difference_power(self.order + 1.0, k));
        }
        for n in self.endpoint.len()..=n_max {
            self.endpoint.push(endpoint_moment(self.order, n));
        }
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Largest row index currently tabulated.
    pub fn max_row(&self) -> usize {
        self.interior.len() - 1
    }

    /// Weight of node j in row n (0 when j > n).
    pub fn weight(&self, n: usize, j: usize) -> f64 {
        if n == 0 || j > n {
            0.0
        } else if j == 0 {
            self.scale * self.endpoint[n]
        } else {
            self.scale * self.interior[n - j]
        }
    }

    /// All weights of row n.
    pub fn row(&self, n: usize) -> Vec<f64> {
        (0..=n).map(|j| self.weight(n, j)).collect()
    }

    /// Σ_{j≤n} b_{n,j}·values[j].
    pub fn apply(&self, values: &[f64], n: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        let mut acc = self.endpoint[n] * values[0];
        for j in 1..=n {
            acc += self.interior[n - j] * values[j];
        }
        self.scale * acc
    }
}

const SERIES_SWITCH: usize = 64;

/// (k+1)^a − 2k^a + (k−1)^a, with a cancellation-free series for large k.
fn second_difference_power(a: f64, k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let kf = k as f64;
    if k < SERIES_SWITCH {
        return (kf + 1.0).powf(a) - 2.0 * kf.powf(a) + (kf - 1.0).powf(a);
    }
    let x2 = 1.0 / (kf * kf);
    let mut sum = 0.0;
    let mut xp = x2;
    for m in 1..=6 {
        sum += binom(a, 2 * m) * xp;
        xp *= x2;
    }
    2.0 * kf.powf(a) * sum
}

/// (n−1)^{μ+1} − (n−1−μ)n^μ, with the large-n expansion
/// n^{μ−1} Σ_{k≥2} (−1)^k C(μ+1,k) n^{2−k}.
fn endpoint_moment(mu: f64, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let nf = n as f64;
    if n < SERIES_SWITCH {
        return (nf - 1.0).powf(mu + 1.0) - (nf - 1.0 - mu) * nf.powf(mu);
    }
    let mut sum = 0.0;
    let mut np = 1.0;
    for k in 2..=10 {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * binom(mu + 1.0, k) * np;
        np /= nf;
    }
    nf.powf(mu - 1.0) * sum
}

/// Weights (w_a, w_b) such that
/// Γ(μ)⁻¹∫_a^b (t−s)^{μ−1} f̃(s) ds = w_a f(a) + w_b f(b)
/// for f̃ the linear interpolant of f on [a, b] and t ≥ b.
pub fn interval_weights(order: f64, t: f64, a: f64, b: f64) -> (f64, f64) {
    let h = b - a;
    let big_a = t - a;
    let big_b = (t - b).max(0.0);
    let q = h / big_a;
    let g = gamma(order);
    if q <= 0.1 {
        // Σ_k C(μ−1,k)(−q)^k/((k+1)(k+2)) and Σ_k C(μ−1,k)(−q)^k/(k+2)
        let mut sa = 0.0;
        let mut sb = 0.0;
        let mut qk = 1.0;
        for k in 0..24 {
            let c = binom(order - 1.0, k) * qk;
            let kf = k as f64;
            sa += c / ((kf + 1.0) * (kf + 2.0));
            sb += c / (kf + 2.0);
            qk *= -q;
        }
        let pre = big_a.powf(order - 1.0) * h / g;
        (pre * sa, pre * sb)
    } else {
        let i0 = (big_a.powf(order) - big_b.powf(order)) / order;
        let i1 = (big_a.powf(order + 1.0) - big_b.powf(order + 1.0)) / (order + 1.0);
        ((i1 - big_b * i0) / (h * g), (big_a * i0 - i1) / (h * g))
    }
}

fn check_alpha_closed(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::domain(format!("alpha must lie in (0,1], got {alpha}")));
    }
    Ok(())
}

fn check_alpha_open(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha must lie in (0,1), got {alpha}")));
    }
    Ok(())
}

/// J^α f on the grid of `f`, α ∈ (0, 1]. At α = 1 this is the cumulative
/// trapezoid rule.
pub fn rl_integral(f: &SampledSignal, alpha: f64) -> Result<SampledSignal> {
    check_alpha_closed(alpha)?;
    let w = QuadratureWeights::new(alpha, f.grid())?;
    let values = (0..f.len()).map(|n| w.apply(f.values(), n)).collect();
    Ok(SampledSignal { grid: f.grid, values })
}

/// Second-order finite-difference derivative (one-sided at the ends).
pub(crate) fn differentiate(v: &[f64], dt: f64) -> Vec<f64> {
    let n = v.len();
    debug_assert!(n >= 3);
    let mut d = vec![0.0; n];
    d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dt);
    for i in 1..n - 1 {
        d[i] = (v[i + 1] - v[i - 1]) / (2.0 * dt);
    }
    d[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * dt);
    d
}

fn need_three_nodes(f: &SampledSignal) -> Result<()> {
    if f.len() < 3 {
        return Err(Error::InsufficientResolution(format!(
            "fractional derivative needs at least 3 nodes, got {}",
            f.len()
        )));
    }
    Ok(())
}

/// Left Riemann–Liouville derivative D^α_{0|t} f = D J^{1−α} f.
///
/// Signals of the form J^α h with h(0) ≠ 0 start like b·t^α, which the
/// piecewise-linear rule cannot resolve on the first few cells (an O(1) error
/// there at every dt). That mode is fitted through the first node and
/// differentiated exactly, D^α t^α = Γ(α+1); the remainder goes through the
/// numerical path.
pub fn rl_deriv_left(f: &SampledSignal, alpha: f64) -> Result<SampledSignal> {
    check_alpha_open(alpha)?;
    need_three_nodes(f)?;
    let t1 = f.grid.dt;
    let b = (f.values[1] - f.values[0]) / t1.powf(alpha);
    let rest = f.combine(1.0, &SampledSignal::from_fn(f.grid, |t| t.powf(alpha)), -b)?;
    let j = rl_integral(&rest, 1.0 - alpha)?;
    let exact = b * gamma(alpha + 1.0);
    let values = differentiate(&j.values, f.grid.dt).into_iter().map(|d| d + exact).collect();
    Ok(SampledSignal { grid: f.grid, values })
}

/// Right Riemann–Liouville derivative D^α_{t|T} g = −D J^{1−α}_{t|T} g, where
/// `t_final` must be the last grid node.
pub fn rl_deriv_right(g: &SampledSignal, alpha: f64, t_final: f64) -> Result<SampledSignal> {
    check_alpha_open(alpha)?;
    need_three_nodes(g)?;
    let end = g.grid.end();
    if (end - t_final).abs() > 1e-9 * t_final.abs().max(end) {
        return Err(Error::contract(format!("grid ends at {end}, expected final time {t_final}")));
    }
    Ok(rl_deriv_left(&g.reversed(), alpha)?.reversed())
}

/// Γ-ratio prefactor of D^{α+level}_{t|T} w₁ for w₁(t) = (1 − t/T)^σ:
/// (1−α+σ)Γ(σ+1)/Γ(2−α+σ) · Π_{i<level}(σ−α−i).
pub fn w1_prefactor(sigma: f64, alpha: f64, level: u8) -> f64 {
    let mut c = (1.0 - alpha + sigma) * gamma_ratio(sigma + 1.0, 2.0 - alpha + sigma);
    for i in 0..level {
        c *= sigma - alpha - i as f64;
    }
    c
}

fn check_w1(sigma: f64, alpha: f64, t_final: f64, level: u8) -> Result<()> {
    check_alpha_open(alpha)?;
    if level > 2 {
        return Err(Error::domain(format!("level must be 0, 1 or 2, got {level}")));
    }
    if !(sigma > alpha + level as f64) {
        return Err(Error::domain(format!(
            "sigma = {sigma} must exceed alpha + level = {}",
            alpha + level as f64
        )));
    }
    if !(t_final > 0.0) {
        return Err(Error::domain(format!("final time must be positive, got {t_final}")));
    }
    Ok(())
}

/// Closed form of D^{α+level}_{t|T} w₁ at a single time (zero for t ≥ T).
pub fn w1_right_deriv_at(sigma: f64, alpha: f64, t_final: f64, level: u8, t: f64) -> Result<f64> {
    check_w1(sigma, alpha, t_final, level)?;
    Ok(w1_value(sigma, alpha, t_final, level, t))
}

fn w1_value(sigma: f64, alpha: f64, t_final: f64, level: u8, t: f64) -> f64 {
    let gap = (t_final - t).max(0.0);
    if gap == 0.0 {
        return 0.0;
    }
    let expo = sigma - alpha - level as f64;
    w1_prefactor(sigma, alpha, level) * (expo * gap.ln() - sigma * t_final.ln()).exp()
}

/// Closed form of D^{α+level}_{t|T} w₁ sampled on `grid`, which must end at T.
pub fn w1_right_derivs(
    sigma: f64,
    alpha: f64,
    t_final: f64,
    level: u8,
    grid: &TimeGrid,
) -> Result<SampledSignal> {
    check_w1(sigma, alpha, t_final, level)?;
    let end = grid.end();
    if (end - t_final).abs() > 1e-9 * t_final {
        return Err(Error::contract(format!("grid ends at {end}, expected final time {t_final}")));
    }
    let mut s = SampledSignal::from_fn(*grid, |t| w1_value(sigma, alpha, t_final, level, t));
    // the last node is exactly T even if j·dt rounds differently
    *s.values.last_mut().unwrap() = 0.0;
    Ok(s)
}

pub(crate) fn trapezoid(values: &[f64], dt: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => dt * (values[1..n - 1].iter().sum::<f64>() + 0.5 * (values[0] + values[n - 1])),
    }
}

/// |∫₀^T (D^α_{0|t} f) g dt − ∫₀^T f (D^α_{t|T} g) dt| by the trapezoid rule.
pub fn integration_by_parts_residual(f: &SampledSignal, g: &SampledSignal, alpha: f64) -> Result<f64> {
    same_grid(f, g)?;
    let dt = f.grid.dt;
    let df = rl_deriv_left(f, alpha)?;
    let dg = rl_deriv_right(g, alpha, f.grid.end())?;
    let lhs: Vec<f64> = df.values.iter().zip(&g.values).map(|(a, b)| a * b).collect();
    let rhs: Vec<f64> = f.values.iter().zip(&dg.values).map(|(a, b)| a * b).collect();
    Ok((trapezoid(&lhs, dt) - trapezoid(&rhs, dt)).abs())
}

/// s^{α−1}/Γ(α).
pub fn rl_kernel(alpha: f64, s: f64) -> f64 {
    s.powf(alpha - 1.0) / gamma(alpha)
}

/// Sum-of-exponentials approximation Σ wᵢ e^{−λᵢ s} of s^{α−1}/Γ(α) on a lag
/// range [min_lag, horizon].
#[derive(Debug, Clone, PartialEq)]
pub struct SoeKernel {
    alpha: f64,
    terms: Vec<(f64, f64)>,
    achieved: f64,
    min_lag: f64,
    horizon: f64,
}

const SOE_MAX_TERMS: usize = 2000;

impl SoeKernel {
    /// (weight, rate) pairs.
    pub fn terms(&self) -> &[(f64, f64)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Largest relative error seen on the construction probe set.
    pub fn achieved_error(&self) -> f64 {
        self.achieved
    }

    pub fn lag_range(&self) -> (f64, f64) {
        (self.min_lag, self.horizon)
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.terms.iter().map(|&(w, lam)| w * (-lam * s).exp()).sum()
    }
}

/// Builds a [`SoeKernel`] from the integral representation
/// s^{α−1}/Γ(α) = (sin πα/π) ∫ exp((1−α)y − s·e^y) dy,
/// discretised by the trapezoid rule on a uniform y-lattice. The far-left part
/// of the lattice, where s·e^y is negligible on the whole lag range, is summed
/// geometrically into one rate-zero term. The lattice step is shrunk until the
/// relative error on a log-spaced probe set meets `rel_tol`.
pub fn soe_compress(alpha: f64, rel_tol: f64, min_lag: f64, horizon: f64) -> Result<SoeKernel> {
    soe_compress_capped(alpha, rel_tol, min_lag, horizon, SOE_MAX_TERMS)
}

/// [`soe_compress`] with an explicit cap on the number of terms.
pub fn soe_compress_capped(
    alpha: f64,
    rel_tol: f64,
    min_lag: f64,
    horizon: f64,
    max_terms: usize,
) -> Result<SoeKernel> {
    check_alpha_closed(alpha)?;
    if !(rel_tol > 1e-12 && rel_tol < 1e-2) {
        return Err(Error::domain(format!("rel_tol must lie in (1e-12, 1e-2), got {rel_tol}")));
    }
    if !(min_lag > 0.0 && horizon >= min_lag && horizon.is_finite()) {
        return Err(Error::domain(format!(
            "need 0 < min_lag <= horizon, got min_lag = {min_lag}, horizon = {horizon}"
        )));
    }
    if alpha == 1.0 {
        return Ok(SoeKernel { alpha, terms: vec![(1.0, 0.0)], achieved: 0.0, min_lag, horizon });
    }
    let target = 0.5 * rel_tol;
    let c = (PI * alpha).sin() / PI;
    let beta = 1.0 - alpha;
    let y_max = (((4.0 / target).ln() + 2.0) / min_lag).ln();
    let y_min = (target / (10.0 * horizon)).ln();
    let mut h = PI * PI / ((1.0 / target).ln() + 3.0);
    let mut best = f64::INFINITY;
    let mut best_terms = 0;
    loop {
        let mut k_max = ((y_max - y_min) / h).ceil() as usize;
        if k_max + 2 > max_terms {
            if best.is_finite() || max_terms < 3 {
                return Err(Error::ApproximationFailure { achieved: best, terms: best_terms });
            }
            // nothing fits yet: measure the widest lattice that does
            k_max = max_terms - 2;
            h = (y_max - y_min) / k_max as f64;
            best = f64::MAX;
        }
        let mut terms = Vec::with_capacity(k_max + 2);
        let q = (-beta * h).exp();
        terms.push((c * h * (beta * y_min).exp() * q / (1.0 - q), 0.0));
        for k in 0..=k_max {
            let y = y_min + k as f64 * h;
            terms.push((c * h * (beta * y).exp(), y.exp()));
        }
        let kernel = SoeKernel { alpha, terms, achieved: 0.0, min_lag, horizon };
        let err = probe_error(&kernel, h);
        if err < best {
            best = err;
            best_terms = kernel.len();
        }
        if err <= target {
            return Ok(SoeKernel { achieved: err, ..kernel });
        }
        h *= 0.8;
    }
}

fn probe_error(kernel: &SoeKernel, h: f64) -> f64 {
    let (lo, hi) = (kernel.min_lag.ln(), kernel.horizon.ln());
    let n = ((40.0 * (hi - lo) / h).ceil() as usize).max(400);
    let g = gamma(kernel.alpha);
    (0..=n)
        .map(|i| {
            let s = (lo + (hi - lo) * i as f64 / n as f64).exp();
            let exact = s.powf(kernel.alpha - 1.0) / g;
            (kernel.eval(s) / exact - 1.0).abs()
        })
        .fold(0.0, f64::max)
}

/// Integrals of e^{−λτ} against the two hat functions on one step of width h:
/// (∫₀ʰ e^{−λτ} τ/h dτ, ∫₀ʰ e^{−λτ}(1 − τ/h) dτ).
pub(crate) fn exp_hat_moments(lambda: f64, h: f64) -> (f64, f64) {
    let x = lambda * h;
    if x < 1e-3 {
        let a0 = h * (0.5 - x / 3.0 + x * x / 8.0 - x * x * x / 30.0);
        let e1 = h * (1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0);
        (a0, e1 - a0)
    } else {
        let a0 = h * (1.0 - (-x).exp() * (1.0 + x)) / (x * x);
        let e1 = h * (-(-x).exp_m1()) / x;
        (a0, e1 - a0)
    }
}

/// Recursive O(n·terms) evaluator of the product rule with the history part
/// of the kernel replaced by a [`SoeKernel`]. The newest subinterval always
/// uses the exact local weights.
#[derive(Debug, Clone)]
pub struct SoeHistory {
    alpha: f64,
    dt: f64,
    weights: Vec<f64>,
    decay: Vec<f64>,
    a_old: Vec<f64>,
    a_new: Vec<f64>,
    local_old: f64,
    local_new: f64,
}

impl SoeHistory {
    pub fn new(kernel: &SoeKernel, dt: f64) -> Self {
        let alpha = kernel.alpha;
        let mut weights = Vec::with_capacity(kernel.len());
        let mut decay = Vec::with_capacity(kernel.len());
        let mut a_old = Vec::with_capacity(kernel.len());
        let mut a_new = Vec::with_capacity(kernel.len());
        for &(w, lam) in kernel.terms() {
            let (a0, a1) = exp_hat_moments(lam, dt);
            weights.push(w);
            decay.push((-lam * dt).exp());
            a_old.push(a0);
            a_new.push(a1);
        }
        let scale = dt.powf(alpha) / gamma(alpha + 2.0);
        Self { alpha, dt, weights, decay, a_old, a_new, local_old: alpha * scale, local_new: scale }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn n_terms(&self) -> usize {
        self.weights.len()
    }

    /// J^α at t_{n+1} given the mode state Z(t_n), and samples f_n, f_{n+1}.
    pub fn evaluate(&self, z: &[f64], f_n: f64, f_next: f64) -> f64 {
        let hist: f64 = (0..z.len()).map(|i| self.weights[i] * self.decay[i] * z[i]).sum();
        hist + self.local_old * f_n + self.local_new * f_next
    }

    /// Advances Z(t_n) → Z(t_{n+1}).
    pub fn advance(&self, z: &mut [f64], f_n: f64, f_next: f64) {
        for i in 0..z.len() {
            z[i] = self.decay[i] * z[i] + self.a_old[i] * f_n + self.a_new[i] * f_next;
        }
    }
}

/// J^α f via the sum-of-exponentials history with relative kernel accuracy
/// `rel_tol` on lags [dt, T].
pub fn rl_integral_soe(f: &SampledSignal, alpha: f64, rel_tol: f64) -> Result<SampledSignal> {
    check_alpha_closed(alpha)?;
    let dt = f.grid.dt;
    let kernel = soe_compress(alpha, rel_tol, dt, f.grid.end().max(dt))?;
    let hist = SoeHistory::new(&kernel, dt);
    let mut z = vec![0.0; hist.n_terms()];
    let v = &f.values;
    let mut out = vec![0.0; v.len()];
    for n in 0..v.len() - 1 {
        out[n + 1] = hist.evaluate(&z, v[n], v[n + 1]);
        hist.advance(&mut z, v[n], v[n + 1]);
    }
    Ok(SampledSignal { grid: f.grid, values: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn grid(t_end: f64, n: usize) -> TimeGrid {
        TimeGrid::over(t_end, n).unwrap()
    }

    // J^α e^s = Σ_k t^{k+α}/Γ(k+1+α), summed with the recurrence Γ(x+1) = xΓ(x).
    fn exp_oracle(alpha: f64, t: f64) -> f64 {
        let mut term = t.powf(alpha) / gamma(alpha + 1.0);
        let mut sum = term;
        for k in 1..80 {
            term *= t / (k as f64 + alpha);
            sum += term;
        }
        sum
    }

    #[test]
    fn order_pairs_sum_to_one() {
        let o = FractionalOrder::from_gamma(0.3).unwrap();
        assert_eq!(o.alpha() + o.gamma(), 1.0);
        assert!(FractionalOrder::from_gamma(1.0).is_err());
        assert!(FractionalOrder::from_alpha(0.0).is_err());
    }

    proptest! {
        #[test]
        fn order_invariant(g in 1e-9f64..(1.0 - 1e-9)) {
            let o = FractionalOrder::from_gamma(g).unwrap();
            prop_assert_eq!(o.alpha() + o.gamma(), 1.0);
            prop_assert!(o.alpha() > 0.0 && o.alpha() < 1.0);
        }

        #[test]
        fn weights_nonnegative(order in 0.01f64..3.0, n in 1usize..300) {
            let w = QuadratureWeights::with_steps(order, 0.01, n).unwrap();
            for j in 0..=n {
                prop_assert!(w.weight(n, j) >= 0.0);
            }
        }

        #[test]
        fn integral_is_linear(alpha in 0.05f64..1.0, a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let g = grid(1.0, 64);
            let f = SampledSignal::from_fn(g, |t| (3.0 * t).sin());
            let h = SampledSignal::from_fn(g, |t| t * t - 0.5);
            let lhs = rl_integral(&f.combine(a, &h, b).unwrap(), alpha).unwrap();
            let rhs = rl_integral(&f, alpha).unwrap().combine(a, &rl_integral(&h, alpha).unwrap(), b).unwrap();
            for (x, y) in lhs.values().iter().zip(rhs.values()) {
                prop_assert!((x - y).abs() <= 1e-13 * (1.0 + x.abs()));
            }
        }

        #[test]
        fn integral_preserves_positivity(alpha in 0.05f64..1.0, seed in 0u64..1000) {
            let g = grid(2.0, 100);
            let f = SampledSignal::from_fn(g, |t| ((t * 7.3 + seed as f64).sin()).abs());
            let j = rl_integral(&f, alpha).unwrap();
            prop_assert!(j.values().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn row_sums_match_constant_integral() {
        for &order in &[0.1, 0.5, 0.9, 1.0, 1.7] {
            let dt = 1e-3;
            let w = QuadratureWeights::with_steps(order, dt, 2000).unwrap();
            for &n in &[1usize, 2, 63, 64, 65, 500, 2000] {
                let sum: f64 = w.row(n).iter().sum();
                let exact = (n as f64 * dt).powf(order) / gamma(order + 1.0);
                assert_relative_eq!(sum, exact, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn series_branches_are_continuous() {
        for &a in &[1.1, 1.5, 1.99, 2.5] {
            let k = SERIES_SWITCH as f64;
            let direct = (k + 1.0).powf(a) - 2.0 * k.powf(a) + (k - 1.0).powf(a);
            assert_relative_eq!(second_difference_power(a, SERIES_SWITCH), direct, max_relative = 1e-10);
            let mu = a - 1.0;
            let direct = (k - 1.0).powf(mu + 1.0) - (k - 1.0 - mu) * k.powf(mu);
            assert_relative_eq!(endpoint_moment(mu, SERIES_SWITCH), direct, max_relative = 1e-10);
        }
    }

    #[test]
    fn uniform_weights_equal_summed_interval_weights() {
        let (order, dt, n) = (0.37, 0.02, 150);
        let w = QuadratureWeights::with_steps(order, dt, n).unwrap();
        let t = n as f64 * dt;
        let mut acc = vec![0.0; n + 1];
        for j in 0..n {
            let (wa, wb) = interval_weights(order, t, j as f64 * dt, (j + 1) as f64 * dt);
            acc[j] += wa;
            acc[j + 1] += wb;
        }
        for j in 0..=n {
            assert_relative_eq!(w.weight(n, j), acc[j], max_relative = 1e-9);
        }
    }

    #[test]
    fn constant_and_linear_examples() {
        let g = grid(1.0, 1000);
        let one = SampledSignal::from_fn(g, |_| 1.0);
        let j = rl_integral(&one, 0.5).unwrap();
        assert_relative_eq!(*j.values().last().unwrap(), 2.0 / std::f64::consts::PI.sqrt(), max_relative = 1e-10);

        let lin = SampledSignal::from_fn(g, |t| t);
        let j = rl_integral(&lin, 0.5).unwrap();
        // Γ(2)/Γ(5/2) with Γ(5/2) = (3/4)√π
        let oracle = 1.0 / (0.75 * PI.sqrt());
        assert_relative_eq!(*j.values().last().unwrap(), oracle, max_relative = 1e-10);
        assert_relative_eq!(oracle, 0.7522527781, max_relative = 1e-10);

        let j = rl_integral(&one, 1.0).unwrap();
        for (n, v) in j.values().iter().enumerate() {
            assert_relative_eq!(*v, g.node(n), max_relative = 1e-12, epsilon = 1e-15);
        }
        assert_eq!(j.values()[0], 0.0);
    }

    #[test]
    fn alpha_one_is_cumulative_trapezoid() {
        let g = grid(2.0, 200);
        let f = SampledSignal::from_fn(g, |t| (t * 2.0).cos() + t * t);
        let j = rl_integral(&f, 1.0).unwrap();
        let mut acc = 0.0;
        for n in 1..f.len() {
            acc += 0.5 * g.dt() * (f.values()[n - 1] + f.values()[n]);
            assert_relative_eq!(j.values()[n], acc, max_relative = 1e-12);
        }
        let near = rl_integral(&f, 1.0 - 1e-3).unwrap();
        for n in 1..f.len() {
            assert_relative_eq!(near.values()[n], j.values()[n], max_relative = 1e-2);
        }
    }

    #[test]
    fn exponential_converges_at_second_order() {
        let alpha = 0.4;
        let err = |n: usize| {
            let f = SampledSignal::from_fn(grid(1.0, n), f64::exp);
            let j = rl_integral(&f, alpha).unwrap();
            j.values()
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, v)| (v - exp_oracle(alpha, j.grid().node(k))).abs())
                .fold(0.0, f64::max)
        };
        let order = (err(100) / err(200)).log2();
        assert!(order > 1.8, "order {order}");
    }

    #[test]
    fn domain_and_contract_errors() {
        let g = grid(1.0, 10);
        let f = SampledSignal::from_fn(g, |t| t);
        assert!(matches!(rl_integral(&f, 0.0), Err(Error::Domain(_))));
        assert!(matches!(rl_integral(&f, 1.5), Err(Error::Domain(_))));
        let bad = SampledSignal::from_samples(&[0.0, 0.1, 0.25], vec![0.0; 3]);
        assert!(matches!(bad, Err(Error::ContractViolation(_))));
        let ok = SampledSignal::from_samples(&[0.0, 0.1, 0.2], vec![0.0; 3]).unwrap();
        assert_eq!(ok.grid().n_steps(), 2);
        let short = SampledSignal::from_fn(grid(1.0, 1), |t| t);
        assert!(matches!(rl_deriv_left(&short, 0.5), Err(Error::InsufficientResolution(_))));
    }

    #[test]
    fn left_derivative_of_power() {
        let f = SampledSignal::from_fn(grid(1.0, 4000), |t| t.sqrt());
        let d = rl_deriv_left(&f, 0.5).unwrap();
        assert_relative_eq!(*d.values().last().unwrap(), 0.8862269255, max_relative = 1e-3);
        let zero = SampledSignal::from_fn(grid(1.0, 50), |_| 0.0);
        assert!(rl_deriv_left(&zero, 0.5).unwrap().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn derivative_inverts_integral() {
        let alpha = 0.6;
        let err = |n: usize| {
            let f = SampledSignal::from_fn(grid(1.0, n), |t| 1.0 + (2.0 * t).sin());
            let back = rl_deriv_left(&rl_integral(&f, alpha).unwrap(), alpha).unwrap();
            back.values().iter().zip(f.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        let (e1, e2) = (err(200), err(400));
        assert!(e2 < 1e-3);
        assert!((e1 / e2).log2() >= 1.0);
    }

    #[test]
    fn right_derivative_examples() {
        let t_final = 1.0;
        let g = grid(t_final, 10_000);
        let w1 = SampledSignal::from_fn(g, |t| (1.0 - t / t_final).powi(9));
        let d = rl_deriv_right(&w1, 0.5, t_final).unwrap();
        let exact = w1_right_deriv_at(9.0, 0.5, t_final, 0, 0.0).unwrap();
        assert_relative_eq!(d.values()[0], exact, max_relative = 1e-3);

        let zero = SampledSignal::from_fn(g, |_| 0.0);
        assert!(rl_deriv_right(&zero, 0.5, t_final).unwrap().values().iter().all(|&v| v == 0.0));

        // exact value (2−α)(T−t)^{1−α}/Γ(3−α) vanishes at T; the one-sided
        // stencil sees it at O(dt^{1−α})
        let end_value = |n: usize| {
            let lin = SampledSignal::from_fn(grid(1.0, n), |t| 1.0 - t);
            rl_deriv_right(&lin, 0.5, 1.0).unwrap().values().last().unwrap().abs()
        };
        let (e1, e2) = (end_value(100), end_value(400));
        assert!(e1 < 2.0 * 0.01f64.sqrt() && e2 < 0.6 * e1);
        let lin = SampledSignal::from_fn(grid(1.0, 100), |t| 1.0 - t);
        assert!(rl_integral(&lin.reversed(), 0.5).unwrap().values()[0] == 0.0);
        assert!(rl_deriv_right(&lin, 0.5, 2.0).is_err());
    }

    #[test]
    fn w1_closed_forms() {
        let (sigma, alpha) = (9.0, 0.5);
        let c = (1.0 - alpha + sigma) * gamma(sigma + 1.0) / gamma(2.0 - alpha + sigma);
        for &t_final in &[0.5, 1.0, 3.0] {
            let v = w1_right_deriv_at(sigma, alpha, t_final, 0, 0.0).unwrap();
            assert_relative_eq!(v, c * t_final.powf(-alpha), max_relative = 1e-12);
            let v = w1_right_deriv_at(sigma, alpha, t_final, 1, 0.0).unwrap();
            assert_relative_eq!(v, c * (sigma - alpha) * t_final.powf(-alpha - 1.0), max_relative = 1e-12);
            for level in 0..=2 {
                assert_eq!(w1_right_deriv_at(sigma, alpha, t_final, level, t_final).unwrap(), 0.0);
            }
        }
        let v = w1_right_deriv_at(sigma, alpha, 2.0, 0, 1.0).unwrap();
        assert_relative_eq!(v, c * 2f64.powi(-9), max_relative = 1e-12);
        assert!(matches!(w1_right_deriv_at(2.4, 0.5, 1.0, 2, 0.0), Err(Error::Domain(_))));
        assert!(matches!(w1_right_deriv_at(0.5, 0.5, 1.0, 0, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn w1_matches_numerical_right_derivative_mid_interval() {
        let (sigma, alpha, t_final) = (9.0, 0.5, 2.0);
        let g = grid(t_final, 20_000);
        let w1 = SampledSignal::from_fn(g, |t| (1.0 - t / t_final).powf(sigma));
        let d = rl_deriv_right(&w1, alpha, t_final).unwrap();
        let exact = w1_right_derivs(sigma, alpha, t_final, 0, &g).unwrap();
        assert_relative_eq!(d.values()[10_000], exact.values()[10_000], max_relative = 1e-3);
    }

    #[test]
    fn ladder_by_finite_differences() {
        let (sigma, alpha, t_final) = (9.0, 0.3, 1.5);
        let g = grid(t_final, 3000);
        let levels: Vec<_> = (0..=2).map(|l| w1_right_derivs(sigma, alpha, t_final, l, &g).unwrap()).collect();
        for k in 0..2 {
            let d = differentiate(levels[k].values(), g.dt());
            let scale = levels[k + 1].values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (a, b) in d.iter().zip(levels[k + 1].values()) {
                assert!((a + b).abs() <= 1e-4 * scale);
            }
        }
    }

    #[test]
    fn integration_by_parts_examples() {
        let g = grid(1.0, 1000);
        let zero = SampledSignal::from_fn(g, |_| 0.0);
        let w1 = SampledSignal::from_fn(g, |t| (1.0 - t).powi(9));
        assert_eq!(integration_by_parts_residual(&zero, &w1, 0.5).unwrap(), 0.0);

        let res = |n: usize| {
            let g = grid(1.0, n);
            let f = SampledSignal::from_fn(g, |t| t * t);
            let w = SampledSignal::from_fn(g, |t| (1.0 - t).powi(9));
            integration_by_parts_residual(&f, &w, 0.5).unwrap()
        };
        let (r1, r2) = (res(1000), res(2000));
        assert!(r1 <= 1e-3, "{r1}");
        assert!(r2 < r1);

        let res = |n: usize| {
            let g = grid(1.0, n);
            let f = SampledSignal::from_fn(g, |t| t);
            let w = SampledSignal::from_fn(g, |t| (1.0 - t).powi(4));
            integration_by_parts_residual(&f, &w, 0.3).unwrap()
        };
        assert!((res(200) / res(400)).log2() >= 1.0);

        let other = SampledSignal::from_fn(grid(1.0, 999), |t| t);
        assert!(integration_by_parts_residual(&other, &w1, 0.5).is_err());
    }

    #[test]
    fn soe_meets_tolerance_on_probe_set() {
        let k = soe_compress(0.5, 1e-6, 1e-3, 10.0).unwrap();
        let mut worst = 0.0f64;
        for i in 0..=997 {
            let s = 1e-3 * (1e4f64).powf(i as f64 / 997.0);
            worst = worst.max((k.eval(s) / rl_kernel(0.5, s) - 1.0).abs());
        }
        assert!(worst <= 1e-6, "{worst}");
        assert!(k.len() < 200);

        let one = soe_compress(1.0, 1e-6, 1e-3, 10.0).unwrap();
        assert_eq!(one.terms(), &[(1.0, 0.0)]);
        assert!(soe_compress(0.5, 1e-13, 1e-3, 1.0).is_err());
        assert!(soe_compress(0.5, 1e-6, 0.0, 1.0).is_err());
    }

    #[test]
    fn soe_failure_reports_achieved_error() {
        match soe_compress_capped(0.5, 1e-10, 1e-6, 1e3, 40) {
            Err(Error::ApproximationFailure { achieved, terms }) => {
                assert!(achieved.is_finite() && achieved > 0.0);
                assert!(terms > 0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn soe_integral_matches_direct_rule() {
        let g = grid(3.0, 1500);
        let f = SampledSignal::from_fn(g, |t| 1.0 + t.sin() + 0.1 * t * t);
        for &alpha in &[0.2, 0.5, 0.9, 1.0] {
            let tol = 1e-7;
            let direct = rl_integral(&f, alpha).unwrap();
            let fast = rl_integral_soe(&f, alpha, tol).unwrap();
            for (a, b) in direct.values().iter().zip(fast.values()).skip(1) {
                assert!((a - b).abs() <= 10.0 * tol * a.abs(), "alpha {alpha}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn exp_hat_moments_branches_agree() {
        for &h in &[0.1, 1.0] {
            let x = 1e-3 / h;
            let lo = exp_hat_moments(x * (1.0 - 1e-9), h);
            let hi = exp_hat_moments(x * (1.0 + 1e-9), h);
            assert_relative_eq!(lo.0, hi.0, max_relative = 1e-9);
            assert_relative_eq!(lo.1, hi.1, max_relative = 1e-9);
        }
        assert_eq!(exp_hat_moments(0.0, 0.2), (0.1, 0.1));
    }
}
