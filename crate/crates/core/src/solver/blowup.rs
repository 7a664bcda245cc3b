//! Threshold flags and T_max estimation from a recorded norm series.

use serde::{Deserialize, Serialize};

use super::config::Thresholds;
use super::run::SeriesRow;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupEstimate {
    /// A threshold was crossed or a field overflowed.
    pub flag: bool,
    /// Fitted blow-up time, absent when the series shows no growth to fit.
    pub t_max: Option<f64>,
    pub uncertainty: Option<f64>,
    /// Exponent β in ‖u‖_∞ ≈ C (T_max − t)^{−β}.
    pub beta: Option<f64>,
    /// RMS residual of the log-log fit.
    pub residual: Option<f64>,
    /// False when the fit window has fewer than 8 rows or the series never
    /// grew by a decade.
    pub confident: bool,
}

const MIN_ROWS: usize = 8;

/// Least-squares fit of log y = c − β log(T − t); returns (β, rms residual).
fn fit(t: &[f64], y: &[f64], t_max: f64) -> (f64, f64) {
    let n = t.len() as f64;
    let xs: Vec<f64> = t.iter().map(|ti| (t_max - ti).ln()).collect();
    let ys: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum();
    (-slope, (rss / n).sqrt())
}

/// Best T_max > t_last: log-spaced scan of T − t_last, then golden section.
fn best_t_max(t: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let t_last = *t.last().unwrap();
    let span = (t_last - t[0]).max(f64::EPSILON * t_last.abs().max(1.0));
    let lo = (1e-9 * span).max(4.0 * f64::EPSILON * t_last.abs().max(1.0));
    let hi = 100.0 * span;
    let cost = |s: f64| fit(t, y, t_last + s).1;
    let k = 240;
    let grid: Vec<f64> = (0..=k).map(|i| lo * (hi / lo).powf(i as f64 / k as f64)).collect();
    let mut best = 0;
    for i in 1..grid.len() {
        if cost(grid[i]) < cost(grid[best]) {
            best = i;
        }
    }
    let (mut a, mut b) = (grid[best.saturating_sub(1)].ln(), grid[(best + 1).min(k)].ln());
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    for _ in 0..80 {
        if cost(c.exp()) < cost(d.exp()) {
            b = d;
        } else {
            a = c;
        }
        c = b - phi * (b - a);
        d = a + phi * (b - a);
    }
    let s = (0.5 * (a + b)).exp();
    let (beta, res) = fit(t, y, t_last + s);
    (t_last + s, beta, res)
}

/// Flags threshold crossings or overflow (a non-finite final L∞) and fits the
/// blow-up time to the last decade of L∞ growth.
pub fn detect_blowup(series: &[SeriesRow], thresholds: &Thresholds) -> BlowupEstimate {
    let mut est =
        BlowupEstimate { flag: false, t_max: None, uncertainty: None, beta: None, residual: None, confident: false };
    let Some(last) = series.last() else { return est };
    let overflow = !last.linf.is_finite() || !last.h1.is_finite();
    est.flag = overflow || series.iter().any(|r| r.linf > thresholds.linf_cap || r.h1 > thresholds.h1_cap);
    let finite: Vec<&SeriesRow> = series.iter().filter(|r| r.linf.is_finite() && r.linf > 0.0).collect();
    if overflow {
        let n = series.len();
        let prev = if n >= 2 { series[n - 2].t } else { last.t };
        est.t_max = Some(last.t);
        est.uncertainty = Some(last.t - prev);
    }
    if finite.len() < 3 {
        return est;
    }
    let y_last = finite.last().unwrap().linf;
    let mut start = finite.len() - 1;
    while start > 0 && finite[start - 1].linf >= 0.1 * y_last {
        start -= 1;
    }
    let decade = start > 0 || finite[0].linf <= 0.1 * y_last;
    // require monotone growth across the fitted window
    let enough = finite.len() - start >= MIN_ROWS;
    if !enough {
        start = finite.len().saturating_sub(MIN_ROWS);
    }
    let window = &finite[start..];
    let growth = window.last().unwrap().linf / window[0].linf;
    if growth < 2.0 && !est.flag {
        return est;
    }
    let t: Vec<f64> = window.iter().map(|r| r.t).collect();
    let y: Vec<f64> = window.iter().map(|r| r.linf).collect();
    let (t_fit, beta, res) = best_t_max(&t, &y);
    let half = t.len() / 2;
    let t_half = if t.len() - half >= 4 { best_t_max(&t[half..], &y[half..]).0 } else { t_fit };
    let dt_last = t[t.len() - 1] - t[t.len() - 2];
    if !overflow {
        est.t_max = Some(t_fit);
        est.uncertainty = Some((t_fit - t_half).abs().max(dt_last));
    }
    est.beta = Some(beta);
    est.residual = Some(res);
    est.confident = enough && decade && growth >= 5.0;
    est
}
