//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.
//!
//! Runs without the libtest harness so the lines always reach the output.
//! Closed forms below use half-integer Γ values built from √π, not the
//! crate's own special functions.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;

use memwave_core::certificates::{
    average_identity_residual_series, delta, kato_sequence, memory_ode_surrogate,
};
use memwave_core::exponents::{gap_pairs, kato_exponent, strauss_exponent};
use memwave_core::fractional::{rl_deriv_left, rl_deriv_right, rl_integral, w1_right_deriv_at};
use memwave_core::solver::{detect_blowup, run, ForcingModel, GridSpec, Profile, RunConfig, Scheme, Thresholds};
use memwave_core::spectral::{energy, field_norms, make_grid, propagate_linear};
use memwave_core::{Field, RunResult, SampledSignal, TimeGrid, Verdict, WaveState};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Γ(k + 1/2) = √π · Π_{i<k} (i + 1/2)
fn gamma_half(k: u32) -> f64 {
    (0..k).fold(PI.sqrt(), |acc, i| acc * (i as f64 + 0.5))
}

fn factorial(k: u32) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

// ---------------------------------------------------------------------------

fn c1_exponents() -> Outcome {
    let e = [
        (kato_exponent(3, 1.0 / 3.0).unwrap() - 3.0).abs(),
        (strauss_exponent(3, 1.0 / 3.0).unwrap() - 3.0).abs(),
        (kato_exponent(4, 0.5).unwrap() - 2.0).abs(),
    ];
    let lim1 = (strauss_exponent(3, 1.0 - 1e-9).unwrap() - (1.0 + 2f64.sqrt())).abs();
    let lim0 = (strauss_exponent(3, 1e-9).unwrap() - (3.0 + 13f64.sqrt()) / 2.0).abs();
    let pass = e.iter().all(|x| *x <= 1e-12) && lim1 <= 1e-6 && lim0 <= 1e-6;
    outcome(pass, format!("exact errs {:.1e} {:.1e} {:.1e}, limits {lim1:.1e} / {lim0:.1e}", e[0], e[1], e[2]))
}

fn c2_quadrature() -> Outcome {
    // α = 1/2 so every Γ needed is a half-integer value
    let alpha = 0.5;
    let grid = TimeGrid::new(1e-3, 1000).unwrap();
    let one = rl_integral(&SampledSignal::from_fn(grid, |_| 1.0), alpha).unwrap();
    let lin = rl_integral(&SampledSignal::from_fn(grid, |s| s), alpha).unwrap();
    let mut worst: f64 = 0.0;
    for j in 1..grid.len() {
        let t = grid.node(j);
        worst = worst.max(rel(one.values()[j], t.sqrt() / gamma_half(1)));
        worst = worst.max(rel(lin.values()[j], t.powf(1.5) / gamma_half(2)));
    }
    // convergence on s², whose interpolant is not exact: J^½ s² = 2 t^{5/2}/Γ(7/2)
    let err_sq = |n: usize| {
        let g = TimeGrid::over(1.0, n).unwrap();
        let j = rl_integral(&SampledSignal::from_fn(g, |s| s * s), alpha).unwrap();
        (1..g.len()).map(|i| (j.values()[i] - 2.0 * g.node(i).powf(2.5) / gamma_half(3)).abs()).fold(0.0, f64::max)
    };
    let order = (err_sq(100) / err_sq(200)).log2();
    // D^α J^α f = f on f = 1 + s², max-norm over the whole grid; the t ≥ 0.1
    // max-norm and the time-L¹ norm are reported alongside
    let ident = |n: usize| {
        let g = TimeGrid::over(1.0, n).unwrap();
        let f = SampledSignal::from_fn(g, |s| 1.0 + s * s);
        let back = rl_deriv_left(&rl_integral(&f, alpha).unwrap(), alpha).unwrap();
        let e: Vec<f64> = back.values().iter().zip(f.values()).map(|(a, b)| (a - b).abs()).collect();
        let late = (0..e.len()).filter(|&i| g.node(i) >= 0.1).map(|i| e[i]).fold(0.0, f64::max);
        let l1 = e.iter().sum::<f64>() * g.dt();
        (e.iter().copied().fold(0.0, f64::max), late, l1)
    };
    let (r1, r2) = (ident(200), ident(400));
    let id_order = (r1.0 / r2.0).log2();
    let pass = worst <= 1e-4 && order >= 1.5 && id_order >= 1.0;
    outcome(pass, format!("closed-form rel err {worst:.2e}; order {order:.2}; DαJα max residual {:.2e}→{:.2e} order {id_order:.2} (t ≥ 0.1: order {:.2}; time-L¹: order {:.2})", r1.0, r2.0, (r1.1 / r2.1).log2(), (r1.2 / r2.2).log2()))
}

fn c3_ladder() -> Outcome {
    let (alpha, sigma, t_final) = (0.5, 9.0, 1.0);
    let grid = TimeGrid::new(1e-4, 10_000).unwrap();
    let w1 = SampledSignal::from_fn(grid, |t| (1.0 - t / t_final).max(0.0).powf(sigma));
    let lvl0 = rl_deriv_right(&w1, alpha, t_final).unwrap();
    // (−d/dt) by central differences
    let minus_d = |v: &[f64]| -> Vec<f64> {
        let h = grid.dt();
        (0..v.len()).map(|i| if i == 0 || i + 1 == v.len() { f64::NAN } else { -(v[i + 1] - v[i - 1]) / (2.0 * h) }).collect()
    };
    let lvl1 = minus_d(lvl0.values());
    let lvl2 = minus_d(&lvl1);
    let numeric = [lvl0.values().to_vec(), lvl1, lvl2];
    let mut worst: f64 = 0.0;
    for (level, num) in numeric.iter().enumerate() {
        for j in (500..=8000).step_by(50) {
            let exact = w1_right_deriv_at(sigma, alpha, t_final, level as u8, grid.node(j)).unwrap();
            worst = worst.max(rel(num[j], exact));
        }
    }
    // endpoint values against C = (1−α+σ)Γ(σ+1)/Γ(2−α+σ), C̃ = C(σ−α) at T = 2
    let big_t = 2.0;
    let c = (1.0 - alpha + sigma) * factorial(9) / gamma_half(10);
    let e0 = rel(w1_right_deriv_at(sigma, alpha, big_t, 0, 0.0).unwrap(), c * big_t.powf(-alpha));
    let e1 = rel(w1_right_deriv_at(sigma, alpha, big_t, 1, 0.0).unwrap(), c * (sigma - alpha) * big_t.powf(-alpha - 1.0));
    let at_t = [0u8, 1].map(|l| w1_right_deriv_at(sigma, alpha, big_t, l, big_t).unwrap());
    let pass = worst <= 1e-3 && e0 <= 1e-12 && e1 <= 1e-12 && at_t == [0.0, 0.0];
    outcome(pass, format!("numeric ladder rel err {worst:.2e}; endpoint prefactors {e0:.1e}, {e1:.1e}; values at T {at_t:?}"))
}

fn c4_propagator() -> Outcome {
    let l = 2.0 * PI;
    let grid = make_grid(1, 256, l).unwrap();
    let gauss = |a: f64| move |x: &[f64; 3]| a * (-(x[0] * x[0]) * 4.0).exp();
    let s0 = WaveState::new(Field::from_fn(&grid, gauss(1.0)), Field::from_fn(&grid, gauss(0.5)), 0.0).unwrap();
    let e0 = energy(&s0);
    let mut s = s0.clone();
    let mut drift: f64 = 0.0;
    for _ in 0..1000 {
        s = propagate_linear(&s, 0.01);
        drift = drift.max(rel(energy(&s), e0));
    }
    // d'Alembert for band-limited data on [−π, π): u₀ = Σ a cos(kx), u₁ = b sin(3x)
    let modes = [(1.0, 1.0), (0.3, 5.0), (0.05, 17.0)];
    let u0 = Field::from_fn(&grid, |x| modes.iter().map(|(a, k)| a * (k * x[0]).cos()).sum());
    let u1 = Field::from_fn(&grid, |x| 0.7 * (3.0 * x[0]).sin());
    let exact = |t: f64| {
        Field::from_fn(&grid, |x| {
            let d: f64 = modes.iter().map(|(a, k)| 0.5 * a * ((k * (x[0] - t)).cos() + (k * (x[0] + t)).cos())).sum();
            d + 0.7 * (3.0 * x[0]).sin() * (3.0 * t).sin() / 3.0
        })
    };
    let sd = WaveState::new(u0, u1, 0.0).unwrap();
    let one_shot = propagate_linear(&sd, 3.7);
    let mut stepped = sd.clone();
    for _ in 0..100 {
        stepped = propagate_linear(&stepped, 0.037);
    }
    let ex = exact(3.7);
    let maxdiff = |a: &Field| a.values().iter().zip(ex.values()).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    let dal = maxdiff(&one_shot.u).max(maxdiff(&stepped.u));
    // semigroup: P(a)P(b) = P(a+b)
    let ab = propagate_linear(&propagate_linear(&s0, 0.3), 1.1);
    let direct = propagate_linear(&s0, 1.4);
    let scale = direct.u.max_abs().max(direct.v.max_abs());
    let semi = ab.u.values().iter().zip(direct.u.values()).chain(ab.v.values().iter().zip(direct.v.values()))
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max)
        / scale;
    let pass = drift <= 1e-10 && dal <= 1e-8 && semi <= 1e-12;
    outcome(pass, format!("energy drift {drift:.1e}; d'Alembert {dal:.1e}; semigroup {semi:.1e}"))
}

/// First recorded time at which the blow-up detector raises its flag on the
/// series seen so far.
fn flag_time(r: &RunResult, th: &Thresholds) -> f64 {
    for k in 8..=r.rows.len() {
        let e = detect_blowup(&r.rows[..k], th);
        if e.flag || e.confident {
            return r.rows[k - 1].t;
        }
    }
    f64::INFINITY
}

fn cone_check(config: &RunConfig, r: &RunResult) -> (usize, f64, f64) {
    let h = config.grid.l / config.grid.m as f64;
    let radius = r.data_radius.unwrap();
    let tf = flag_time(r, &config.thresholds);
    let before: Vec<_> = r.rows.iter().filter(|x| x.t < tf).collect();
    let worst = before.iter().map(|x| x.support_radius - (radius + x.t + 3.0 * h)).fold(f64::MIN, f64::max);
    (before.len(), worst, tf)
}

fn c5_finite_speed(one_d: &(RunConfig, RunResult)) -> Outcome {
    let two_d = config_file("blowup_2d.json");
    let r2 = run(&two_d).unwrap();
    let (n1, w1, f1) = cone_check(&one_d.0, &one_d.1);
    let (n2, w2, f2) = cone_check(&two_d, &r2);
    let pass = w1 <= 0.0 && w2 <= 0.0 && n1 > 100 && n2 > 100;
    outcome(
        pass,
        format!(
            "N=1: {n1} rows before flag at t={f1:.3}, max(support − (r+t+3h)) = {w1:.3}; \
             N=2: {n2} rows before flag at t={f2:.3}, max = {w2:.3} (run verdict {})",
            r2.verdict.as_str()
        ),
    )
}

fn small_run(dt: f64, scheme: Scheme) -> RunConfig {
    let mut c = RunConfig::demo(1, 0.5, 2.0, 0.1);
    c.grid = GridSpec { m: 1024, l: 40.0 };
    c.dt = dt;
    c.t_end = 2.0;
    c.scheme = scheme;
    c.adaptivity.enabled = false;
    c.snapshot_every = 1;
    c
}

fn c6_schemes() -> Outcome {
    let both = run(&small_run(0.01, Scheme::Both)).unwrap();
    let agree = both.agreement.unwrap();
    let grid = make_grid(1, 1024, 40.0).unwrap();
    let dts = [0.04, 0.02, 0.01, 0.005];
    let finals: Vec<Vec<f64>> = dts
        .iter()
        .map(|&dt| run(&small_run(dt, Scheme::Leapfrog)).unwrap().snapshots.last().unwrap().u.clone())
        .collect();
    let errs: Vec<f64> = finals
        .windows(2)
        .map(|w| {
            let d = w[0].iter().zip(&w[1]).map(|(a, b)| a - b).collect();
            field_norms(&Field::new(&grid, d).unwrap()).h1
        })
        .collect();
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let min_order = orders.iter().copied().fold(f64::INFINITY, f64::min);
    let pass = agree.matched_times == both.rows.len() && agree.max_h1_diff <= 1e-6 && min_order >= 1.8;
    outcome(
        pass,
        format!(
            "{} matched times, max H¹ diff {:.2e}; dt orders {orders:.2?}",
            agree.matched_times, agree.max_h1_diff
        ),
    )
}

fn c7_blowup(runs: &[(RunConfig, RunResult)]) -> Outcome {
    let base = runs[0].1.blowup.t_max;
    let mut pass = base.is_some();
    let mut parts = Vec::new();
    for (c, r) in runs {
        let t = r.blowup.t_max;
        let dev = match (t, base) {
            (Some(t), Some(b)) => rel(t, b),
            _ => f64::INFINITY,
        };
        pass &= r.verdict == Verdict::BlowupDetected && dev <= 0.10;
        parts.push(format!("M={} dt={}: {} T_max={:.5} (±{:.1e}, Δ={dev:.1e})", c.grid.m, c.dt, r.verdict.as_str(), t.unwrap_or(f64::NAN), r.blowup.uncertainty.unwrap_or(f64::NAN)));
    }
    let positive = |p: &Profile| matches!(p, Profile::Gaussian { amplitude, .. } if *amplitude > 0.0);
    let init = &runs[0].0.initial;
    let d = delta(1, 2.0, 0.5);
    pass &= positive(&init.u0) && positive(&init.u1) && runs[0].1.rows[0].int_u > 0.0 && d > 0.0;
    parts.push(format!("δ = {d}"));
    outcome(pass, parts.join("; "))
}

fn identity_on(r: &RunResult, t_seg: f64) -> f64 {
    let rows: Vec<_> = r.rows.iter().filter(|x| x.t <= t_seg * (1.0 + 1e-12)).collect();
    let t: Vec<f64> = rows.iter().map(|x| x.t).collect();
    let iu: Vec<f64> = rows.iter().map(|x| x.int_u).collect();
    let ip: Vec<f64> = rows.iter().map(|x| x.int_up).collect();
    average_identity_residual_series(&t, &iu, &ip, Some(r.alpha)).unwrap()
}

fn c8_identity(coarse: &RunResult, fine: &RunResult) -> Outcome {
    // pre-threshold segment: the uniform-step part of the coarse run, before
    // adaptivity reacted to the growth
    let t_seg = coarse.rows[coarse.uniform_prefix_len() - 1].t;
    let (a, b) = (identity_on(coarse, t_seg), identity_on(fine, t_seg));
    let order = (a / b).log2();
    let pass = a <= 1e-3 && b < a && order >= 1.0;
    outcome(pass, format!("segment [0, {t_seg:.3}]: residual {a:.2e} (dt) → {b:.2e} (dt/2), order {order:.2}"))
}

fn c9_kato() -> Outcome {
    let mut mismatches = 0;
    let mut checked = 0;
    for i in 0..50 {
        for j in 0..50 {
            let p = 1.05 + 3.95 * i as f64 / 49.0;
            let g = 0.01 + 0.98 * j as f64 / 49.0;
            let p2 = strauss_exponent(3, g).unwrap();
            if (p - p2).abs() <= 1e-9 {
                continue;
            }
            checked += 1;
            if kato_sequence(p, g, 10).unwrap().increasing != (p < p2) {
                mismatches += 1;
            }
        }
    }
    outcome(mismatches == 0, format!("{checked} grid points, {mismatches} mismatches"))
}

fn c10_delta() -> Outcome {
    let mut mismatches = 0;
    let mut checked = 0;
    for n in [2u32, 4, 6] {
        for i in 0..60 {
            for j in 0..40 {
                let p = 1.02 + 5.0 * i as f64 / 59.0;
                let g = 0.01 + 0.98 * j as f64 / 39.0;
                let p1 = kato_exponent(n, g).unwrap();
                if (p - p1).abs() <= 1e-9 {
                    continue;
                }
                checked += 1;
                if (delta(n, p, g) > 0.0) != (p < p1) {
                    mismatches += 1;
                }
            }
        }
    }
    outcome(mismatches == 0, format!("{checked} points over N ∈ {{2,4,6}}, {mismatches} mismatches"))
}

/// Exhaustive scan of x = 1/r for pairs satisfying the gap relations,
/// admissibility and the memory gain, written out from their definitions.
/// Returns the number of feasible scan points.
fn scan_feasible(n: u32, p: f64, gamma: f64) -> usize {
    let nf = n as f64;
    let sigma = (nf - 1.0) / 2.0;
    (1..200_000)
        .filter(|&i| pair_ok(nf, sigma, p, 1.0 - gamma, 0.5 * i as f64 / 200_000.0))
        .count()
}

fn pair_ok(nf: f64, sigma: f64, p: f64, alpha: f64, x: f64) -> bool {
    let inv_q = (nf - 2.0) / 2.0 - nf * x;
    let inv_qtp = (nf + 2.0) / 2.0 - p * nf * x;
    let tol = 1e-12;
    inv_qtp < 1.0
        && inv_qtp >= 0.5 - tol
        && inv_q > 0.0
        && inv_q <= 0.5 + tol
        && inv_q + sigma * x <= sigma / 2.0 + tol
        && p * inv_q < inv_qtp + alpha
}

fn c11_strichartz() -> Outcome {
    let mut inside = Vec::new();
    for (k, n) in [3u32, 4, 5, 6].iter().enumerate() {
        for i in 0..5 {
            let g = 0.1 + 0.18 * i as f64 + 0.01 * k as f64;
            let nf = *n as f64;
            let lo = nf / (nf - 2.0);
            let mut hi = (nf + 4.0 - 2.0 * g) / (nf - 2.0);
            if *n > 3 {
                hi = hi.min((nf + 1.0) / (nf - 3.0));
            }
            let frac = 0.15 + 0.17 * i as f64;
            inside.push((*n, lo + frac * (hi - lo), g));
        }
    }
    let outside = vec![
        (6u32, 7.0 / 3.0, 0.1),
        (6, 2.4, 0.2),
        (6, 2.45, 0.05),
        (6, 2.9, 0.5),
        (3, 1.5, 0.5),
        (4, 1.9, 0.3),
        (3, 7.0, 0.2),
        (5, 3.6, 0.1),
        (4, 5.5, 0.9),
        (7, 2.1, 0.5),
    ];
    let mut bad = Vec::new();
    let mut degenerate = 0;
    for &(n, p, g) in &inside {
        let nf = n as f64;
        match gap_pairs(n, p, g, 1e-6) {
            Ok(pair) => {
                if !pair_ok(nf, (nf - 1.0) / 2.0, p, 1.0 - g, pair.inv_r) || scan_feasible(n, p, g) < 2 {
                    bad.push(format!("inside ({n},{p:.3},{g:.2}) pair rejected by oracle"));
                }
            }
            Err(d) => bad.push(format!("inside ({n},{p:.3},{g:.2}) got {d:?}")),
        }
    }
    for &(n, p, g) in &outside {
        match gap_pairs(n, p, g, 1e-6) {
            Ok(_) => bad.push(format!("outside ({n},{p},{g}) returned a pair")),
            Err(d) => {
                let nf = n as f64;
                // beyond the window or the admissible range no pair may exist for any
                // ε > 0, i.e. the feasible set must have empty interior; a lone
                // feasible scan point is the degenerate endpoint where q = 2 and
                // q̃′ = 2 meet
                let beyond = p >= (nf + 4.0 - 2.0 * g) / (nf - 2.0) || (n > 3 && p >= (nf + 1.0) / (nf - 3.0));
                let found = scan_feasible(n, p, g);
                if found == 1 {
                    degenerate += 1;
                }
                if beyond && found >= 2 {
                    bad.push(format!("outside ({n},{p},{g}) diagnosed {d:?} but the scan finds {found} feasible points"));
                }
            }
        }
    }
    let n6_window = outside.iter().filter(|(n, p, _)| *n == 6 && *p >= 7.0 / 3.0).count();
    outcome(
        bad.is_empty(),
        format!("{} inside, {} outside ({n6_window} at N=6 with p ≥ 7/3, {degenerate} with a single degenerate scan point); problems: {bad:?}", inside.len(), outside.len()),
    )
}

fn c12_surrogate() -> Outcome {
    let a = memory_ode_surrogate(2.0, 0.5, 3.0, 1.0, 1.0, 1.0, 1.0, 60.0, 1e-2).unwrap();
    let b = memory_ode_surrogate(2.0, 0.5, 3.0, 1.0, 1.0, 1.0, 1.0, 60.0, 5e-3).unwrap();
    let (ta, tb) = (a.estimate.t_max.unwrap_or(f64::NAN), b.estimate.t_max.unwrap_or(f64::NAN));
    let lin = memory_ode_surrogate(2.0, 0.5, 3.0, 1.0, 1.0, 2.0, 0.0, 10.0, 1e-2).unwrap();
    let lin_err = lin.times.iter().zip(&lin.values).map(|(t, f)| rel(*f, 1.0 + 2.0 * t)).fold(0.0, f64::max);
    let pass = a.blowup && b.blowup && rel(tb, ta) <= 0.05 && lin_err <= 1e-12;
    outcome(pass, format!("T_max {ta:.4} (dt) vs {tb:.4} (dt/2); c = 0 max rel deviation from F0 + t·F0dot {lin_err:.1e}"))
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn config_file(name: &str) -> RunConfig {
    let text = std::fs::read_to_string(configs_dir().join(name)).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn c13_interface() -> Outcome {
    use memwave_cli::cmd_run;
    let tmp = tempfile::tempdir().unwrap();
    let mut notes = Vec::new();
    let mut pass = true;
    for (name, expected) in [("linear_demo.json", 0), ("blowup_1d.json", 10), ("horizon_demo.json", 20)] {
        let out = tmp.path().join(name);
        let code = cmd_run(&configs_dir().join(name), &out, None, false).unwrap_or_else(|f| f.code);
        pass &= code == expected;
        notes.push(format!("{name} → {code}"));
        if name == "blowup_1d.json" {
            // the config echoed in summary.json reproduces series.csv byte for byte
            let summary: serde_json::Value =
                serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
            let echo = tmp.path().join("echo.json");
            std::fs::write(&echo, serde_json::to_string(&summary["config"]).unwrap()).unwrap();
            let again = tmp.path().join("again");
            let code2 = cmd_run(&echo, &again, None, false).unwrap_or_else(|f| f.code);
            let same = std::fs::read(out.join("series.csv")).unwrap() == std::fs::read(again.join("series.csv")).unwrap();
            pass &= same && code2 == expected && summary["t_max"].is_f64();
            notes.push(format!("round-trip identical: {same}"));
        }
        if name == "linear_demo.json" {
            let text = std::fs::read_to_string(out.join("series.csv")).unwrap();
            let e: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(4).unwrap().parse().unwrap()).collect();
            let drift = e.iter().map(|x| rel(*x, e[0])).fold(0.0, f64::max);
            pass &= drift <= 1e-10;
            notes.push(format!("linear energy drift {drift:.1e}"));
        }
    }
    outcome(pass, notes.join(", "))
}

// ---------------------------------------------------------------------------

fn blowup_runs() -> Vec<(RunConfig, RunResult)> {
    let base = config_file("blowup_1d.json");
    let mut finer_dt = base.clone();
    finer_dt.dt /= 2.0;
    let mut finer_m = base.clone();
    finer_m.grid.m *= 2;
    let configs = [base, finer_dt, finer_m];
    std::thread::scope(|s| {
        let handles: Vec<_> = configs.iter().map(|c| s.spawn(move || (c.clone(), run(c).unwrap()))).collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    })
}

type Check = (u32, &'static str, Box<dyn FnOnce() -> Outcome + Send>);

fn main() {
    let start = Instant::now();
    assert_eq!(config_file("linear_demo.json").forcing, ForcingModel::Off);
    assert!(matches!(config_file("blowup_1d.json").initial.u0, Profile::Gaussian { .. }));

    let independent: Vec<Check> = vec![
        (1, "exponent exactness", Box::new(c1_exponents)),
        (2, "fractional quadrature", Box::new(c2_quadrature)),
        (3, "closed-form ladder", Box::new(c3_ladder)),
        (4, "propagator exactness", Box::new(c4_propagator)),
        (6, "scheme cross-validation", Box::new(c6_schemes)),
        (9, "Kato-sign equivalence", Box::new(c9_kato)),
        (10, "delta-sign equivalence", Box::new(c10_delta)),
        (11, "Strichartz feasibility", Box::new(c11_strichartz)),
        (12, "memory-ODE surrogate", Box::new(c12_surrogate)),
        (13, "determinism and interface", Box::new(c13_interface)),
    ];
    let mut results: Vec<(u32, &str, Outcome, f64)> = std::thread::scope(|s| {
        let heavy = s.spawn(|| {
            let t0 = Instant::now();
            let runs = blowup_runs();
            let mut out = vec![
                (7, "blow-up reproduction", c7_blowup(&runs)),
                (8, "averaged identity", c8_identity(&runs[0].1, &runs[1].1)),
            ];
            out.push((5, "finite speed of propagation", c5_finite_speed(&runs[0])));
            let secs = t0.elapsed().as_secs_f64();
            out.into_iter().map(|(i, n, o)| (i, n, o, secs)).collect::<Vec<_>>()
        });
        let handles: Vec<_> = independent
            .into_iter()
            .map(|(i, name, f)| {
                s.spawn(move || {
                    let t0 = Instant::now();
                    let o = f();
                    (i, name, o, t0.elapsed().as_secs_f64())
                })
            })
            .collect();
        let mut all: Vec<_> = handles.into_iter().map(|h| h.join().unwrap()).collect();
        all.extend(heavy.join().unwrap());
        all
    });
    results.sort_by_key(|r| r.0);
    let mut failed = 0;
    for (i, name, o, secs) in &results {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        failed += usize::from(!o.pass);
        println!("{tag} [{i:>2}] {name}: {} ({secs:.1}s)", o.detail);
    }
    println!("acceptance: {} passed, {failed} failed in {:.1}s", results.len() - failed, start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
