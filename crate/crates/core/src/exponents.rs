//! Critical exponents, regime classification and Strichartz pair arithmetic
//! for u_tt − Δu = J^{1−γ}(|u|^p) in N space dimensions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::gamma as gamma_fn;

/// Offset used to expose the limits γ → 0⁺ and γ → 1⁻ on the open interval.
pub const GAMMA_EDGE: f64 = 1e-9;

/// Maps γ ∈ [0, 1] into [GAMMA_EDGE, 1 − GAMMA_EDGE].
pub fn one_sided_gamma(gamma: f64) -> f64 {
    gamma.clamp(GAMMA_EDGE, 1.0 - GAMMA_EDGE)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    #[serde(rename = "N")]
    pub n: u32,
    pub gamma: f64,
    pub p: f64,
}

impl ProblemParams {
    pub fn new(n: u32, gamma: f64, p: f64) -> Result<Self> {
        let params = Self { n, gamma, p };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::domain("dimension N must be at least 1"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::domain(format!("gamma must lie in (0,1), got {}", self.gamma)));
        }
        if !(self.p > 1.0 && self.p.is_finite()) {
            return Err(Error::domain(format!("p must exceed 1, got {}", self.p)));
        }
        Ok(())
    }

    pub fn alpha(&self) -> f64 {
        1.0 - self.gamma
    }
}

/// Outcome of checking one theorem against (N, γ, p).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    Holds,
    Fails,
    /// The theorem's hypotheses on (N, γ) exclude this point.
    NotApplicable,
}

impl Flag {
    fn from_bool(b: bool) -> Self {
        if b {
            Flag::Holds
        } else {
            Flag::Fails
        }
    }

    pub fn holds(self) -> bool {
        self == Flag::Holds
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentReport {
    pub params: ProblemParams,
    pub p1: Option<f64>,
    pub p2: Option<f64>,
    pub inv_gamma: f64,
    /// N/(N−2) for N ≥ 3, +∞ otherwise.
    pub mild_cap: f64,
    /// (N+4−2γ)/(N−2), capped by (N+1)/(N−3) for N ≥ 6; +∞ for N ≤ 2.
    pub weak_cap: f64,
    pub mu: Option<f64>,
    pub mild_regularity_ok: bool,
    pub mild_exists: Flag,
    pub weak_exists: Flag,
    pub blowup_kato: Flag,
    pub blowup_strauss: Flag,
    pub blowup_gamma: Flag,
}

/// p₁ = 1 + (3−γ)/(N−2+γ); `None` when N − 2 + γ ≤ 0 (N = 1).
pub fn kato_exponent(n: u32, gamma: f64) -> Option<f64> {
    let den = n as f64 - 2.0 + gamma;
    if den <= 0.0 {
        return None;
    }
    let p1 = 1.0 + (3.0 - gamma) / den;
    (p1 > 1.0).then_some(p1)
}

/// Positive root of (N−2)p² − (N−γ)p − 1 = 0.
pub fn strauss_exponent(n: u32, gamma: f64) -> Result<f64> {
    if n < 3 {
        return Err(Error::domain(format!("the quadratic for p2 degenerates for N = {n} < 3")));
    }
    let a = n as f64 - 2.0;
    let b = n as f64 - gamma;
    Ok((b + (b * b + 4.0 * a).sqrt()) / (2.0 * a))
}

pub fn mild_cap(n: u32) -> f64 {
    if n <= 2 {
        f64::INFINITY
    } else {
        n as f64 / (n as f64 - 2.0)
    }
}

pub fn weak_cap(n: u32, gamma: f64) -> f64 {
    if n <= 2 {
        return f64::INFINITY;
    }
    let nf = n as f64;
    let cap = (nf + 4.0 - 2.0 * gamma) / (nf - 2.0);
    if n >= 6 {
        cap.min((nf + 1.0) / (nf - 3.0))
    } else {
        cap
    }
}

/// μ = N/2 − 1/(p−1), defined for p > N/(N−2).
pub fn mu_of_p(n: u32, p: f64) -> Result<f64> {
    if n < 3 {
        return Err(Error::domain(format!("mu needs N >= 3, got {n}")));
    }
    if !(p > mild_cap(n)) {
        return Err(Error::domain(format!("mu needs p > N/(N-2) = {}, got {p}", mild_cap(n))));
    }
    Ok(n as f64 / 2.0 - 1.0 / (p - 1.0))
}

/// p² − pN/2 + N/2 ≥ 0.
pub fn mild_regularity_ok(n: u32, p: f64) -> bool {
    let nf = n as f64;
    p * p - p * nf / 2.0 + nf / 2.0 >= 0.0
}

/// T^{2−γ}/((2−γ)Γ(2−γ)): the growth of the memory term over a window of
/// length T in the H¹ contraction estimate.
pub fn mild_window_constant(gamma: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let e = 2.0 - gamma;
    t.powf(e) / (e * gamma_fn(e))
}

pub fn classify(params: ProblemParams) -> ExponentReport {
    let ProblemParams { n, gamma, p } = params;
    let nf = n as f64;
    let p1 = kato_exponent(n, gamma);
    let p2 = strauss_exponent(n, gamma).ok();
    let mild_cap = mild_cap(n);
    let weak_cap = weak_cap(n, gamma);
    let mu = mu_of_p(n, p).ok();
    let mild_exists = Flag::from_bool(p <= mild_cap);
    let weak_exists = Flag::from_bool(p < weak_cap);
    let gamma_floor = (nf - 2.0) / nf;

    let blowup_kato = if n == 1 {
        Flag::Holds
    } else if n % 2 == 1 || gamma < gamma_floor {
        Flag::NotApplicable
    } else {
        Flag::from_bool(p1.is_some_and(|p1| p <= p1) && p <= mild_cap)
    };

    let blowup_strauss = if n < 3 || n % 2 == 0 {
        Flag::NotApplicable
    } else {
        let in_range = if n == 3 {
            gamma >= 1.0 / 3.0
        } else {
            gamma > (1.0 - (p - 1.0) * (nf - 3.0) / 2.0).max(gamma_floor)
        };
        if in_range {
            Flag::from_bool(p2.is_some_and(|p2| p < p2) && p <= mild_cap)
        } else {
            Flag::NotApplicable
        }
    };

    let blowup_gamma = if n < 3 {
        Flag::NotApplicable
    } else {
        let bound = p1.unwrap_or(1.0).max(1.0 / gamma);
        Flag::from_bool(p <= bound && weak_exists.holds())
    };

    ExponentReport {
        params,
        p1,
        p2,
        inv_gamma: 1.0 / gamma,
        mild_cap,
        weak_cap,
        mu,
        mild_regularity_ok: mild_regularity_ok(n, p),
        mild_exists,
        weak_exists,
        blowup_kato,
        blowup_strauss,
        blowup_gamma,
    }
}

const ADMISSIBLE_TOL: f64 = 1e-12;

fn recip(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        1.0 / x
    }
}

/// σ-admissibility with σ = (N−1)/2: q, r ≥ 2, (q, r, σ) ≠ (2, ∞, 1) and
/// 1/q + σ/r ≤ σ/2. Either exponent may be `f64::INFINITY`.
pub fn strichartz_admissible(q: f64, r: f64, n: u32) -> bool {
    if n < 2 || q.is_nan() || r.is_nan() || q < 2.0 || r < 2.0 {
        return false;
    }
    let sigma = (n as f64 - 1.0) / 2.0;
    if q == 2.0 && r.is_infinite() && sigma == 1.0 {
        return false;
    }
    recip(q) + sigma * recip(r) <= sigma / 2.0 + ADMISSIBLE_TOL
}

/// A pair (q, r) with its dual (q̃, r̃) satisfying the μ = 1 gap relations
/// 1/q + N/r = N/2 − 1 and 1/q̃′ + N/r̃′ = N/2 + 1, with p·r̃′ = r.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StrichartzPair {
    pub q: f64,
    pub r: f64,
    pub q_tilde: f64,
    pub r_tilde: f64,
    pub sigma: f64,
    /// Equality in the admissibility inequality for (q, r).
    pub sharp: bool,
    /// Whether (q̃, r̃) also passes [`strichartz_admissible`]. Under the gap
    /// relations with q̃′ > 1 this is never the case; kept as a diagnostic.
    pub dual_admissible: bool,
    pub inv_r: f64,
}

/// The individual requirements on x = 1/r behind a usable pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GapConstraint {
    /// q̃′ > 1, i.e. x > 1/(2p).
    DualExponentAboveOne,
    /// q̃′ ≤ 2, i.e. x ≤ (N+1)/(2pN).
    DualExponentAtMostTwo,
    /// q ≥ 2, i.e. x ≥ (N−3)/(2N).
    QAtLeastTwo,
    /// q < ∞, i.e. x < (N−2)/(2N).
    QFinite,
    /// (q, r) σ-admissible.
    Admissibility,
    /// p/q < 1/q̃′ + α.
    MemoryGain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum GapDiagnosis {
    DimensionTooLow,
    InvalidEpsilon,
    /// p ≤ N/(N−2): the energy-space mild theory already applies.
    BelowMildCap { mild_cap: f64 },
    /// p ≥ (N+4−2γ)/(N−2): the memory gain inequality fails for every pair.
    TheoremRange { bound: f64 },
    /// p ≥ (N+1)/(N−3): no 1/r satisfies all constraints at once.
    WindowEmpty { bound: f64 },
    /// A pair exists but this ε pushed 1/r outside the window.
    Tuning { violated: GapConstraint, inv_r: f64 },
}

/// Checks every constraint at x = 1/r and returns the first violated one.
pub fn gap_constraint_violation(n: u32, p: f64, gamma: f64, inv_r: f64) -> Option<GapConstraint> {
    let nf = n as f64;
    let alpha = 1.0 - gamma;
    let inv_q = (nf - 2.0) / 2.0 - nf * inv_r;
    let inv_qtp = (nf + 2.0) / 2.0 - p * nf * inv_r;
    if !(inv_qtp < 1.0) {
        return Some(GapConstraint::DualExponentAboveOne);
    }
    if !(inv_qtp >= 0.5 - ADMISSIBLE_TOL) {
        return Some(GapConstraint::DualExponentAtMostTwo);
    }
    if !(inv_q <= 0.5 + ADMISSIBLE_TOL) {
        return Some(GapConstraint::QAtLeastTwo);
    }
    if !(inv_q > 0.0) {
        return Some(GapConstraint::QFinite);
    }
    if !strichartz_admissible(1.0 / inv_q, 1.0 / inv_r, n) {
        return Some(GapConstraint::Admissibility);
    }
    if !(p * inv_q < inv_qtp + alpha) {
        return Some(GapConstraint::MemoryGain);
    }
    None
}

/// Pair choice 1/r = min((N+1)/(2pN), (N−2)/(2N) − ε) for the weak
/// local-existence range N/(N−2) < p < weak cap.
pub fn gap_pairs(n: u32, p: f64, gamma: f64, epsilon: f64) -> std::result::Result<StrichartzPair, GapDiagnosis> {
    if n < 3 {
        return Err(GapDiagnosis::DimensionTooLow);
    }
    if !(epsilon > 0.0) {
        return Err(GapDiagnosis::InvalidEpsilon);
    }
    let nf = n as f64;
    let mild = mild_cap(n);
    if p <= mild {
        return Err(GapDiagnosis::BelowMildCap { mild_cap: mild });
    }
    let theorem = (nf + 4.0 - 2.0 * gamma) / (nf - 2.0);
    if p >= theorem {
        return Err(GapDiagnosis::TheoremRange { bound: theorem });
    }
    if n > 3 {
        let window = (nf + 1.0) / (nf - 3.0);
        if p >= window {
            return Err(GapDiagnosis::WindowEmpty { bound: window });
        }
    }
    let inv_r = ((nf + 1.0) / (2.0 * p * nf)).min((nf - 2.0) / (2.0 * nf) - epsilon);
    if let Some(violated) = gap_constraint_violation(n, p, gamma, inv_r) {
        return Err(GapDiagnosis::Tuning { violated, inv_r });
    }
    let inv_q = (nf - 2.0) / 2.0 - nf * inv_r;
    let inv_qtp = (nf + 2.0) / 2.0 - p * nf * inv_r;
    let inv_rtp = p * inv_r;
    let sigma = (nf - 1.0) / 2.0;
    let (q, r) = (1.0 / inv_q, 1.0 / inv_r);
    let q_tilde = 1.0 / (1.0 - inv_qtp);
    let r_tilde = 1.0 / (1.0 - inv_rtp);
    Ok(StrichartzPair {
        q,
        r,
        q_tilde,
        r_tilde,
        sigma,
        sharp: (inv_q + sigma * inv_r - sigma / 2.0).abs() <= ADMISSIBLE_TOL,
        dual_admissible: strichartz_admissible(q_tilde, r_tilde, n),
        inv_r,
    })
}
