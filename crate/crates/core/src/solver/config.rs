//! Run configuration: problem parameters, grid, initial data and controls.

use serde::{Deserialize, Serialize};

use crate::error::{ConfigIssue, Error, Result};
use crate::exponents::ProblemParams;
use crate::spectral::{make_grid, Field, SpatialGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "L")]
    pub l: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CosineMode {
    pub amplitude: f64,
    /// Integer wave vector; the mode is cos(2π k·x / L).
    pub k: Vec<i64>,
}

/// Named initial-data shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    #[default]
    Zero,
    /// A·exp(−|x−c|²/w²)·χ(|x−c|/R) with χ(s) = exp(1 − 1/(1−s²)) on s < 1, so
    /// the data is smooth and supported in the ball of radius R = cutoff
    /// (default 2w).
    Gaussian {
        amplitude: f64,
        width: f64,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        center: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cutoff: Option<f64>,
    },
    /// Periodic data; no finite-support horizon applies.
    Cosine { modes: Vec<CosineMode> },
    /// Whitespace- or comma-separated grid values, axis 0 fastest.
    File { path: String },
}

impl Profile {
    fn check(&self, path: &str, dim: usize, issues: &mut Vec<ConfigIssue>) {
        let mut bad = |field: &str, message: String| {
            issues.push(ConfigIssue { path: format!("{path}.{field}"), message })
        };
        match self {
            Profile::Zero | Profile::File { .. } => {}
            Profile::Gaussian { amplitude, width, center, cutoff } => {
                if !amplitude.is_finite() {
                    bad("amplitude", format!("must be finite, got {amplitude}"));
                }
                if !(*width > 0.0 && width.is_finite()) {
                    bad("width", format!("must be positive, got {width}"));
                }
                if !center.is_empty() && center.len() != dim {
                    bad("center", format!("needs {dim} coordinates, got {}", center.len()));
                }
                if let Some(c) = cutoff {
                    if !(*c > 0.0 && c.is_finite()) {
                        bad("cutoff", format!("must be positive, got {c}"));
                    }
                }
            }
            Profile::Cosine { modes } => {
                for (i, m) in modes.iter().enumerate() {
                    if m.k.len() != dim {
                        bad(&format!("modes[{i}].k"), format!("needs {dim} components, got {}", m.k.len()));
                    }
                }
            }
        }
    }

    /// Radius of the ball containing the data, `None` for periodic data.
    pub fn support_radius(&self, sampled: &Field) -> Option<f64> {
        match self {
            Profile::Zero => Some(0.0),
            Profile::Gaussian { width, center, cutoff, .. } => {
                let c = center.iter().map(|x| x * x).sum::<f64>().sqrt();
                Some(c + cutoff.unwrap_or(2.0 * width))
            }
            Profile::Cosine { .. } => None,
            Profile::File { .. } => Some(crate::spectral::support_radius(sampled, 1e-12 * sampled.max_abs())),
        }
    }

    /// The same shape multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Result<Profile> {
        Ok(match self {
            Profile::Zero => Profile::Zero,
            Profile::Gaussian { amplitude, width, center, cutoff } => Profile::Gaussian {
                amplitude: amplitude * s,
                width: *width,
                center: center.clone(),
                cutoff: *cutoff,
            },
            Profile::Cosine { modes } => Profile::Cosine {
                modes: modes.iter().map(|m| CosineMode { amplitude: m.amplitude * s, k: m.k.clone() }).collect(),
            },
            Profile::File { path } => {
                return Err(Error::Configuration(vec![ConfigIssue {
                    path: "initial".into(),
                    message: format!("file data ({path}) cannot be rescaled"),
                }]))
            }
        })
    }

    pub fn sample(&self, grid: &SpatialGrid) -> Result<Field> {
        let dim = grid.dim();
        match self {
            Profile::Zero => Ok(Field::zeros(grid)),
            Profile::Gaussian { amplitude, width, center, cutoff } => {
                let r_cut = cutoff.unwrap_or(2.0 * width);
                let mut c = [0.0; 3];
                for (ci, v) in c.iter_mut().zip(center) {
                    *ci = *v;
                }
                Ok(Field::from_fn(grid, |x| {
                    let r2: f64 = (0..dim).map(|d| (x[d] - c[d]).powi(2)).sum();
                    let s2 = r2 / (r_cut * r_cut);
                    if s2 >= 1.0 {
                        0.0
                    } else {
                        amplitude * (-r2 / (width * width) + 1.0 - 1.0 / (1.0 - s2)).exp()
                    }
                }))
            }
            Profile::Cosine { modes } => {
                let dk = 2.0 * std::f64::consts::PI / grid.length();
                Ok(Field::from_fn(grid, |x| {
                    modes
                        .iter()
                        .map(|m| {
                            let phase: f64 = m.k.iter().zip(x).map(|(k, xi)| *k as f64 * xi).sum();
                            m.amplitude * (dk * phase).cos()
                        })
                        .sum()
                }))
            }
            Profile::File { path } => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| config_issue("initial", format!("cannot read {path}: {e}")))?;
                let values = text
                    .split(|c: char| c.is_whitespace() || c == ',')
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| config_issue("initial", format!("{path}: {e}")))?;
                if values.len() != grid.len() {
                    return Err(config_issue(
                        "initial",
                        format!("{path} holds {} values, the grid has {}", values.len(), grid.len()),
                    ));
                }
                Field::new(grid, values)
            }
        }
    }
}

fn config_issue(path: &str, message: String) -> Error {
    Error::Configuration(vec![ConfigIssue { path: path.into(), message }])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    pub u0: Profile,
    #[serde(default)]
    pub u1: Profile,
}

impl InitialData {
    /// (s·u₀, s·u₁)
    pub fn scaled(&self, s: f64) -> Result<InitialData> {
        Ok(InitialData { u0: self.u0.scaled(s)?, u1: self.u1.scaled(s)? })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub linf_cap: f64,
    pub h1_cap: f64,
    /// Largest admissible fraction of H¹ mass in modes with |m|_∞ > M/4.
    pub tail_cap: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { linf_cap: 1e8, h1_cap: 1e10, tail_cap: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Adaptivity {
    pub enabled: bool,
    /// A step is retried at dt/2 when ‖u‖_{H¹} changes by more than this fraction.
    pub h1_increment: f64,
    pub max_halvings: u32,
}

impl Default for Adaptivity {
    fn default() -> Self {
        Self { enabled: true, h1_increment: 1e-2, max_halvings: 40 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Picard,
    #[default]
    Leapfrog,
    Both,
}

/// What drives the right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ForcingModel {
    /// J^α(|u|^p)
    #[default]
    Memory,
    /// |u|^p without memory (the γ → 1 equation)
    Local,
    /// Homogeneous wave equation.
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PicardSettings {
    pub window: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for PicardSettings {
    fn default() -> Self {
        Self { window: 0.5, max_iters: 60, tol: 1e-10 }
    }
}

fn default_support_floor() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub params: ProblemParams,
    pub grid: GridSpec,
    pub initial: InitialData,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub adaptivity: Adaptivity,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default)]
    pub picard: PicardSettings,
    #[serde(default)]
    pub forcing: ForcingModel,
    /// Safety margin subtracted from L/2 when enforcing the horizon.
    #[serde(default)]
    pub horizon_padding: f64,
    /// Support-radius floor relative to the current ‖u‖_∞.
    #[serde(default = "default_support_floor")]
    pub support_floor: f64,
    /// Keep every k-th accepted u (0 = none); needed by the space-time certificate.
    #[serde(default)]
    pub snapshot_every: usize,
}

impl RunConfig {
    /// Small template used by tests and documentation.
    pub fn demo(n: u32, gamma: f64, p: f64, amplitude: f64) -> Self {
        let gauss = |a: f64| Profile::Gaussian { amplitude: a, width: 1.0, center: Vec::new(), cutoff: None };
        RunConfig {
            params: ProblemParams { n, gamma, p },
            grid: GridSpec { m: 256, l: 40.0 },
            initial: InitialData { u0: gauss(amplitude), u1: gauss(amplitude) },
            dt: 1e-3,
            t_end: 5.0,
            thresholds: Thresholds::default(),
            adaptivity: Adaptivity::default(),
            scheme: Scheme::default(),
            picard: PicardSettings::default(),
            forcing: ForcingModel::default(),
            horizon_padding: 0.0,
            support_floor: default_support_floor(),
            snapshot_every: 0,
        }
    }

    /// Every field-level problem, before any allocation.
    pub fn issues(&self) -> Vec<ConfigIssue> {
        let mut issues = Vec::new();
        let mut bad = |path: &str, message: String| issues.push(ConfigIssue { path: path.into(), message });
        let p = &self.params;
        if !(1..=3).contains(&p.n) {
            bad("params.N", format!("runs support N = 1, 2, 3, got {}", p.n));
        }
        if !(p.gamma > 0.0 && p.gamma < 1.0) {
            bad("params.gamma", format!("must lie in (0,1), got {}", p.gamma));
        }
        if !(p.p > 1.0 && p.p.is_finite()) {
            bad("params.p", format!("must exceed 1, got {}", p.p));
        }
        if self.grid.m < 8 || !self.grid.m.is_power_of_two() {
            bad("grid.M", format!("must be a power of two >= 8, got {}", self.grid.m));
        }
        if !(self.grid.l > 0.0 && self.grid.l.is_finite()) {
            bad("grid.L", format!("must be positive, got {}", self.grid.l));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            bad("dt", format!("must be positive, got {}", self.dt));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            bad("t_end", format!("must be positive, got {}", self.t_end));
        } else if self.dt > 0.0 && self.t_end / self.dt > 1e8 {
            bad("t_end", format!("t_end/dt = {:.3e} steps exceeds 1e8", self.t_end / self.dt));
        }
        let th = &self.thresholds;
        if !(th.linf_cap > 0.0) {
            bad("thresholds.linf_cap", format!("must be positive, got {}", th.linf_cap));
        }
        if !(th.h1_cap > 0.0) {
            bad("thresholds.h1_cap", format!("must be positive, got {}", th.h1_cap));
        }
        if !(th.tail_cap > 0.0 && th.tail_cap <= 1.0) {
            bad("thresholds.tail_cap", format!("must lie in (0,1], got {}", th.tail_cap));
        }
        if !(self.adaptivity.h1_increment > 0.0) {
            bad("adaptivity.h1_increment", format!("must be positive, got {}", self.adaptivity.h1_increment));
        }
        if !(self.picard.window > 0.0) {
            bad("picard.window", format!("must be positive, got {}", self.picard.window));
        }
        if self.picard.max_iters == 0 {
            bad("picard.max_iters", "must be at least 1".into());
        }
        if !(self.picard.tol > 0.0) {
            bad("picard.tol", format!("must be positive, got {}", self.picard.tol));
        }
        if !(self.horizon_padding >= 0.0) {
            bad("horizon_padding", format!("must be non-negative, got {}", self.horizon_padding));
        }
        if !(self.support_floor > 0.0 && self.support_floor < 1.0) {
            bad("support_floor", format!("must lie in (0,1), got {}", self.support_floor));
        }
        let dim = p.n as usize;
        self.initial.u0.check("initial.u0", dim, &mut issues);
        self.initial.u1.check("initial.u1", dim, &mut issues);
        issues
    }

    pub fn validate(&self) -> Result<()> {
        let issues = self.issues();
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::Configuration(issues))
        }
    }

    pub fn make_grid(&self) -> Result<SpatialGrid> {
        make_grid(self.params.n as usize, self.grid.m, self.grid.l)
    }

    /// Distance from the box centre beyond which the periodic surrogate stops
    /// representing the whole-space problem.
    pub fn horizon_radius(&self) -> f64 {
        0.5 * self.grid.l - self.horizon_padding
    }
}
