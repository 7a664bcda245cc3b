//! Reading run configs and sweep plans, with field paths in every error.

use std::path::Path;

use memwave_core::RunConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::{CmdResult, Failure};

/// Default cap on the cartesian size of a sweep.
pub const MAX_RUNS: usize = 512;

fn parse<T: DeserializeOwned>(path: &Path) -> CmdResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let at = e.path().to_string();
        let at = if at == "." { String::new() } else { format!(" at {at}") };
        Failure::config(format!("{}{at}: {}", path.display(), e.inner()))
    })
}

fn check(config: &RunConfig, origin: &str) -> CmdResult<()> {
    let issues = config.issues();
    if issues.is_empty() {
        return Ok(());
    }
    let list: Vec<String> = issues.iter().map(|i| format!("  {}: {}", i.path, i.message)).collect();
    Err(Failure::config(format!("{origin} is invalid:\n{}", list.join("\n"))))
}

pub fn load_config(path: &Path) -> CmdResult<RunConfig> {
    let config: RunConfig = parse(path)?;
    check(&config, &path.display().to_string())?;
    Ok(config)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepAxes {
    pub p: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Scale factors applied to both u₀ and u₁.
    pub amplitude: Vec<f64>,
    #[serde(rename = "M")]
    pub m: Vec<usize>,
    pub dt: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub base: RunConfig,
    #[serde(default)]
    pub axes: SweepAxes,
    #[serde(default = "default_max_runs")]
    pub max_runs: usize,
}

fn default_max_runs() -> usize {
    MAX_RUNS
}

/// One point of a sweep: the axis values and the config they produce.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub p: f64,
    pub gamma: f64,
    pub amplitude: f64,
    pub m: usize,
    pub dt: f64,
    pub config: RunConfig,
}

fn or_base<T: Copy>(axis: &[T], base: T) -> Vec<T> {
    if axis.is_empty() {
        vec![base]
    } else {
        axis.to_vec()
    }
}

impl ExperimentPlan {
    /// The cartesian product in (p, γ, amplitude, M, dt) order, last axis fastest.
    pub fn expand(&self) -> CmdResult<Vec<SweepPoint>> {
        let b = &self.base;
        let ps = or_base(&self.axes.p, b.params.p);
        let gs = or_base(&self.axes.gamma, b.params.gamma);
        let amps = or_base(&self.axes.amplitude, 1.0);
        let ms = or_base(&self.axes.m, b.grid.m);
        let dts = or_base(&self.axes.dt, b.dt);
        let size = ps.len() * gs.len() * amps.len() * ms.len() * dts.len();
        if size > self.max_runs {
            return Err(Failure::config(format!(
                "sweep has {size} runs, above max_runs = {}; raise max_runs in the plan to allow it",
                self.max_runs
            )));
        }
        let mut out = Vec::with_capacity(size);
        for &p in &ps {
            for &gamma in &gs {
                for &amplitude in &amps {
                    for &m in &ms {
                        for &dt in &dts {
                            let mut config = b.clone();
                            config.params.p = p;
                            config.params.gamma = gamma;
                            config.grid.m = m;
                            config.dt = dt;
                            if amplitude != 1.0 {
                                config.initial = b.initial.scaled(amplitude)?;
                            }
                            check(&config, &format!("sweep point p={p} gamma={gamma} amplitude={amplitude} M={m} dt={dt}"))?;
                            out.push(SweepPoint { p, gamma, amplitude, m, dt, config });
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

pub fn load_plan(path: &Path) -> CmdResult<ExperimentPlan> {
    let plan: ExperimentPlan = parse(path)?;
    check(&plan.base, &format!("{} (base)", path.display()))?;
    Ok(plan)
}
