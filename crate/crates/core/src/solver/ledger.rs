//! Storage of F_j = |u(t_j)|^p and evaluation of J^α F at later times.

use crate::error::{Error, Result};
use crate::fractional::interval_weights;

/// Accepted snapshots F_j on (possibly non-uniform) nodes t_0 < t_1 < ….
///
/// J^α is the product rule on the piecewise-linear interpolant of F, so on a
/// uniform run it coincides with [`crate::fractional::QuadratureWeights`] and
/// after a step-size change it stays exact for the interpolant.
#[derive(Debug, Clone)]
pub struct MemoryLedger {
    alpha: f64,
    n_points: usize,
    times: Vec<f64>,
    snaps: Vec<Vec<f64>>,
}

impl MemoryLedger {
    pub fn new(alpha: f64, n_points: usize) -> Self {
        Self { alpha, n_points, times: Vec::new(), snaps: Vec::new() }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn snapshot(&self, j: usize) -> &[f64] {
        &self.snaps[j]
    }

    pub fn last_time(&self) -> Option<f64> {
        self.times.last().copied()
    }

    pub fn bytes(&self) -> usize {
        self.snaps.len() * self.n_points * std::mem::size_of::<f64>()
    }

    pub fn push(&mut self, t: f64, f: Vec<f64>) -> Result<()> {
        if f.len() != self.n_points {
            return Err(Error::contract(format!("snapshot has {} points, ledger expects {}", f.len(), self.n_points)));
        }
        if let Some(last) = self.last_time() {
            if !(t > last) {
                return Err(Error::contract(format!("snapshot time {t} does not follow {last}")));
            }
        }
        self.times.push(t);
        self.snaps.push(f);
        Ok(())
    }

    /// Drops every node after index `keep - 1`.
    pub fn truncate(&mut self, keep: usize) {
        self.times.truncate(keep);
        self.snaps.truncate(keep);
    }

    /// Per-node weights at time t ≥ last node for the stored intervals only.
    pub fn weights_at(&self, t: f64) -> Vec<f64> {
        node_weights(self.alpha, &self.times, t)
    }

    /// Σ_j w_j(t) F_j over the stored intervals, into `out`.
    pub fn history_at(&self, t: f64, out: &mut [f64]) {
        let w = self.weights_at(t);
        out.iter_mut().for_each(|v| *v = 0.0);
        for (wj, f) in w.iter().zip(&self.snaps) {
            if *wj != 0.0 {
                for (o, x) in out.iter_mut().zip(f) {
                    *o += wj * x;
                }
            }
        }
    }

    /// Same weights applied to a scalar series aligned with the nodes.
    pub fn scalar_at(&self, values: &[f64], t: f64) -> f64 {
        self.weights_at(t).iter().zip(values).map(|(w, v)| w * v).sum()
    }
}

/// Product-rule weights at evaluation time t for the intervals between
/// consecutive `nodes` (all ≤ t).
pub fn node_weights(alpha: f64, nodes: &[f64], t: f64) -> Vec<f64> {
    let mut w = vec![0.0; nodes.len()];
    for j in 0..nodes.len().saturating_sub(1) {
        let (wa, wb) = interval_weights(alpha, t, nodes[j], nodes[j + 1]);
        w[j] += wa;
        w[j + 1] += wb;
    }
    w
}

/// J^α of a scalar series on arbitrary increasing nodes, at every node.
pub fn rl_integral_nodes(alpha: f64, nodes: &[f64], values: &[f64]) -> Vec<f64> {
    (0..nodes.len())
        .map(|n| node_weights(alpha, &nodes[..=n], nodes[n]).iter().zip(values).map(|(w, v)| w * v).sum())
        .collect()
}
