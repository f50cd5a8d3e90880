use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::Hierarchy;
use crate::joint::ReconciledJoint;

/// Tolerance used when comparing cumulative mass against quantile levels.
const CDF_TOL: f64 = 1e-12;

/// Marginal of one node under a reconciled joint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalSummary {
    pub mean: f64,
    pub variance: f64,
    pub median: u64,
    /// Probabilities for `0..pmf.len()`.
    pub pmf: Vec<f64>,
    /// Central interval at level `1 - alpha`.
    pub lower: u64,
    pub upper: u64,
}

impl MarginalSummary {
    /// Summary of a tabulated pmf. The interval is equal-tailed: `lower` is
    /// the largest `l` with `P(X < l) <= alpha/2`, `upper` the smallest `u`
    /// with `P(X <= u) >= 1 - alpha/2`.
    pub fn from_pmf(pmf: Vec<f64>, alpha: f64) -> Self {
        let mean: f64 = pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        let variance = pmf
            .iter()
            .enumerate()
            .map(|(k, p)| (k as f64 - mean).powi(2) * p)
            .sum::<f64>()
            .max(0.0);
        let total: f64 = pmf.iter().sum();
        let quantile = |level: f64, strict: bool| -> u64 {
            let mut acc = 0.0;
            for (k, p) in pmf.iter().enumerate() {
                acc += p / total;
                let hit = if strict {
                    acc > level + CDF_TOL
                } else {
                    acc >= level - CDF_TOL
                };
                if hit {
                    return k as u64;
                }
            }
            pmf.len().saturating_sub(1) as u64
        };
        Self {
            mean,
            variance,
            median: quantile(0.5, false),
            lower: quantile(alpha / 2.0, true),
            upper: quantile(1.0 - alpha / 2.0, false),
            pmf,
        }
    }

    pub fn cdf(&self, k: u64) -> f64 {
        self.pmf.iter().take(k as usize + 1).sum()
    }
}

/// Per-node marginal summaries, upper nodes first, at interval level
/// `1 - alpha`.
pub fn summarize(
    joint: &ReconciledJoint,
    h: &Hierarchy,
    alpha: f64,
) -> Result<Vec<MarginalSummary>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha {alpha}")));
    }
    if joint.m() != h.m() {
        return Err(Error::DimensionError {
            expected: h.m(),
            got: joint.m(),
        });
    }
    let mut pmfs: Vec<Vec<f64>> = vec![Vec::new(); h.n()];
    for (y, w) in joint.weighted_full_vectors(h) {
        for (pmf, &v) in pmfs.iter_mut().zip(&y) {
            let v = v as usize;
            if pmf.len() <= v {
                pmf.resize(v + 1, 0.0);
            }
            pmf[v] += w;
        }
    }
    Ok(pmfs
        .into_iter()
        .map(|p| MarginalSummary::from_pmf(p, alpha))
        .collect())
}

/// Pearson correlation between two nodes (indices into the full hierarchy)
/// under the joint.
pub fn correlation(
    joint: &ReconciledJoint,
    h: &Hierarchy,
    node_i: usize,
    node_j: usize,
) -> Result<f64> {
    if node_i >= h.n() || node_j >= h.n() {
        return Err(Error::InvalidArgument(format!(
            "node index out of range: {node_i}, {node_j}"
        )));
    }
    let vectors = joint.weighted_full_vectors(h);
    let total: f64 = vectors.iter().map(|(_, w)| w).sum();
    let mean = |k: usize| vectors.iter().map(|(y, w)| y[k] as f64 * w).sum::<f64>() / total;
    let (mi, mj) = (mean(node_i), mean(node_j));
    let mut cov = 0.0;
    let mut vi = 0.0;
    let mut vj = 0.0;
    for (y, w) in &vectors {
        let di = y[node_i] as f64 - mi;
        let dj = y[node_j] as f64 - mj;
        cov += w * di * dj;
        vi += w * di * di;
        vj += w * dj * dj;
    }
    if vi <= 0.0 {
        return Err(Error::UndefinedCorrelation(node_i));
    }
    if vj <= 0.0 {
        return Err(Error::UndefinedCorrelation(node_j));
    }
    Ok((cov / (vi * vj).sqrt()).clamp(-1.0, 1.0))
}
