//! Running one reconciliation method on one series.

use std::collections::BTreeMap;

use rand::Rng;
use reconc_core::{
    reconcile_exact, reconcile_gaussian, reconcile_mcmc, reconcile_truncated, summarize,
    BaseForecastSet, CountPmf, CovarianceSpec, Error as CoreError, ExactJoint, ForecastSpec,
    GaussianForecast, GaussianReconciled, Hierarchy, MarginalSummary, ReconciledJoint,
    SampledJoint,
};
use serde::Serialize;

use crate::config::{ExperimentConfig, Method};
use crate::error::{HarnessError, Result};

/// Marginal forecast of one node.
#[derive(Debug, Clone)]
pub enum NodeMarginal {
    Count(MarginalSummary),
    Gaussian(GaussianForecast),
}

/// Joint representation used to draw full-hierarchy vectors.
#[derive(Debug, Clone)]
pub enum JointRepr {
    Exact(ExactJoint),
    Sampled(SampledJoint),
    Gaussian(GaussianReconciled),
    /// Unreconciled base forecasts, drawn independently per node.
    Independent,
}

#[derive(Debug, Clone)]
pub struct MethodResult {
    pub method: Method,
    pub alpha: f64,
    pub marginals: Vec<NodeMarginal>,
    pub joint: JointRepr,
}

/// Per-node summary written to the summaries JSON.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeSummary {
    pub label: String,
    pub level: String,
    pub mean: f64,
    pub variance: f64,
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Orders a label-keyed forecast map by node. Labels not in the hierarchy
/// are rejected.
pub fn node_specs(
    h: &Hierarchy,
    map: &BTreeMap<String, ForecastSpec>,
) -> Result<Vec<Option<ForecastSpec>>> {
    if let Some(unknown) = map.keys().find(|l| h.node_index(l).is_none()) {
        return Err(HarnessError::InvalidConfig(format!(
            "forecast for unknown node {unknown}"
        )));
    }
    Ok(h.labels().iter().map(|l| map.get(l).cloned()).collect())
}

fn require<'a>(
    h: &Hierarchy,
    specs: &'a [Option<ForecastSpec>],
    node: usize,
) -> Result<&'a ForecastSpec> {
    specs[node]
        .as_ref()
        .ok_or_else(|| CoreError::MissingForecast(h.labels()[node].clone()).into())
}

fn count_inputs(h: &Hierarchy, specs: &[Option<ForecastSpec>]) -> Result<BaseForecastSet> {
    let off = h.n_upper();
    let bottom = (0..h.m())
        .map(|j| {
            require(h, specs, off + j)?
                .to_count_pmf()
                .map_err(Into::into)
        })
        .collect::<Result<Vec<_>>>()?;
    let upper = specs[..off]
        .iter()
        .map(|s| s.as_ref().map(ForecastSpec::to_count_pmf).transpose())
        .collect::<reconc_core::Result<Vec<_>>>()?;
    Ok(BaseForecastSet::new(h, bottom, upper)?)
}

fn gaussian_inputs(h: &Hierarchy, specs: &[Option<ForecastSpec>]) -> Result<Vec<GaussianForecast>> {
    (0..h.n())
        .map(|i| require(h, specs, i)?.to_gaussian().map_err(Into::into))
        .collect()
}

/// Tabulated, renormalized pmf up to the `1 - epsilon` quantile.
fn truncated_table(pmf: &CountPmf, epsilon: f64) -> Vec<f64> {
    let mut t = pmf.table(pmf.quantile_truncate(epsilon));
    let total: f64 = t.iter().sum();
    t.iter_mut().for_each(|p| *p /= total);
    t
}

pub fn run_method(
    method: Method,
    h: &Hierarchy,
    specs: &[Option<ForecastSpec>],
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<MethodResult> {
    let alpha = cfg.alpha;
    let from_joint = |joint: JointRepr| -> Result<MethodResult> {
        let rj = match &joint {
            JointRepr::Exact(j) => ReconciledJoint::Exact(j.clone()),
            JointRepr::Sampled(s) => ReconciledJoint::Sampled(s.clone()),
            _ => unreachable!("count joints only"),
        };
        let marginals = summarize(&rj, h, alpha)?
            .into_iter()
            .map(NodeMarginal::Count)
            .collect();
        Ok(MethodResult {
            method,
            alpha,
            marginals,
            joint,
        })
    };
    let gaussian =
        |spec_of: &dyn Fn(&[GaussianForecast]) -> CovarianceSpec| -> Result<MethodResult> {
            let base = gaussian_inputs(h, specs)?;
            let rec = reconcile_gaussian(h, &base, &spec_of(&base))?;
            let marginals = (0..h.n())
                .map(|i| {
                    let (mean, var) = rec.marginal(i);
                    GaussianForecast::new(mean, var.max(reconc_core::pmf::VARIANCE_FLOOR))
                        .map(NodeMarginal::Gaussian)
                })
                .collect::<reconc_core::Result<Vec<_>>>()?;
            Ok(MethodResult {
                method,
                alpha,
                marginals,
                joint: JointRepr::Gaussian(rec),
            })
        };

    match method {
        Method::ProbCountExact => {
            let base = count_inputs(h, specs)?;
            let joint = reconcile_exact(h, &base, &cfg.exact_options())?;
            from_joint(JointRepr::Exact(joint))
        }
        Method::ProbCountMcmc => {
            let base = count_inputs(h, specs)?;
            let joint = reconcile_mcmc(h, &base, &cfg.mcmc_options(seed))?;
            from_joint(JointRepr::Sampled(joint))
        }
        Method::Truncated => {
            let base = gaussian_inputs(h, specs)?;
            let n = cfg.sampler.chains * cfg.sampler.draws;
            let joint = reconcile_truncated(
                h,
                &base,
                &CovarianceSpec::hierarchy_variance(&base),
                n,
                seed,
            )?;
            from_joint(JointRepr::Sampled(joint))
        }
        Method::Normal => gaussian(&CovarianceSpec::hierarchy_variance),
        Method::StructuralScaling => gaussian(&|_| CovarianceSpec::StructuralScaling),
        Method::Base => {
            let marginals = (0..h.n())
                .map(|i| {
                    let spec = require(h, specs, i)?;
                    Ok(match spec.to_count_pmf() {
                        Ok(pmf) => NodeMarginal::Count(MarginalSummary::from_pmf(
                            truncated_table(&pmf, cfg.epsilon),
                            alpha,
                        )),
                        Err(_) => NodeMarginal::Gaussian(spec.to_gaussian()?),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(MethodResult {
                method,
                alpha,
                marginals,
                joint: JointRepr::Independent,
            })
        }
    }
}

impl NodeMarginal {
    pub fn mean(&self) -> f64 {
        match self {
            NodeMarginal::Count(s) => s.mean,
            NodeMarginal::Gaussian(g) => g.mean,
        }
    }

    /// Central `1 - alpha` interval: count quantiles, or normal quantiles
    /// for Gaussian marginals.
    pub fn interval(&self, alpha: f64) -> (f64, f64) {
        match self {
            NodeMarginal::Count(s) => (s.lower as f64, s.upper as f64),
            NodeMarginal::Gaussian(g) => (g.quantile(alpha / 2.0), g.quantile(1.0 - alpha / 2.0)),
        }
    }

    pub fn rps(&self, y: u64) -> f64 {
        match self {
            NodeMarginal::Count(s) => reconc_core::scoring::rps_tabulated(&s.pmf, y),
            NodeMarginal::Gaussian(g) => reconc_core::scoring::rps_gaussian_cc(g, y),
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random::<f64>();
        match self {
            NodeMarginal::Count(s) => {
                let mut acc = 0.0;
                for (k, p) in s.pmf.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return k as f64;
                    }
                }
                s.pmf.len().saturating_sub(1) as f64
            }
            NodeMarginal::Gaussian(g) => g.quantile(u.clamp(1e-300, 1.0 - 1e-16)),
        }
    }
}

impl MethodResult {
    pub fn summaries(&self, h: &Hierarchy) -> Vec<NodeSummary> {
        self.marginals
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let (lower, upper) = m.interval(self.alpha);
                let (mean, variance, median) = match m {
                    NodeMarginal::Count(s) => (s.mean, s.variance, s.median as f64),
                    NodeMarginal::Gaussian(g) => (g.mean, g.variance, g.mean),
                };
                NodeSummary {
                    label: h.labels()[i].clone(),
                    level: h.levels()[h.node_level(i)].name.clone(),
                    mean,
                    variance,
                    median,
                    lower,
                    upper,
                }
            })
            .collect()
    }

    /// `n` full-hierarchy vectors from the method's joint.
    pub fn draw_full<R: Rng + ?Sized>(
        &self,
        h: &Hierarchy,
        n: usize,
        rng: &mut R,
    ) -> Vec<Vec<f64>> {
        let full = |b: &[u64]| -> Vec<f64> {
            h.aggregate(b)
                .expect("bottom length")
                .into_iter()
                .map(|v| v as f64)
                .collect()
        };
        match &self.joint {
            JointRepr::Exact(j) => j.sample(n, rng).iter().map(|b| full(b)).collect(),
            JointRepr::Sampled(s) => (0..n)
                .map(|_| full(s.draw(rng.random_range(0..s.n_draws()))))
                .collect(),
            JointRepr::Gaussian(g) => g.sample_full(h, n, rng),
            JointRepr::Independent => (0..n)
                .map(|_| self.marginals.iter().map(|m| m.draw(rng)).collect())
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use reconc_core::pmf::DistSpec;

    fn cfg() -> ExperimentConfig {
        serde_json::from_str(
            r#"{"hierarchy": {"bottom": 2, "factors": [2]}, "sampler": {"seed": 1, "draws": 500},
                "output_dir": "o"}"#,
        )
        .unwrap()
    }

    fn specs(y: f64, b1: f64, b2: f64) -> Vec<Option<ForecastSpec>> {
        [y, b1, b2]
            .iter()
            .map(|&l| Some(ForecastSpec::Dist(DistSpec::Poisson { lambda: l })))
            .collect()
    }

    #[test]
    fn normal_with_coherent_means_returns_inputs() {
        let h = Hierarchy::temporal(2, &[2]).unwrap();
        let r = run_method(Method::Normal, &h, &specs(6.0, 2.0, 4.0), &cfg(), 0).unwrap();
        for (m, want) in r.marginals.iter().zip([6.0, 2.0, 4.0]) {
            assert!((m.mean() - want).abs() < 1e-10);
        }
    }

    #[test]
    fn missing_bottom_forecast() {
        let h = Hierarchy::temporal(2, &[2]).unwrap();
        let mut s = specs(6.0, 2.0, 4.0);
        s[2] = None;
        let err = run_method(Method::ProbCountExact, &h, &s, &cfg(), 0).unwrap_err();
        assert!(
            matches!(err, HarnessError::Core(CoreError::MissingForecast(ref l)) if l == "k1_2")
        );
        // count methods tolerate missing uppers, Gaussian ones do not
        let mut s = specs(6.0, 2.0, 4.0);
        s[0] = None;
        run_method(Method::ProbCountExact, &h, &s, &cfg(), 0).unwrap();
        assert!(run_method(Method::Normal, &h, &s, &cfg(), 0).is_err());
    }

    #[test]
    fn draws_have_full_length() {
        let h = Hierarchy::temporal(2, &[2]).unwrap();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        for m in Method::ALL {
            let r = run_method(m, &h, &specs(9.0, 2.0, 4.0), &cfg(), 3).unwrap();
            let d = r.draw_full(&h, 10, &mut rng);
            assert_eq!(d.len(), 10);
            assert!(d.iter().all(|v| v.len() == 3));
            if m != Method::Base {
                assert!(d.iter().all(|v| (v[0] - v[1] - v[2]).abs() < 1e-9), "{m}");
            }
            assert_eq!(r.summaries(&h).len(), 3);
        }
    }
}
