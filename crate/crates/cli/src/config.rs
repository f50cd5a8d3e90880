//! Experiment configuration files.

use std::fmt;
use std::path::{Path, PathBuf};

use reconc_core::{ExactOptions, Hierarchy, McmcOptions};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Environment variable overriding the configured seed.
pub const SEED_ENV: &str = "RECONC_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "probCount_exact")]
    ProbCountExact,
    #[serde(rename = "probCount_mcmc")]
    ProbCountMcmc,
    #[serde(rename = "normal")]
    Normal,
    #[serde(rename = "structural_scaling")]
    StructuralScaling,
    #[serde(rename = "truncated")]
    Truncated,
    #[serde(rename = "base")]
    Base,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::ProbCountExact,
        Method::ProbCountMcmc,
        Method::Normal,
        Method::StructuralScaling,
        Method::Truncated,
        Method::Base,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::ProbCountExact => "probCount_exact",
            Method::ProbCountMcmc => "probCount_mcmc",
            Method::Normal => "normal",
            Method::StructuralScaling => "structural_scaling",
            Method::Truncated => "truncated",
            Method::Base => "base",
        }
    }

    /// Whether reconciliation itself consumes random numbers.
    pub fn is_stochastic(self) -> bool {
        matches!(self, Method::ProbCountMcmc | Method::Truncated)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method {s}"))
    }
}

/// Where the hierarchy comes from: a temporal specification or a JSON file
/// holding `{m, labels, A}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HierarchySource {
    Temporal(TemporalSource),
    File(FileSource),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemporalSource {
    pub bottom: usize,
    pub factors: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileSource {
    pub file: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    #[serde(default = "default_chains")]
    pub chains: usize,
    /// Kept draws per chain; truncated sampling draws `chains * draws`.
    #[serde(default = "default_draws")]
    pub draws: usize,
    #[serde(default)]
    pub burn_in: Option<usize>,
    #[serde(default)]
    pub thin: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_chains() -> usize {
    4
}
fn default_draws() -> usize {
    10_000
}
fn default_epsilon() -> f64 {
    reconc_core::pmf::DEFAULT_EPSILON
}
fn default_cell_cap() -> u64 {
    reconc_core::count::DEFAULT_CELL_CAP as u64
}
fn default_alpha() -> f64 {
    0.1
}
fn default_es_batch() -> usize {
    1000
}
fn default_baseline() -> Method {
    Method::Normal
}
fn default_methods() -> Vec<Method> {
    vec![Method::ProbCountMcmc, Method::Normal]
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            chains: default_chains(),
            draws: default_draws(),
            burn_in: None,
            thin: None,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub hierarchy: HierarchySource,
    /// Method for `reconcile`.
    #[serde(default)]
    pub method: Option<Method>,
    /// Methods compared by `score`.
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_baseline")]
    pub baseline: Method,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_cell_cap")]
    pub cell_cap: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Draws per batch for the energy score.
    #[serde(default = "default_es_batch")]
    pub es_batch: usize,
    /// Forecast JSON: `{series_id: {node_label: forecast}}`.
    #[serde(default)]
    pub forecasts: Option<PathBuf>,
    /// Observations CSV with columns `series_id,t,value`.
    #[serde(default)]
    pub observations: Option<PathBuf>,
    /// Test split in bottom periods; defaults to one top-level cycle.
    #[serde(default)]
    pub test_length: Option<usize>,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// Reads a config file, resolves relative paths against its directory
    /// and applies a seed override (normally the value of [`SEED_ENV`]).
    pub fn load(path: &Path, seed_override: Option<&str>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut cfg: Self =
            serde_json::from_str(&text).map_err(|e| HarnessError::parse(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        if let Some(s) = seed_override {
            let seed = s
                .trim()
                .parse()
                .map_err(|_| HarnessError::InvalidConfig(format!("{SEED_ENV}={s} is not a u64")))?;
            cfg.sampler.seed = Some(seed);
        }
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let HierarchySource::File(FileSource { file }) = &mut self.hierarchy {
            join(file);
        }
        if let Some(p) = &mut self.forecasts {
            join(p);
        }
        if let Some(p) = &mut self.observations {
            join(p);
        }
        join(&mut self.output_dir);
    }

    pub fn build_hierarchy(&self) -> Result<Hierarchy> {
        match &self.hierarchy {
            HierarchySource::Temporal(t) => Ok(Hierarchy::temporal(t.bottom, &t.factors)?),
            HierarchySource::File(FileSource { file }) => {
                let text = std::fs::read_to_string(file).map_err(|e| HarnessError::io(file, e))?;
                Ok(Hierarchy::from_json(&text)?)
            }
        }
    }

    /// The seed, which must be present when any randomness is consumed.
    pub fn require_seed(&self, why: &str) -> Result<u64> {
        self.sampler
            .seed
            .ok_or_else(|| HarnessError::InvalidConfig(format!("sampler.seed is required {why}")))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(HarnessError::InvalidConfig(format!(
                "alpha {} outside (0, 1)",
                self.alpha
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(HarnessError::InvalidConfig(format!(
                "epsilon {}",
                self.epsilon
            )));
        }
        if self.sampler.chains == 0 || self.sampler.draws == 0 {
            return Err(HarnessError::InvalidConfig(
                "sampler needs chains and draws".into(),
            ));
        }
        if self.es_batch == 0 {
            return Err(HarnessError::InvalidConfig(
                "es_batch must be positive".into(),
            ));
        }
        if let Some(m) = self.method {
            if m.is_stochastic() {
                self.require_seed(&format!("for {m}"))?;
            }
        }
        Ok(())
    }

    pub fn exact_options(&self) -> ExactOptions {
        ExactOptions {
            epsilon: self.epsilon,
            cell_cap: self.cell_cap as u128,
        }
    }

    pub fn mcmc_options(&self, seed: u64) -> McmcOptions {
        McmcOptions {
            n_chains: self.sampler.chains,
            n_samples: self.sampler.draws,
            burn_in: self.sampler.burn_in,
            thin: self.sampler.thin,
            seed,
        }
    }
}

/// Seed for series `index`, decorrelated from neighbouring indices.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> serde_json::Result<ExperimentConfig> {
        serde_json::from_str(s)
    }

    #[test]
    fn defaults_and_names() {
        let cfg = parse(
            r#"{"hierarchy": {"bottom": 12, "factors": [2, 3, 4, 6, 12]},
            "method": "probCount_mcmc", "sampler": {"seed": 1}, "output_dir": "out"}"#,
        )
        .unwrap();
        assert_eq!(cfg.method, Some(Method::ProbCountMcmc));
        assert_eq!(cfg.alpha, 0.1);
        assert_eq!(cfg.es_batch, 1000);
        assert_eq!(cfg.baseline, Method::Normal);
        assert_eq!(cfg.sampler.chains, 4);
        cfg.validate().unwrap();
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
    }

    #[test]
    fn exactly_one_hierarchy_source() {
        assert!(parse(
            r#"{"hierarchy": {"bottom": 4, "factors": [2], "file": "h.json"}, "output_dir": "o"}"#
        )
        .is_err());
        assert!(parse(r#"{"hierarchy": {}, "output_dir": "o"}"#).is_err());
        let f = parse(r#"{"hierarchy": {"file": "h.json"}, "output_dir": "o"}"#).unwrap();
        assert!(matches!(f.hierarchy, HierarchySource::File(_)));
    }

    #[test]
    fn stochastic_method_needs_seed() {
        let cfg = parse(r#"{"hierarchy": {"bottom": 2, "factors": [2]}, "method": "truncated", "output_dir": "o"}"#)
            .unwrap();
        assert!(matches!(
            cfg.validate(),
            Err(HarnessError::InvalidConfig(_))
        ));
        let cfg = parse(r#"{"hierarchy": {"bottom": 2, "factors": [2]}, "method": "normal", "output_dir": "o"}"#)
            .unwrap();
        cfg.validate().unwrap();
    }

    #[test]
    fn derived_seeds_differ() {
        let s: Vec<_> = (0..100).map(|i| derive_seed(7, i)).collect();
        let mut d = s.clone();
        d.sort();
        d.dedup();
        assert_eq!(d.len(), 100);
        assert_eq!(derive_seed(7, 3), s[3]);
    }
}
