//! Reconciliation of count forecasts by virtual evidence.
//!
//! The probabilistic bottom-up joint puts mass `p(b_1)...p(b_m)` on every
//! bottom vector `b` and derives the uppers as `A b`. Each available upper
//! forecast is then applied as virtual evidence: the weight of `b` is
//! multiplied by the upper forecast's mass at `A_i b` and the result is
//! renormalized. Exact enumeration covers small hierarchies; the
//! Metropolis–Hastings sampler covers the rest.

mod exact;
mod export;
mod mcmc;
mod summary;

pub use exact::{
    bottom_up_exact, condition_on_upper, reconcile_exact, ExactOptions, DEFAULT_CELL_CAP,
};
pub use export::{exact_from_json, exact_to_json, samples_to_csv, ExactJointDoc};
pub use mcmc::{reconcile_mcmc, split_rhat, McmcOptions};
pub use summary::{correlation, summarize, MarginalSummary};

use crate::error::{Error, Result};
use crate::hierarchy::Hierarchy;
use crate::pmf::CountPmf;

/// Base forecasts for one hierarchy: independent bottom pmfs and optional
/// upper pmfs used as virtual evidence. Absent uppers are skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseForecastSet {
    pub bottom: Vec<CountPmf>,
    pub upper: Vec<Option<CountPmf>>,
}

impl BaseForecastSet {
    pub fn new(h: &Hierarchy, bottom: Vec<CountPmf>, upper: Vec<Option<CountPmf>>) -> Result<Self> {
        if bottom.len() != h.m() {
            return Err(Error::DimensionError {
                expected: h.m(),
                got: bottom.len(),
            });
        }
        if upper.len() != h.n_upper() {
            return Err(Error::DimensionError {
                expected: h.n_upper(),
                got: upper.len(),
            });
        }
        Ok(Self { bottom, upper })
    }

    /// Bottom forecasts only; every upper update is skipped.
    pub fn bottom_only(h: &Hierarchy, bottom: Vec<CountPmf>) -> Result<Self> {
        Self::new(h, bottom, vec![None; h.n_upper()])
    }

    /// Indices of the uppers that carry evidence.
    pub fn present_uppers(&self) -> impl Iterator<Item = (usize, &CountPmf)> {
        self.upper
            .iter()
            .enumerate()
            .filter_map(|(i, u)| u.as_ref().map(|p| (i, p)))
    }
}
