//! Probabilistic reconciliation of hierarchical count forecasts.
//!
//! Count base forecasts are reconciled by building the probabilistic
//! bottom-up joint and conditioning it on the upper-level forecasts as
//! virtual evidence, either exactly (small hierarchies) or with a
//! Metropolis–Hastings sampler. Gaussian minT reconciliation and a truncated
//! Gaussian variant are provided as baselines, with proper scoring rules to
//! compare them.
//!
//! ```
//! use reconc_core::{reconcile_exact, summarize, BaseForecastSet, CountPmf, ExactOptions, Hierarchy, ReconciledJoint};
//!
//! # fn main() -> reconc_core::Result<()> {
//! let h = Hierarchy::temporal(2, &[2])?;
//! let base = BaseForecastSet::new(
//!     &h,
//!     vec![CountPmf::poisson(2.0)?, CountPmf::poisson(4.0)?],
//!     vec![Some(CountPmf::poisson(9.0)?)],
//! )?;
//! let joint = ReconciledJoint::Exact(reconcile_exact(&h, &base, &ExactOptions::default())?);
//! let summaries = summarize(&joint, &h, 0.1)?;
//! assert!(summaries[1].mean > 2.0 && summaries[2].mean > 4.0);
//! # Ok(())
//! # }
//! ```

pub mod count;
pub mod error;
pub mod gaussian;
pub mod hierarchy;
pub mod joint;
pub mod pmf;
pub mod scoring;

pub use count::{
    bottom_up_exact, condition_on_upper, correlation, exact_from_json, exact_to_json,
    reconcile_exact, reconcile_mcmc, samples_to_csv, summarize, BaseForecastSet, ExactOptions,
    MarginalSummary, McmcOptions,
};
pub use error::{Error, Result};
pub use gaussian::{
    build_w, mint_g, reconcile_gaussian, reconcile_truncated, CovarianceSpec, GaussianReconciled,
};
pub use hierarchy::{CountVector, Hierarchy, Level};
pub use joint::{ExactJoint, ReconciledJoint, SampledJoint, SamplerDiagnostics};
pub use pmf::{
    fit_gaussian, fit_negbinomial, CountPmf, ForecastSamples, ForecastSpec, GaussianForecast,
};
