//! Experiment harness around `reconc_core`: configuration, data ingestion,
//! temporal aggregation, method runs, scoring and the built-in demos.

pub mod aggregate;
pub mod config;
pub mod demo;
pub mod error;
pub mod io;
pub mod methods;
pub mod pipeline;
pub mod synthetic;

pub use config::{ExperimentConfig, HierarchySource, Method, SamplerConfig, SEED_ENV};
pub use error::{HarnessError, Result};
pub use pipeline::{run_reconcile, run_score};
