use thiserror::Error;

/// Errors produced by hierarchy construction, reconciliation and scoring.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid aggregation: {0}")]
    InvalidAggregation(String),

    #[error("duplicate level: {0}")]
    DuplicateLevel(String),

    #[error("invalid hierarchy: {0}")]
    InvalidHierarchy(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionError { expected: usize, got: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("degenerate samples: {0}")]
    DegenerateSamples(String),

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("numerical error: {0}")]
    NumericalError(String),

    #[error("missing forecast for node {0}")]
    MissingForecast(String),

    #[error("product support has {cells} cells, above the cap of {cap}; use the MCMC reconciler")]
    SupportTooLarge { cells: u128, cap: u128 },

    #[error("evidence on upper node {0} has no mass on any reachable sum")]
    IncompatibleEvidence(usize),

    #[error("sampler stuck: {0}")]
    SamplerStuck(String),

    #[error("correlation undefined: node {0} has zero variance")]
    UndefinedCorrelation(usize),

    #[error("MASE scale is zero (constant training series)")]
    UndefinedScale,

    #[error("interval lower bound {lower} exceeds upper bound {upper}")]
    InvalidInterval { lower: f64, upper: f64 },

    #[error("skill score undefined: both metrics are zero")]
    UndefinedSkill,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
