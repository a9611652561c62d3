use thiserror::Error;

use crate::optimize::OptimizationTrace;
use crate::space::{Family, ResourceConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("search space axes must be non-empty")]
    EmptyAxis,
    #[error("invalid axis: {0}")]
    InvalidAxis(String),
    #[error("unknown instance family `{0}`")]
    UnknownFamily(Family),
    #[error("configuration {0} is not on the space axes")]
    OffAxis(ResourceConfig),
    #[error("memory limit {0} MB is not on the memory axis")]
    OffAxisMemory(u32),
    #[error("search space exhausted: no configuration above {floor_mb} MB remains")]
    Exhausted { floor_mb: u32 },
}

#[derive(Debug, Error)]
pub enum PricingError {
    #[error("price system is underdetermined: rank {rank} < {unknowns} unknowns")]
    Underdetermined { rank: usize, unknowns: usize },
    #[error("solved rate for {group} is not positive ({value})")]
    NegativeRate { group: String, value: f64 },
    #[error("price system is inconsistent: relative residual {residual:e} exceeds {tolerance:e}")]
    Inconsistent { residual: f64, tolerance: f64 },
    #[error("invalid price record for `{family}`: {reason}")]
    InvalidRecord { family: String, reason: String },
    #[error("no price for instance family `{0}`")]
    UnknownFamily(Family),
    #[error("price sheet is empty")]
    Empty,
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("no recorded runs for function `{function}`, input `{input}`, config {config}")]
    MissingKey {
        function: String,
        input: String,
        config: ResourceConfig,
    },
    #[error("cannot aggregate an empty list of runs")]
    EmptyRuns,
    #[error("invalid grid record: {0}")]
    InvalidRecord(String),
    #[error("invalid synthetic function spec: {0}")]
    InvalidSpec(String),
    #[error("unknown synthetic preset `{0}`")]
    UnknownPreset(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurrogateError {
    #[error("cannot fit a surrogate without observations")]
    NoObservations,
    #[error("observation values must be finite")]
    NonFinite,
    #[error("input has dimension {got}, model expects {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid surrogate hyperparameters: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error("requested {requested} samples from a space of {available}")]
    TooManySamples { requested: usize, available: usize },
    #[error("invalid optimization settings: {0}")]
    InvalidSettings(String),
    #[error("weighted objective needs time and cost normalizers")]
    MissingNormalizers,
    #[error("search space exhausted after {} trials", .trace.trials.len())]
    SpaceExhausted { trace: Box<OptimizationTrace> },
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Pricing(#[from] PricingError),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
}

/// Errors from the analysis layer (fronts, provider, metrics).
#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("no usable configurations: {0}")]
    Empty(String),
    #[error("no ground truth for {0}")]
    MissingTruth(ResourceConfig),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Pricing(#[from] PricingError),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
}
