//! Resource allocation search for serverless functions.
//!
//! A configuration is a (CPU share, memory limit, instance family) triple on
//! a discrete grid. This crate prices configurations, evaluates them against
//! recorded or synthetic benchmarks, searches the grid with surrogate-guided
//! or model-free optimizers, and analyses the results.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod error;
pub mod eval;
pub mod multiobj;
pub mod optimize;
pub mod pricing;
pub mod provider;
pub mod seed;
pub mod space;
pub mod surrogate;

pub use bench::{
    aggregate, preset, presets, Evaluator, GridDataset, RunResult, SyntheticEvaluator, SyntheticFunctionSpec,
    TruthTable, Workload,
};
pub use error::{AnalysisError, BenchError, OptimizeError, PricingError, SpaceError, SurrogateError};
pub use optimize::{
    expected_improvement, objective_value, run, run_bo, run_sampling, Method, Metric, Normalizers, ObjectiveSpec,
    OptimizationTrace, Problem, RunSettings,
};
pub use pricing::{default_pricing, solve_pricing, InstancePriceRecord, MemoryCharge, PricingTable};
pub use space::{Family, ResourceConfig, SearchSpace, Strategy};
pub use surrogate::{FittedSurrogate, SurrogateKind, SurrogateSpec};
