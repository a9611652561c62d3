//! Evaluation metrics over traces and ground-truth grids.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bench::{TruthTable, Workload};
use crate::error::{AnalysisError, OptimizeError};
use crate::multiobj::{ModelPredictor, Predictor, TruthPredictor};
use crate::optimize::{run, Method, Metric, ObjectiveSpec, OptimizationTrace, Problem, RunSettings};
use crate::pricing::{MemoryCharge, PricingTable};
use crate::provider::predicted_argmin;
use crate::seed;
use crate::space::{Family, ResourceConfig, SearchSpace, Strategy};
use crate::surrogate::SurrogateSpec;

/// A trial at or above this multiple of the optimum is a violation.
pub const VIOLATION_FACTOR: f64 = 1.5;
/// Bootstrap resamples for convergence bands.
pub const DEFAULT_RESAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyGap {
    pub strategy: String,
    pub best_time_config: ResourceConfig,
    pub time_ratio: f64,
    pub best_cost_config: ResourceConfig,
    pub cost_ratio: f64,
}

fn best_in(space: &SearchSpace, value: impl Fn(&ResourceConfig) -> Option<f64>) -> Option<(ResourceConfig, f64)> {
    let mut configs = space.enumerate();
    configs.sort();
    configs
        .into_iter()
        .filter_map(|c| value(&c).map(|v| (c, v)))
        .fold(None, |best, (c, v)| match best {
            Some((_, bv)) if bv <= v => best,
            _ => Some((c, v)),
        })
}

/// Best time and cost inside each standard strategy subspace (single-family
/// ones on `family`), divided by the best over the whole decoupled space.
/// Fixed-CPU subspaces bill consumed memory.
pub fn strategy_gap(
    truth: &TruthTable,
    pricing: &PricingTable,
    space: &SearchSpace,
    family: &Family,
) -> Result<Vec<StrategyGap>, AnalysisError> {
    let best_of = |strategy: &Strategy| -> Result<_, AnalysisError> {
        let sub = space.with_strategy(strategy.clone())?;
        let charge = MemoryCharge::for_strategy(strategy);
        let t = best_in(&sub, |c| truth.time(c));
        let k = best_in(&sub, |c| truth.cost(c, pricing, charge, false));
        match (t, k) {
            (Some(t), Some(k)) => Ok((t, k)),
            _ => Err(AnalysisError::Empty(format!("no working config under {}", strategy.name()))),
        }
    };
    let ((_, base_t), (_, base_k)) = best_of(&Strategy::Decoupled)?;
    Strategy::standard_set(family)
        .iter()
        .map(|s| {
            let ((tc, t), (kc, k)) = best_of(s)?;
            Ok(StrategyGap {
                strategy: s.name(),
                best_time_config: tc,
                time_ratio: t / base_t,
                best_cost_config: kc,
                cost_ratio: k / base_k,
            })
        })
        .collect()
}

/// Values at or above `factor * best`; `None` marks a failed trial and counts.
pub fn count_violations(values: impl IntoIterator<Item = Option<f64>>, best: f64, factor: f64) -> usize {
    values
        .into_iter()
        .filter(|v| v.is_none_or(|v| v >= factor * best))
        .count()
}

/// Trials of `trace` that violate against the grid optimum `grid_best`.
pub fn violations(trace: &OptimizationTrace, grid_best: f64, factor: f64) -> usize {
    count_violations(trace.trials.iter().map(|t| t.value), grid_best, factor)
}

/// Mean absolute percentage error of (actual, predicted) pairs.
pub fn mape(pairs: &[(f64, f64)]) -> Result<f64, AnalysisError> {
    if pairs.is_empty() {
        return Err(AnalysisError::Empty("no pairs to compare".into()));
    }
    Ok(pairs.iter().map(|(a, p)| ((a - p) / a).abs()).sum::<f64>() / pairs.len() as f64 * 100.0)
}

/// MAPE over every working config with a ground-truth value.
pub fn mape_all(predictor: &dyn Predictor, actual: &[(ResourceConfig, f64)]) -> Result<f64, AnalysisError> {
    let mut pairs = Vec::with_capacity(actual.len());
    for (c, a) in actual {
        if let Some(p) = predictor.predict(c)? {
            pairs.push((*a, p));
        }
    }
    mape(&pairs)
}

/// MAPE over the predicted-best config of each family of `space`.
pub fn mape_family_best(
    predictor: &dyn Predictor,
    actual: &[(ResourceConfig, f64)],
    space: &SearchSpace,
) -> Result<f64, AnalysisError> {
    let mut pairs = Vec::new();
    for family in &space.family_axis {
        let configs = space.enumerate().into_iter().filter(|c| &c.family == family);
        if let Some((c, p)) = predicted_argmin(predictor, configs)? {
            if let Some((_, a)) = actual.iter().find(|(x, _)| *x == c) {
                pairs.push((*a, p));
            }
        }
    }
    mape(&pairs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputGap {
    pub input_id: String,
    pub generic_config: ResourceConfig,
    pub specific_config: ResourceConfig,
    pub optimum_config: ResourceConfig,
    /// `None` when the config fails on this input.
    pub generic_time: Option<f64>,
    pub specific_time: Option<f64>,
    pub optimum_time: f64,
    pub generic_ratio: Option<f64>,
    pub specific_ratio: Option<f64>,
}

/// Compares, per input, the config recommended on `reference_input`, the
/// config recommended on that input itself and the input's true optimum.
pub fn input_model_gap(
    workload: &Workload,
    reference_input: &str,
    space: &SearchSpace,
    recommend: impl Fn(&Workload) -> Result<ResourceConfig, AnalysisError>,
) -> Result<Vec<InputGap>, AnalysisError> {
    let generic = recommend(&workload.with_input(reference_input))?;
    let mut out = Vec::new();
    for input in workload.inputs() {
        let w = workload.with_input(&input);
        let truth = w.truth(space)?;
        let (optimum_config, optimum_time) =
            best_in(space, |c| truth.time(c)).ok_or_else(|| AnalysisError::Empty(format!("input {input} has no working config")))?;
        let specific = recommend(&w)?;
        let generic_time = truth.time(&generic);
        let specific_time = truth.time(&specific);
        out.push(InputGap {
            input_id: input,
            generic_config: generic.clone(),
            specific_config: specific,
            optimum_config,
            generic_ratio: generic_time.map(|t| t / optimum_time),
            specific_ratio: specific_time.map(|t| t / optimum_time),
            generic_time,
            specific_time,
            optimum_time,
        });
    }
    Ok(out)
}

/// Recommendation of a time-objective run with `settings`.
pub fn recommend_by_optimizing(
    workload: &Workload,
    space: &SearchSpace,
    pricing: &PricingTable,
    settings: &RunSettings,
) -> Result<ResourceConfig, AnalysisError> {
    let problem = Problem {
        evaluator: workload,
        pricing,
        objective: ObjectiveSpec::Time,
        function_id: workload.name(),
        input_id: workload.input_id(),
    };
    let trace = run(&problem, space, settings)?;
    trace
        .best()
        .map(|t| t.config.clone())
        .ok_or_else(|| AnalysisError::Empty("optimization found no working config".into()))
}

/// True value of the incumbent after each trial divided by `optimum`,
/// padded to `len` with the last entry. `None` until a trial succeeds or
/// when the incumbent has no ground truth.
pub fn normalized_incumbents(
    trace: &OptimizationTrace,
    true_value: impl Fn(&ResourceConfig) -> Option<f64>,
    optimum: f64,
    len: usize,
) -> Vec<Option<f64>> {
    let mut out: Vec<Option<f64>> = trace
        .incumbents()
        .iter()
        .map(|c| c.as_ref().and_then(&true_value).map(|v| v / optimum))
        .collect();
    let last = out.last().copied().flatten();
    out.resize(len.max(out.len()), last);
    out
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(percentile(&v, 0.5))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub trial: usize,
    /// Seeds with an incumbent at this trial.
    pub n: usize,
    pub median: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Median over seeds of each trial's value with a 95% percentile-bootstrap
/// band for the median.
pub fn convergence_curve(series: &[Vec<Option<f64>>], resamples: usize, rng_seed: u64) -> Result<Vec<CurvePoint>, AnalysisError> {
    if series.len() < 2 {
        return Err(AnalysisError::InvalidArgument("confidence bands need at least two seeds".into()));
    }
    if resamples == 0 {
        return Err(AnalysisError::InvalidArgument("need at least one bootstrap resample".into()));
    }
    let len = series.iter().map(Vec::len).max().unwrap_or(0);
    let mut rng = seed::rng(rng_seed);
    let mut out = Vec::new();
    for t in 0..len {
        let values: Vec<f64> = series.iter().filter_map(|s| s.get(t).copied().flatten()).collect();
        let Some(mid) = median(&values) else {
            continue;
        };
        let mut medians: Vec<f64> = (0..resamples)
            .map(|_| {
                let sample: Vec<f64> = (0..values.len())
                    .map(|_| values[rng.random_range(0..values.len())])
                    .collect();
                median(&sample).expect("non-empty sample")
            })
            .collect();
        medians.sort_by(f64::total_cmp);
        out.push(CurvePoint {
            trial: t,
            n: values.len(),
            median: mid,
            lo: percentile(&medians, 0.025),
            hi: percentile(&medians, 0.975),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSettings {
    pub methods: Vec<Method>,
    pub metric: Metric,
    pub seeds: Vec<u64>,
    pub budget: usize,
    pub n_init: usize,
    pub resamples: usize,
    /// Family of the single-family strategies in the gap table.
    pub strategy_family: Family,
}

impl Default for ReportSettings {
    fn default() -> Self {
        ReportSettings {
            methods: Method::ALL.to_vec(),
            metric: Metric::Time,
            seeds: (0..10).collect(),
            budget: crate::optimize::DEFAULT_BUDGET,
            n_init: crate::optimize::DEFAULT_N_INIT,
            resamples: DEFAULT_RESAMPLES,
            strategy_family: Family::from(crate::space::DEFAULT_FAMILY),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    /// Per seed: true value of the final incumbent over the grid optimum.
    pub normalized_best: Vec<Option<f64>>,
    pub median_normalized_best: Option<f64>,
    pub violations: Vec<usize>,
    /// Seeds whose run exhausted the space.
    pub failed_runs: usize,
    pub convergence: Vec<CurvePoint>,
    /// Median over seeds; model-based methods only.
    pub mape_all: Option<f64>,
    pub mape_family_best: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionReport {
    pub function_id: String,
    pub input_id: String,
    pub metric: Metric,
    pub optimum_config: ResourceConfig,
    pub optimum: f64,
    pub strategy_gaps: Vec<StrategyGap>,
    pub methods: Vec<MethodSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub settings: ReportSettings,
    pub functions: Vec<FunctionReport>,
}

/// Runs every method over every seed on one function and summarizes.
/// Returns the report with all completed traces.
pub fn evaluate_function(
    workload: &Workload,
    space: &SearchSpace,
    pricing: &PricingTable,
    settings: &ReportSettings,
) -> Result<(FunctionReport, Vec<OptimizationTrace>), AnalysisError> {
    let truth = workload.truth(space)?;
    let mut oracle = TruthPredictor::new(&truth, settings.metric, pricing);
    oracle.charge = MemoryCharge::for_strategy(&space.strategy);
    let actual: Vec<(ResourceConfig, f64)> = space
        .enumerate()
        .into_iter()
        .filter_map(|c| oracle.predict(&c).ok().flatten().map(|v| (c, v)))
        .collect();
    let (optimum_config, optimum) = best_in(space, |c| oracle.predict(c).ok().flatten())
        .ok_or_else(|| AnalysisError::Empty("grid has no working config".into()))?;
    let true_value = |c: &ResourceConfig| oracle.predict(c).ok().flatten();
    let objective = match settings.metric {
        Metric::Time => ObjectiveSpec::Time,
        Metric::Cost => ObjectiveSpec::Cost,
    };
    let problem = Problem {
        evaluator: workload,
        pricing,
        objective,
        function_id: workload.name(),
        input_id: workload.input_id(),
    };

    let mut traces = Vec::new();
    let mut methods = Vec::new();
    for (mi, &method) in settings.methods.iter().enumerate() {
        let mut normalized_best = Vec::new();
        let mut series = Vec::new();
        let mut violation_counts = Vec::new();
        let mut mapes = Vec::new();
        let mut mapes_family = Vec::new();
        let mut failed_runs = 0;
        for &s in &settings.seeds {
            let rs = RunSettings::new(method, s)
                .with_budget(settings.budget)
                .with_n_init(settings.n_init.min(settings.budget));
            let trace = match run(&problem, space, &rs) {
                Ok(t) => t,
                Err(OptimizeError::SpaceExhausted { trace }) => {
                    failed_runs += 1;
                    violation_counts.push(violations(&trace, optimum, VIOLATION_FACTOR));
                    normalized_best.push(None);
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            let curve = normalized_incumbents(&trace, true_value, optimum, settings.budget);
            normalized_best.push(curve.last().copied().flatten());
            series.push(curve);
            violation_counts.push(violations(&trace, optimum, VIOLATION_FACTOR));
            if let Method::Bo(kind) = method {
                let spec = SurrogateSpec::new(kind, seed::derive(s, &[seed::label("mape")]));
                let model = ModelPredictor::from_trace(&trace, space, &spec)?;
                mapes.push(mape_all(&model, &actual)?);
                // every predicted family best may sit on a failing config
                match mape_family_best(&model, &actual, &model.space) {
                    Ok(v) => mapes_family.push(v),
                    Err(AnalysisError::Empty(_)) => {}
                    Err(e) => return Err(e),
                }
            }
            traces.push(trace);
        }
        let finished: Vec<f64> = normalized_best.iter().flatten().copied().collect();
        let convergence = if series.len() >= 2 {
            convergence_curve(&series, settings.resamples, seed::derive(mi as u64, &[seed::label("bootstrap")]))?
        } else {
            Vec::new()
        };
        methods.push(MethodSummary {
            method,
            median_normalized_best: median(&finished),
            normalized_best,
            violations: violation_counts,
            failed_runs,
            convergence,
            mape_all: median(&mapes),
            mape_family_best: median(&mapes_family),
        });
    }
    let report = FunctionReport {
        function_id: workload.name().to_string(),
        input_id: workload.input_id().to_string(),
        metric: settings.metric,
        optimum_config,
        optimum,
        strategy_gaps: strategy_gap(&truth, pricing, space, &settings.strategy_family)?,
        methods,
    };
    Ok((report, traces))
}
