//! Sequential search over the configuration grid.
//!
//! Model-based runs bootstrap with a few random trials, then repeatedly fit a
//! surrogate to the successful observations and evaluate the untested config
//! with the highest expected improvement. Model-free runs draw random or
//! Latin hypercube samples. In both, an out-of-memory failure slices away
//! every config at or below the failing memory limit.

mod acquisition;
mod design;
mod objective;
mod trace;

use std::collections::{HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use acquisition::{expected_improvement, MIN_STDDEV};
pub use design::{lhs_design, lhs_unit, random_design};
pub use objective::{objective_value, Metric, Normalizers, ObjectiveSpec};
pub use trace::{OptimizationTrace, Phase, SliceEvent, TraceHeader, Trial};

use crate::bench::{Evaluator, RunResult};
use crate::error::{OptimizeError, SpaceError};
use crate::pricing::{billed_cost, MemoryCharge, PricingTable};
use crate::seed;
use crate::space::{ResourceConfig, SearchSpace, Strategy};
use crate::surrogate::{self, Observation, SurrogateKind, SurrogateSpec};

/// Default trial budget.
pub const DEFAULT_BUDGET: usize = 20;
/// Default number of random bootstrap trials for model-based runs.
pub const DEFAULT_N_INIT: usize = 3;

// Independent random streams of one run.
const DESIGN_STREAM: u64 = 1;
const EVAL_STREAM: u64 = 2;
const MODEL_STREAM: u64 = 3;
const FALLBACK_STREAM: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Bo(SurrogateKind),
    Random,
    Lhs,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Bo(SurrogateKind::Gp),
        Method::Bo(SurrogateKind::Rf),
        Method::Bo(SurrogateKind::Et),
        Method::Bo(SurrogateKind::Gbrt),
        Method::Random,
        Method::Lhs,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Bo(k) => k.name(),
            Method::Random => "random",
            Method::Lhs => "lhs",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = OptimizeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(Method::Random),
            "lhs" => Ok(Method::Lhs),
            other => other
                .parse::<SurrogateKind>()
                .map(Method::Bo)
                .map_err(|_| OptimizeError::InvalidSettings(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub method: Method,
    pub budget: usize,
    pub n_init: usize,
    pub seed: u64,
    #[serde(default = "default_estimators")]
    pub n_estimators: usize,
    #[serde(default = "default_restarts")]
    pub gp_restarts: usize,
}

fn default_estimators() -> usize {
    100
}

fn default_restarts() -> usize {
    3
}

impl RunSettings {
    pub fn new(method: Method, seed: u64) -> Self {
        RunSettings {
            method,
            budget: DEFAULT_BUDGET,
            n_init: DEFAULT_N_INIT,
            seed,
            n_estimators: default_estimators(),
            gp_restarts: default_restarts(),
        }
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn with_n_init(mut self, n_init: usize) -> Self {
        self.n_init = n_init;
        self
    }
}

/// What is being optimized: a function under a price table and objective.
#[derive(Clone, Copy)]
pub struct Problem<'a> {
    pub evaluator: &'a dyn Evaluator,
    pub pricing: &'a PricingTable,
    pub objective: ObjectiveSpec,
    pub function_id: &'a str,
    pub input_id: &'a str,
}

impl MemoryCharge {
    /// Fixed-CPU allocations bill consumed memory; everything else bills the limit.
    pub fn for_strategy(strategy: &Strategy) -> MemoryCharge {
        match strategy {
            Strategy::FixedCpu(_) => MemoryCharge::Consumed,
            _ => MemoryCharge::Allocated,
        }
    }
}

/// Duration, cost and objective value of one run; `None` for OOM.
pub fn score_run(
    problem: &Problem<'_>,
    strategy: &Strategy,
    config: &ResourceConfig,
    result: &RunResult,
) -> Result<Option<(f64, f64, f64)>, OptimizeError> {
    let (duration, peak) = match *result {
        RunResult::Ok { duration_ms, peak_mem_mb } => (duration_ms, Some(peak_mem_mb)),
        RunResult::Timeout => (problem.evaluator.timeout_ms(), None),
        RunResult::Oom => return Ok(None),
    };
    let cost = billed_cost(
        config,
        duration,
        peak,
        MemoryCharge::for_strategy(strategy),
        problem.pricing,
        false,
    )?;
    let value = objective_value(&problem.objective, duration, cost)?;
    Ok(Some((duration, cost, value)))
}

/// Mutable state shared by model-based and model-free runs.
struct Runner<'p, 'a> {
    problem: &'p Problem<'a>,
    space: SearchSpace,
    tested: HashSet<ResourceConfig>,
    observations: Vec<(ResourceConfig, f64)>,
    trace: OptimizationTrace,
    best: Option<f64>,
    fallback: ChaCha8Rng,
}

impl<'p, 'a> Runner<'p, 'a> {
    fn new(problem: &'p Problem<'a>, space: &SearchSpace, settings: &RunSettings) -> Self {
        Runner {
            problem,
            space: space.clone(),
            tested: HashSet::new(),
            observations: Vec::new(),
            trace: OptimizationTrace {
                header: TraceHeader {
                    function_id: problem.function_id.to_string(),
                    input_id: problem.input_id.to_string(),
                    seed: settings.seed,
                    objective: problem.objective,
                    method: settings.method,
                    budget: settings.budget,
                    n_init: settings.n_init,
                    space: space.descriptor(),
                },
                trials: Vec::new(),
                slices: Vec::new(),
                stopped_early: false,
            },
            best: None,
            fallback: seed::rng(seed::derive(settings.seed, &[FALLBACK_STREAM])),
        }
    }

    fn candidates(&self) -> Vec<ResourceConfig> {
        self.space
            .enumerate()
            .into_iter()
            .filter(|c| !self.tested.contains(c))
            .collect()
    }

    fn usable(&self, c: &ResourceConfig) -> bool {
        self.space.admits(c) && !self.tested.contains(c)
    }

    fn random_candidate(&mut self) -> Option<ResourceConfig> {
        let cands = self.candidates();
        if cands.is_empty() {
            return None;
        }
        let i = self.fallback.random_range(0..cands.len());
        Some(cands[i].clone())
    }

    /// Evaluates `config` and records the trial, slicing on OOM.
    fn execute(
        &mut self,
        config: ResourceConfig,
        phase: Phase,
        acquisition: Option<f64>,
        run_seed: u64,
    ) -> Result<(), OptimizeError> {
        let index = self.trace.trials.len();
        let eval_seed = seed::derive(run_seed, &[EVAL_STREAM, index as u64]);
        let result = self.problem.evaluator.evaluate(&config, eval_seed)?;
        let scored = score_run(self.problem, &self.space.strategy, &config, &result)?;
        self.tested.insert(config.clone());

        let mut exhausted = false;
        if let Some((_, _, value)) = scored {
            self.observations.push((config.clone(), value));
            if self.best.is_none_or(|b| value < b) {
                self.best = Some(value);
            }
        } else if matches!(result, RunResult::Oom) {
            let floor_mb = match self.space.slice_on_failure(config.memory_mb) {
                Ok(sliced) => {
                    self.space = sliced;
                    self.space.memory_floor_mb
                }
                Err(SpaceError::Exhausted { floor_mb }) => {
                    exhausted = true;
                    self.space.memory_floor_mb = floor_mb;
                    floor_mb
                }
                Err(e) => return Err(e.into()),
            };
            let floor = self.space.memory_floor_mb;
            self.observations.retain(|(c, _)| c.memory_mb > floor);
            self.trace.slices.push(SliceEvent {
                trial: index,
                failed_memory_mb: config.memory_mb,
                floor_mb,
            });
        }
        self.trace.trials.push(Trial {
            index,
            phase,
            config,
            result,
            duration_ms: scored.map(|s| s.0),
            cost: scored.map(|s| s.1),
            value: scored.map(|s| s.2),
            best_so_far: self.best,
            acquisition,
            memory_floor_mb: self.space.memory_floor_mb,
        });
        if exhausted {
            return Err(OptimizeError::SpaceExhausted {
                trace: Box::new(self.trace.clone()),
            });
        }
        Ok(())
    }

    fn finish(mut self) -> OptimizationTrace {
        self.trace.stopped_early = self.trace.trials.len() < self.trace.header.budget;
        self.trace
    }
}

fn validate(settings: &RunSettings, objective: &ObjectiveSpec) -> Result<(), OptimizeError> {
    objective.validate()?;
    if let ObjectiveSpec::Weighted { normalizers: None, .. } = objective {
        return Err(OptimizeError::MissingNormalizers);
    }
    if settings.budget == 0 {
        return Err(OptimizeError::InvalidSettings("budget must be positive".into()));
    }
    Ok(())
}

/// Runs `settings.method` on `problem` over `space`.
pub fn run(problem: &Problem<'_>, space: &SearchSpace, settings: &RunSettings) -> Result<OptimizationTrace, OptimizeError> {
    match settings.method {
        Method::Bo(_) => run_bo(problem, space, settings),
        Method::Random | Method::Lhs => run_sampling(problem, space, settings),
    }
}

/// Bayesian optimization with expected improvement.
///
/// The `n_init` bootstrap trials come from [`random_design`]; designed
/// configs invalidated by slicing are replaced with uniform draws from what
/// remains. Failed trials consume budget but never enter the training set.
pub fn run_bo(problem: &Problem<'_>, space: &SearchSpace, settings: &RunSettings) -> Result<OptimizationTrace, OptimizeError> {
    validate(settings, &problem.objective)?;
    let Method::Bo(kind) = settings.method else {
        return Err(OptimizeError::InvalidSettings("run_bo needs a surrogate method".into()));
    };
    if settings.n_init == 0 || settings.n_init > settings.budget {
        return Err(OptimizeError::InvalidSettings(format!(
            "need 1 <= n_init ({}) <= budget ({})",
            settings.n_init, settings.budget
        )));
    }
    let mut runner = Runner::new(problem, space, settings);
    let n_design = settings.n_init.min(space.enumerate().len());
    let mut design: VecDeque<ResourceConfig> =
        random_design(space, n_design, seed::derive(settings.seed, &[DESIGN_STREAM]))?.into();

    for t in 0..settings.budget {
        if t < settings.n_init {
            let next = loop {
                match design.pop_front() {
                    Some(c) if runner.usable(&c) => break Some(c),
                    Some(_) => continue,
                    None => break runner.random_candidate(),
                }
            };
            let Some(config) = next else { break };
            runner.execute(config, Phase::Init, None, settings.seed)?;
            continue;
        }

        let mut candidates = runner.candidates();
        if candidates.is_empty() {
            break;
        }
        // ties in the acquisition go to the lexicographically smallest config
        candidates.sort();
        let training: Vec<Observation> = runner
            .observations
            .iter()
            .map(|(c, v)| Ok((runner.space.encode(c)?, *v)))
            .collect::<Result<_, SpaceError>>()?;
        if training.is_empty() {
            // nothing has succeeded yet: keep exploring at random
            let config = runner.random_candidate().expect("candidates non-empty");
            runner.execute(config, Phase::Init, None, settings.seed)?;
            continue;
        }
        let spec = SurrogateSpec {
            kind,
            n_estimators: settings.n_estimators,
            gp_restarts: settings.gp_restarts,
            seed: seed::derive(settings.seed, &[MODEL_STREAM, t as u64]),
        };
        let model = surrogate::fit(&spec, &training)?;
        let incumbent = training.iter().map(|(_, v)| *v).fold(f64::INFINITY, f64::min);
        let mut choice: Option<(usize, f64)> = None;
        for (i, c) in candidates.iter().enumerate() {
            let (mean, sd) = model.predict(&runner.space.encode(c)?)?;
            let ei = expected_improvement(mean, sd, incumbent);
            if choice.is_none_or(|(_, best)| ei > best) {
                choice = Some((i, ei));
            }
        }
        let (i, ei) = choice.expect("candidates non-empty");
        runner.execute(candidates[i].clone(), Phase::Model, Some(ei), settings.seed)?;
    }
    Ok(runner.finish())
}

/// Random or Latin hypercube sampling with the same slicing rules.
pub fn run_sampling(problem: &Problem<'_>, space: &SearchSpace, settings: &RunSettings) -> Result<OptimizationTrace, OptimizeError> {
    validate(settings, &problem.objective)?;
    let mut runner = Runner::new(problem, space, settings);
    let design_seed = seed::derive(settings.seed, &[DESIGN_STREAM]);
    let mut design: VecDeque<ResourceConfig> = match settings.method {
        Method::Lhs => lhs_design(space, settings.budget, design_seed).into(),
        Method::Random => {
            let n = settings.budget.min(space.enumerate().len());
            random_design(space, n, design_seed)?.into()
        }
        Method::Bo(_) => {
            return Err(OptimizeError::InvalidSettings("run_sampling needs a model-free method".into()))
        }
    };
    for _ in 0..settings.budget {
        let next = loop {
            match design.pop_front() {
                Some(c) if runner.usable(&c) => break Some(c),
                Some(_) => continue,
                None => break runner.random_candidate(),
            }
        };
        let Some(config) = next else { break };
        runner.execute(config, Phase::Sample, None, settings.seed)?;
    }
    Ok(runner.finish())
}
