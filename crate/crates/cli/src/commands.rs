use std::collections::BTreeMap;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rightsize_core::eval::{evaluate_function, MetricReport, ReportSettings};
use rightsize_core::multiobj::{
    actual_front, hierarchical_optimize, pareto_distance, predicted_front, weighted_portfolio, HierarchicalChoice,
    ModelPredictor, ParetoDistance, ParetoFront, PricedPredictor, Recommendation, TruthPredictor,
};
use rightsize_core::provider::{alternates_row, predicted_argmin, substitute, table_objectives, SubstitutionReport};
use rightsize_core::space::SpaceDescriptor;
use rightsize_core::{
    run, seed, solve_pricing, GridDataset, Method, Metric, Normalizers, ObjectiveSpec, OptimizationTrace,
    OptimizeError, PricingTable, Problem, ResourceConfig, RunSettings, SearchSpace, SurrogateKind, SurrogateSpec,
    TruthTable, Workload,
};
use rightsize_core::pricing::MemoryCharge;
use serde::Serialize;

use crate::failure::Failure;
use crate::inputs::{self, write_file, write_json};
use crate::{Cli, CliResult, Command, RunArgs, SourceArgs};

/// Resolved inputs of one invocation, written next to its outputs.
#[derive(Debug, Default, Serialize)]
struct RunManifest {
    command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    price_sheet: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    space_file: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<PathBuf>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    synthetic: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    input: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    space: Option<SpaceDescriptor>,
    #[serde(skip_serializing_if = "Option::is_none")]
    objective: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    surrogate: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    budget: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_init: Option<usize>,
    seeds: Vec<u64>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    options: BTreeMap<&'static str, serde_json::Value>,
    output_dir: PathBuf,
}

impl RunManifest {
    fn new(command: &'static str, out: &Path) -> Self {
        RunManifest {
            command,
            output_dir: out.to_path_buf(),
            ..Default::default()
        }
    }

    fn source(mut self, source: &SourceArgs, space: &SearchSpace) -> Self {
        self.price_sheet = source.pricing.clone();
        self.space_file = source.space.clone();
        self.grid = source.grid.clone();
        self.synthetic = source.synthetic.clone();
        self.input = Some(source.input.clone());
        self.space = Some(space.descriptor());
        self
    }

    fn run(mut self, run: &RunArgs) -> Self {
        self.surrogate = Some(run.surrogate.clone());
        self.budget = Some(run.budget);
        self.n_init = Some(run.n_init);
        self.seeds = run.seed_list();
        self
    }

    fn option(mut self, key: &'static str, value: impl Serialize) -> CliResult<Self> {
        self.options.insert(key, serde_json::to_value(value)?);
        Ok(self)
    }

    fn write(&self) -> CliResult<()> {
        write_json(&self.output_dir.join("manifest.json"), self)
    }
}

pub fn dispatch(cli: &Cli) -> CliResult<()> {
    let out = cli.out.as_path();
    match &cli.command {
        Command::SolvePricing { prices } => solve_pricing_cmd(out, prices),
        Command::GenGrid { source, reps, seed } => gen_grid(out, source, *reps, *seed),
        Command::Optimize { source, run, objective } => optimize(out, source, run, objective),
        Command::Pareto { source, run } => pareto(out, source, run),
        Command::Weighted { source, run } => weighted(out, source, run),
        Command::Hierarchical {
            source,
            run,
            theta,
            primary,
        } => hierarchical(out, source, run, *theta, primary),
        Command::ProviderSim {
            source,
            run,
            idle,
            spot,
            cap,
            thetas,
            oracle,
        } => provider_sim(out, source, run, idle, *spot, *cap, thetas, *oracle),
        Command::Evaluate {
            source,
            report,
            methods,
            budget,
            n_init,
            seeds,
            seed_base,
            metric,
            resamples,
        } => {
            let settings = ReportSettings {
                methods: methods.iter().map(|m| m.parse()).collect::<Result<_, _>>().map_err(Failure::usage)?,
                metric: metric.parse().map_err(Failure::usage)?,
                seeds: (0..*seeds as u64).map(|i| seed_base + i).collect(),
                budget: *budget,
                n_init: *n_init,
                resamples: *resamples,
                ..ReportSettings::default()
            };
            evaluate(report.as_deref().unwrap_or(out), source, settings)
        }
    }
}

fn solve_pricing_cmd(out: &Path, prices: &Path) -> CliResult<()> {
    let table = solve_pricing(&inputs::read_price_sheet(prices)?)?;
    let text = serde_json::to_string_pretty(&table)?;
    let mut stdout = io::stdout().lock();
    writeln!(stdout, "{text}").map_err(|e| Failure::io(Path::new("<stdout>"), e))?;
    write_json(&out.join("pricing.json"), &table)?;
    let mut manifest = RunManifest::new("solve-pricing", out);
    manifest.price_sheet = Some(prices.to_path_buf());
    manifest.write()
}

fn gen_grid(out: &Path, source: &SourceArgs, reps: usize, seed: u64) -> CliResult<()> {
    if source.grid.is_some() {
        return Err(Failure::usage("gen-grid takes --synthetic, not --grid"));
    }
    if reps == 0 {
        return Err(Failure::usage("--reps must be positive"));
    }
    let space = inputs::space(source)?;
    let mut grid = GridDataset::new();
    for spec in inputs::synthetic_specs(source)? {
        spec.generate_grid(&space, reps, seed, &mut grid);
    }
    let mut buf = Vec::new();
    grid.write_csv(&mut buf)?;
    write_file(&out.join("grid.csv"), buf)?;
    RunManifest::new("gen-grid", out)
        .source(source, &space)
        .option("reps", reps)?
        .option("seed", seed)?
        .write()
}

/// Shared state of the commands that run optimizations.
struct Session {
    out: PathBuf,
    space: SearchSpace,
    pricing: PricingTable,
    workloads: Vec<Workload>,
    method: Method,
    run: RunArgs,
}

impl Session {
    fn new(out: &Path, source: &SourceArgs, run: &RunArgs) -> CliResult<Self> {
        let method: Method = run.surrogate.parse().map_err(Failure::usage)?;
        if run.seeds == 0 {
            return Err(Failure::usage("--seeds must be positive"));
        }
        Ok(Session {
            out: out.to_path_buf(),
            space: inputs::space(source)?,
            pricing: inputs::pricing(source)?,
            workloads: inputs::workloads(source)?,
            method,
            run: run.clone(),
        })
    }

    fn settings(&self, seed: u64) -> RunSettings {
        RunSettings::new(self.method, seed)
            .with_budget(self.run.budget)
            .with_n_init(self.run.n_init)
    }

    /// Surrogate used to model a finished run; sampling methods get a GP.
    fn model_kind(&self) -> SurrogateKind {
        match self.method {
            Method::Bo(k) => k,
            Method::Random | Method::Lhs => SurrogateKind::Gp,
        }
    }

    fn model(&self, trace: &OptimizationTrace, tag: &str) -> CliResult<ModelPredictor> {
        let spec = SurrogateSpec::new(self.model_kind(), seed::derive(trace.header.seed, &[seed::label(tag)]));
        Ok(ModelPredictor::from_trace(trace, &self.space, &spec)?)
    }

    fn charge(&self) -> MemoryCharge {
        MemoryCharge::for_strategy(&self.space.strategy)
    }

    /// Runs one optimization and writes its trace. An exhausted space still
    /// yields the partial trace.
    fn optimize(&self, workload: &Workload, objective: ObjectiveSpec, seed: u64) -> CliResult<Outcome> {
        let problem = Problem {
            evaluator: workload,
            pricing: &self.pricing,
            objective,
            function_id: workload.name(),
            input_id: workload.input_id(),
        };
        let (trace, exhausted) = match run(&problem, &self.space, &self.settings(seed)) {
            Ok(t) => (t, false),
            Err(OptimizeError::SpaceExhausted { trace }) => (*trace, true),
            Err(e) => return Err(e.into()),
        };
        let file = PathBuf::from("traces").join(format!(
            "{}__{}__{}__{}__seed{}.jsonl",
            workload.name(),
            workload.input_id(),
            self.method.name(),
            objective.to_string().replace(':', "-"),
            seed
        ));
        let mut buf = Vec::new();
        trace.write_jsonl(&mut buf).map_err(|e| Failure::io(&file, e))?;
        write_file(&self.out.join(&file), buf)?;
        Ok(Outcome { trace, exhausted, file })
    }

    /// Like [`Session::optimize`] but a run that finds nothing is an error.
    fn optimize_ok(&self, workload: &Workload, objective: ObjectiveSpec, seed: u64) -> CliResult<Outcome> {
        let outcome = self.optimize(workload, objective, seed)?;
        if outcome.trace.best().is_none() {
            return Err(Failure::domain(format!(
                "{} ({objective}, seed {seed}) found no working config",
                workload.name()
            )));
        }
        Ok(outcome)
    }

    /// Best-found time and cost of the two single-objective runs.
    fn normalizers(&self, workload: &Workload, seed: u64) -> CliResult<(Normalizers, Outcome, Outcome)> {
        let time = self.optimize_ok(workload, ObjectiveSpec::Time, seed)?;
        let cost = self.optimize_ok(workload, ObjectiveSpec::Cost, seed)?;
        let n = Normalizers {
            time: time.best().duration_ms.unwrap_or(f64::NAN),
            cost: cost.best().cost.unwrap_or(f64::NAN),
        };
        Ok((n, time, cost))
    }

    fn manifest(&self, command: &'static str, source: &SourceArgs) -> RunManifest {
        RunManifest::new(command, &self.out).source(source, &self.space).run(&self.run)
    }
}

struct Outcome {
    trace: OptimizationTrace,
    exhausted: bool,
    file: PathBuf,
}

impl Outcome {
    fn best(&self) -> &rightsize_core::optimize::Trial {
        self.trace.best().expect("checked by optimize_ok")
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(Failure::domain)?;
    }
    let buf = w.into_inner().map_err(Failure::domain)?;
    write_file(path, buf)
}

/// Measured time and cost of `config`; `None` when it fails.
fn measured(truth: &TruthTable, pricing: &PricingTable, charge: MemoryCharge, config: &ResourceConfig) -> Option<(f64, f64)> {
    Some((truth.time(config)?, truth.cost(config, pricing, charge, false)?))
}

#[derive(Debug, Serialize)]
struct RunSummary {
    function_id: String,
    input_id: String,
    method: String,
    objective: String,
    seed: u64,
    trace_file: PathBuf,
    trials: usize,
    slices: usize,
    stopped_early: bool,
    exhausted: bool,
    best_config: Option<ResourceConfig>,
    best_value: Option<f64>,
    best_duration_ms: Option<f64>,
    best_cost: Option<f64>,
}

impl RunSummary {
    fn of(outcome: &Outcome) -> Self {
        let t = &outcome.trace;
        let best = t.best();
        RunSummary {
            function_id: t.header.function_id.clone(),
            input_id: t.header.input_id.clone(),
            method: t.header.method.name().to_string(),
            objective: t.header.objective.to_string(),
            seed: t.header.seed,
            trace_file: outcome.file.clone(),
            trials: t.trials.len(),
            slices: t.slices.len(),
            stopped_early: t.stopped_early,
            exhausted: outcome.exhausted,
            best_config: best.map(|b| b.config.clone()),
            best_value: best.and_then(|b| b.value),
            best_duration_ms: best.and_then(|b| b.duration_ms),
            best_cost: best.and_then(|b| b.cost),
        }
    }
}

fn optimize(out: &Path, source: &SourceArgs, run: &RunArgs, objective: &str) -> CliResult<()> {
    let objective: ObjectiveSpec = objective.parse().map_err(Failure::usage)?;
    let session = Session::new(out, source, run)?;
    let mut runs = Vec::new();
    for w in &session.workloads {
        for seed in run.seed_list() {
            let spec = match objective {
                ObjectiveSpec::Weighted {
                    w_time,
                    normalizers: None,
                } => {
                    let (n, time, cost) = session.normalizers(w, seed)?;
                    runs.push(RunSummary::of(&time));
                    runs.push(RunSummary::of(&cost));
                    ObjectiveSpec::weighted(w_time, n)
                }
                other => other,
            };
            runs.push(RunSummary::of(&session.optimize(w, spec, seed)?));
        }
    }
    write_json(&out.join("summary.json"), &runs)?;
    let mut manifest = session.manifest("optimize", source);
    manifest.objective = Some(objective.to_string());
    manifest.write()
}

#[derive(Debug, Serialize)]
struct ParetoRecord {
    function_id: String,
    input_id: String,
    seed: u64,
    normalizers: Normalizers,
    predicted: ParetoFront,
    actual: ParetoFront,
    /// Predicted members that fail when measured.
    failing_members: usize,
    distance: Option<ParetoDistance>,
}

#[derive(Debug, Serialize)]
struct FrontRow {
    function_id: String,
    seed: u64,
    front: &'static str,
    family: String,
    cpu_share: f64,
    memory_mb: u32,
    time_ms: f64,
    cost: f64,
}

fn pareto(out: &Path, source: &SourceArgs, run: &RunArgs) -> CliResult<()> {
    let session = Session::new(out, source, run)?;
    let charge = session.charge();
    let mut records = Vec::new();
    let mut rows = Vec::new();
    for w in &session.workloads {
        let truth = w.truth(&session.space)?;
        let actual = actual_front(&truth, &session.pricing, charge, &session.space)?;
        for seed in run.seed_list() {
            let (normalizers, time, cost) = session.normalizers(w, seed)?;
            let time_model = session.model(&time.trace, "time-model")?;
            let cost_model = session.model(&cost.trace, "cost-model")?;
            let mut space = session.space.clone();
            space.memory_floor_mb = time_model.space.memory_floor_mb.max(cost_model.space.memory_floor_mb);
            let predicted = predicted_front(&time_model, &cost_model, &space, normalizers)?;
            let measure = |c: &ResourceConfig| measured(&truth, &session.pricing, charge, c);
            let working = ParetoFront {
                points: predicted.points.iter().filter(|p| measure(&p.config).is_some()).cloned().collect(),
                normalizers,
            };
            let distance = if working.is_empty() {
                None
            } else {
                Some(pareto_distance(&working, &actual, measure)?)
            };
            for (front, f) in [("predicted", &predicted), ("actual", &actual)] {
                rows.extend(f.points.iter().map(|p| FrontRow {
                    function_id: w.name().to_string(),
                    seed,
                    front,
                    family: p.config.family.to_string(),
                    cpu_share: p.config.cpu_share,
                    memory_mb: p.config.memory_mb,
                    time_ms: p.time_ms,
                    cost: p.cost,
                }));
            }
            records.push(ParetoRecord {
                function_id: w.name().to_string(),
                input_id: w.input_id().to_string(),
                seed,
                normalizers,
                failing_members: predicted.len() - working.len(),
                predicted,
                actual: actual.clone(),
                distance,
            });
        }
    }
    write_json(&out.join("pareto.json"), &records)?;
    write_csv(&out.join("pareto_front.csv"), &rows)?;
    session.manifest("pareto", source).write()
}

#[derive(Debug, Serialize)]
struct WeightedRecord {
    function_id: String,
    input_id: String,
    seed: u64,
    normalizers: Normalizers,
    recommendations: Vec<Recommendation>,
}

#[derive(Debug, Serialize)]
struct WeightedRow {
    function_id: String,
    seed: u64,
    w_time: f64,
    family: String,
    cpu_share: f64,
    memory_mb: u32,
    time_ms: f64,
    cost: f64,
    value: f64,
    measured_time_ms: Option<f64>,
    measured_cost: Option<f64>,
}

fn weighted(out: &Path, source: &SourceArgs, run: &RunArgs) -> CliResult<()> {
    let session = Session::new(out, source, run)?;
    let charge = session.charge();
    let mut records = Vec::new();
    let mut rows = Vec::new();
    for w in &session.workloads {
        let truth = w.truth(&session.space)?;
        for seed in run.seed_list() {
            let p = weighted_portfolio(
                w,
                &session.pricing,
                &session.space,
                &session.settings(seed),
                w.name(),
                w.input_id(),
            )?;
            for r in &p.recommendations {
                let m = measured(&truth, &session.pricing, charge, &r.config);
                rows.push(WeightedRow {
                    function_id: w.name().to_string(),
                    seed,
                    w_time: r.w_time,
                    family: r.config.family.to_string(),
                    cpu_share: r.config.cpu_share,
                    memory_mb: r.config.memory_mb,
                    time_ms: r.time_ms,
                    cost: r.cost,
                    value: r.value,
                    measured_time_ms: m.map(|m| m.0),
                    measured_cost: m.map(|m| m.1),
                });
            }
            records.push(WeightedRecord {
                function_id: w.name().to_string(),
                input_id: w.input_id().to_string(),
                seed,
                normalizers: p.normalizers,
                recommendations: p.recommendations,
            });
        }
    }
    write_json(&out.join("weighted.json"), &records)?;
    write_csv(&out.join("weighted.csv"), &rows)?;
    session.manifest("weighted", source).write()
}

#[derive(Debug, Serialize)]
struct HierarchicalRecord {
    function_id: String,
    input_id: String,
    seed: u64,
    incumbent: ResourceConfig,
    choice: HierarchicalChoice,
    measured_time_ms: Option<f64>,
    measured_cost: Option<f64>,
    /// Measured (time, cost) of the choice over those of the incumbent.
    normalized: Option<(f64, f64)>,
}

#[derive(Debug, Serialize)]
struct HierarchicalRow {
    function_id: String,
    seed: u64,
    primary: &'static str,
    theta: f64,
    family: String,
    cpu_share: f64,
    memory_mb: u32,
    predicted_primary: f64,
    predicted_secondary: f64,
    measured_time_ms: Option<f64>,
    measured_cost: Option<f64>,
    normalized_time: Option<f64>,
    normalized_cost: Option<f64>,
}

fn hierarchical(out: &Path, source: &SourceArgs, run: &RunArgs, theta: f64, primary: &str) -> CliResult<()> {
    let primary: Metric = primary.parse().map_err(Failure::usage)?;
    if !(theta >= 0.0) {
        return Err(Failure::usage(format!("--theta {theta} must be non-negative")));
    }
    let session = Session::new(out, source, run)?;
    let charge = session.charge();
    let objective = match primary {
        Metric::Time => ObjectiveSpec::Time,
        Metric::Cost => ObjectiveSpec::Cost,
    };
    let mut records = Vec::new();
    let mut rows = Vec::new();
    for w in &session.workloads {
        let truth = w.truth(&session.space)?;
        for seed in run.seed_list() {
            let outcome = session.optimize_ok(w, objective, seed)?;
            let model = session.model(&outcome.trace, "primary-model")?;
            let secondary = PricedPredictor {
                base: &model,
                from: primary,
                pricing: &session.pricing,
            };
            let best = outcome.best();
            let choice = hierarchical_optimize(
                &model,
                &secondary,
                &model.space,
                primary,
                theta,
                &best.config,
                best.value.unwrap_or(f64::NAN),
            )?;
            let m = measured(&truth, &session.pricing, charge, &choice.config);
            let normalized = m
                .zip(measured(&truth, &session.pricing, charge, &best.config))
                .map(|((t, c), (t0, c0))| (t / t0, c / c0));
            rows.push(HierarchicalRow {
                function_id: w.name().to_string(),
                seed,
                primary: primary.name(),
                theta,
                family: choice.config.family.to_string(),
                cpu_share: choice.config.cpu_share,
                memory_mb: choice.config.memory_mb,
                predicted_primary: choice.predicted_primary,
                predicted_secondary: choice.predicted_secondary,
                measured_time_ms: m.map(|m| m.0),
                measured_cost: m.map(|m| m.1),
                normalized_time: normalized.map(|n| n.0),
                normalized_cost: normalized.map(|n| n.1),
            });
            records.push(HierarchicalRecord {
                function_id: w.name().to_string(),
                input_id: w.input_id().to_string(),
                seed,
                incumbent: best.config.clone(),
                choice,
                measured_time_ms: m.map(|m| m.0),
                measured_cost: m.map(|m| m.1),
                normalized,
            });
        }
    }
    write_json(&out.join("hierarchical.json"), &records)?;
    write_csv(&out.join("hierarchical.csv"), &rows)?;
    session
        .manifest("hierarchical", source)
        .option("theta", theta)?
        .option("primary", primary)?
        .write()
}

#[derive(Debug, Serialize)]
struct SubstitutionRecord {
    function_id: String,
    input_id: String,
    /// `None` for oracle runs.
    seed: Option<u64>,
    report: SubstitutionReport,
}

#[allow(clippy::too_many_arguments)]
fn provider_sim(
    out: &Path,
    source: &SourceArgs,
    run: &RunArgs,
    idle: &[String],
    spot: f64,
    cap: f64,
    thetas: &[f64],
    oracle: bool,
) -> CliResult<()> {
    if !(spot > 0.0 && spot <= 1.0) {
        return Err(Failure::usage(format!("--spot {spot} must lie in (0, 1]")));
    }
    let session = Session::new(out, source, run)?;
    let idle = inputs::families(idle);
    let mut header = vec!["function_id".to_string()];
    for (label, _) in table_objectives() {
        header.extend(thetas.iter().map(|t| format!("{label}@{t}")));
    }
    let mut table = csv::Writer::from_writer(Vec::new());
    table.write_record(&header).map_err(Failure::domain)?;
    let mut records = Vec::new();
    for w in &session.workloads {
        let truth = w.truth(&session.space)?;
        let row = alternates_row(w.name(), &truth, &session.pricing, &session.space, thetas)?;
        let mut cells = vec![w.name().to_string()];
        cells.extend(row.iter().map(|a| a.count.to_string()));
        table.write_record(&cells).map_err(Failure::domain)?;

        if oracle {
            let model = TruthPredictor::new(&truth, Metric::Time, &session.pricing);
            let (incumbent, _) = predicted_argmin(&model, session.space.enumerate())?
                .ok_or_else(|| Failure::domain(format!("{} has no working config", w.name())))?;
            let report =
                substitute(&model, &truth, &session.pricing, &session.space, &incumbent, &idle, spot, cap)?;
            records.push(SubstitutionRecord {
                function_id: w.name().to_string(),
                input_id: w.input_id().to_string(),
                seed: None,
                report,
            });
            continue;
        }
        for seed in run.seed_list() {
            let outcome = session.optimize_ok(w, ObjectiveSpec::Time, seed)?;
            let model = session.model(&outcome.trace, "time-model")?;
            let report = substitute(
                &model,
                &truth,
                &session.pricing,
                &model.space,
                &outcome.best().config,
                &idle,
                spot,
                cap,
            )?;
            records.push(SubstitutionRecord {
                function_id: w.name().to_string(),
                input_id: w.input_id().to_string(),
                seed: Some(seed),
                report,
            });
        }
    }
    write_file(&out.join("alternates.csv"), table.into_inner().map_err(Failure::domain)?)?;
    write_json(&out.join("substitution.json"), &records)?;
    session
        .manifest("provider-sim", source)
        .option("idle", &idle)?
        .option("spot", spot)?
        .option("cap", cap)?
        .option("thetas", thetas)?
        .option("oracle", oracle)?
        .write()
}

#[derive(Debug, Serialize)]
struct ConvergenceRow<'a> {
    function_id: &'a str,
    method: &'a str,
    trial: usize,
    n: usize,
    median: f64,
    lo: f64,
    hi: f64,
}

#[derive(Debug, Serialize)]
struct SeedRow<'a> {
    function_id: &'a str,
    method: &'a str,
    seed: u64,
    normalized_best: Option<f64>,
    violations: usize,
}

#[derive(Debug, Serialize)]
struct MapeRow<'a> {
    function_id: &'a str,
    method: &'a str,
    mape_all: Option<f64>,
    mape_family_best: Option<f64>,
}

#[derive(Debug, Serialize)]
struct GapRow<'a> {
    function_id: &'a str,
    strategy: &'a str,
    time_ratio: f64,
    cost_ratio: f64,
    best_time_config: String,
    best_cost_config: String,
}

fn evaluate(out: &Path, source: &SourceArgs, settings: ReportSettings) -> CliResult<()> {
    if settings.seeds.is_empty() || settings.methods.is_empty() {
        return Err(Failure::usage("need at least one method and one seed"));
    }
    let space = inputs::space(source)?;
    let pricing = inputs::pricing(source)?;
    let mut functions = Vec::new();
    for w in inputs::workloads(source)? {
        functions.push(evaluate_function(&w, &space, &pricing, &settings)?.0);
    }
    let report = MetricReport {
        settings: settings.clone(),
        functions,
    };
    let (mut conv, mut seeds, mut mapes, mut gaps) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for f in &report.functions {
        for m in &f.methods {
            let method = m.method.name();
            conv.extend(m.convergence.iter().map(|p| ConvergenceRow {
                function_id: &f.function_id,
                method,
                trial: p.trial,
                n: p.n,
                median: p.median,
                lo: p.lo,
                hi: p.hi,
            }));
            seeds.extend(settings.seeds.iter().enumerate().map(|(i, &seed)| SeedRow {
                function_id: &f.function_id,
                method,
                seed,
                normalized_best: m.normalized_best[i],
                violations: m.violations[i],
            }));
            mapes.push(MapeRow {
                function_id: &f.function_id,
                method,
                mape_all: m.mape_all,
                mape_family_best: m.mape_family_best,
            });
        }
        gaps.extend(f.strategy_gaps.iter().map(|g| GapRow {
            function_id: &f.function_id,
            strategy: &g.strategy,
            time_ratio: g.time_ratio,
            cost_ratio: g.cost_ratio,
            best_time_config: g.best_time_config.to_string(),
            best_cost_config: g.best_cost_config.to_string(),
        }));
    }
    write_json(&out.join("report.json"), &report)?;
    write_csv(&out.join("convergence.csv"), &conv)?;
    write_csv(&out.join("violations.csv"), &seeds)?;
    write_csv(&out.join("mape.csv"), &mapes)?;
    write_csv(&out.join("strategy_gaps.csv"), &gaps)?;
    let mut manifest = RunManifest::new("evaluate", out).source(source, &space);
    manifest.budget = Some(settings.budget);
    manifest.n_init = Some(settings.n_init);
    manifest.seeds = settings.seeds.clone();
    manifest.surrogate = Some(settings.methods.iter().map(|m| m.name()).collect::<Vec<_>>().join(","));
    manifest.objective = Some(settings.metric.name().to_string());
    manifest.option("resamples", settings.resamples)?.write()
}
