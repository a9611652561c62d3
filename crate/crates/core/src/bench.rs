//! Function evaluators: replay of recorded measurement grids and synthetic
//! function archetypes with controllable CPU, memory and network profiles.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::BenchError;
use crate::pricing::{billed_cost, MemoryCharge, PricingTable};
use crate::seed;
use crate::space::{Family, ResourceConfig, SearchSpace};

/// Per-invocation timeout, ms.
pub const DEFAULT_TIMEOUT_MS: f64 = 600_000.0;

/// Input id used when none is given.
pub const DEFAULT_INPUT: &str = "default";

/// Outcome of one invocation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunResult {
    Ok { duration_ms: f64, peak_mem_mb: f64 },
    Oom,
    Timeout,
}

impl RunResult {
    pub fn duration_ms(&self) -> Option<f64> {
        match self {
            RunResult::Ok { duration_ms, .. } => Some(*duration_ms),
            _ => None,
        }
    }

    pub fn peak_mem_mb(&self) -> Option<f64> {
        match self {
            RunResult::Ok { peak_mem_mb, .. } => Some(*peak_mem_mb),
            _ => None,
        }
    }

    pub fn is_ok(&self) -> bool {
        matches!(self, RunResult::Ok { .. })
    }

    pub fn status(&self) -> &'static str {
        match self {
            RunResult::Ok { .. } => "ok",
            RunResult::Oom => "oom",
            RunResult::Timeout => "timeout",
        }
    }
}

/// Anything that can run a function at a configuration.
pub trait Evaluator {
    /// Runs once; `seed` fixes any randomness in the outcome.
    fn evaluate(&self, config: &ResourceConfig, seed: u64) -> Result<RunResult, BenchError>;

    fn timeout_ms(&self) -> f64 {
        DEFAULT_TIMEOUT_MS
    }
}

/// Collapses repetitions: any OOM wins, otherwise the median duration of the
/// successful runs, otherwise timeout.
pub fn aggregate(results: &[RunResult]) -> Result<RunResult, BenchError> {
    if results.is_empty() {
        return Err(BenchError::EmptyRuns);
    }
    if results.iter().any(|r| matches!(r, RunResult::Oom)) {
        return Ok(RunResult::Oom);
    }
    let mut durations: Vec<f64> = results.iter().filter_map(RunResult::duration_ms).collect();
    if durations.is_empty() {
        return Ok(RunResult::Timeout);
    }
    durations.sort_by(f64::total_cmp);
    let n = durations.len();
    let median = if n % 2 == 1 {
        durations[n / 2]
    } else {
        0.5 * (durations[n / 2 - 1] + durations[n / 2])
    };
    let peak = results
        .iter()
        .filter_map(RunResult::peak_mem_mb)
        .fold(0.0_f64, f64::max);
    Ok(RunResult::Ok {
        duration_ms: median,
        peak_mem_mb: peak,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GridKey {
    pub function_id: String,
    pub input_id: String,
    pub config: ResourceConfig,
}

/// Recorded repetitions per (function, input, config).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GridDataset {
    runs: BTreeMap<GridKey, Vec<RunResult>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct GridRow {
    function_id: String,
    input_id: String,
    family: String,
    cpu_share: f64,
    memory_mb: u32,
    rep: u32,
    status: String,
    duration_ms: Option<f64>,
    peak_mem_mb: Option<f64>,
}

impl GridDataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, function_id: &str, input_id: &str, config: ResourceConfig, run: RunResult) {
        self.runs
            .entry(GridKey {
                function_id: function_id.to_string(),
                input_id: input_id.to_string(),
                config,
            })
            .or_default()
            .push(run);
    }

    pub fn runs(&self, function_id: &str, input_id: &str, config: &ResourceConfig) -> Option<&[RunResult]> {
        // BTreeMap lookups need an owned key.
        self.runs
            .get(&GridKey {
                function_id: function_id.to_string(),
                input_id: input_id.to_string(),
                config: config.clone(),
            })
            .map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    pub fn functions(&self) -> Vec<String> {
        let mut v: Vec<String> = self.runs.keys().map(|k| k.function_id.clone()).collect();
        v.dedup();
        v
    }

    pub fn inputs(&self, function_id: &str) -> Vec<String> {
        let mut v: Vec<String> = self
            .runs
            .keys()
            .filter(|k| k.function_id == function_id)
            .map(|k| k.input_id.clone())
            .collect();
        v.sort();
        v.dedup();
        v
    }

    /// One recorded repetition chosen uniformly at random by `rng_seed`.
    pub fn replay(
        &self,
        function_id: &str,
        input_id: &str,
        config: &ResourceConfig,
        rng_seed: u64,
    ) -> Result<RunResult, BenchError> {
        let reps = self
            .runs(function_id, input_id, config)
            .filter(|r| !r.is_empty())
            .ok_or_else(|| BenchError::MissingKey {
                function: function_id.to_string(),
                input: input_id.to_string(),
                config: config.clone(),
            })?;
        let idx = seed::rng(rng_seed).random_range(0..reps.len());
        Ok(reps[idx])
    }

    /// Aggregated outcome of every config of `space` for one function input.
    pub fn truth(&self, function_id: &str, input_id: &str, space: &SearchSpace) -> Result<TruthTable, BenchError> {
        let mut table = TruthTable::default();
        for config in space.enumerate() {
            let reps = self.runs(function_id, input_id, &config).ok_or_else(|| BenchError::MissingKey {
                function: function_id.to_string(),
                input: input_id.to_string(),
                config: config.clone(),
            })?;
            table.insert(config, aggregate(reps)?);
        }
        Ok(table)
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, BenchError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut rows: Vec<GridRow> = Vec::new();
        for row in rdr.deserialize() {
            rows.push(row?);
        }
        rows.sort_by_key(|r| r.rep);
        let mut grid = GridDataset::new();
        for row in rows {
            let run = match row.status.as_str() {
                "ok" => {
                    let duration_ms = row
                        .duration_ms
                        .ok_or_else(|| BenchError::InvalidRecord("ok run without duration".into()))?;
                    if !(duration_ms.is_finite() && duration_ms > 0.0) {
                        return Err(BenchError::InvalidRecord(format!("bad duration {duration_ms}")));
                    }
                    RunResult::Ok {
                        duration_ms,
                        peak_mem_mb: row.peak_mem_mb.unwrap_or(row.memory_mb as f64),
                    }
                }
                "oom" => RunResult::Oom,
                "timeout" => RunResult::Timeout,
                other => return Err(BenchError::InvalidRecord(format!("unknown status `{other}`"))),
            };
            let config = ResourceConfig::new(row.cpu_share, row.memory_mb, Family(row.family));
            grid.push(&row.function_id, &row.input_id, config, run);
        }
        Ok(grid)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), BenchError> {
        let mut wtr = csv::Writer::from_writer(writer);
        for (key, reps) in &self.runs {
            for (rep, run) in reps.iter().enumerate() {
                wtr.serialize(GridRow {
                    function_id: key.function_id.clone(),
                    input_id: key.input_id.clone(),
                    family: key.config.family.0.clone(),
                    cpu_share: key.config.cpu_share,
                    memory_mb: key.config.memory_mb,
                    rep: rep as u32,
                    status: run.status().to_string(),
                    duration_ms: run.duration_ms(),
                    peak_mem_mb: run.peak_mem_mb(),
                })?;
            }
        }
        wtr.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Replays one function input of a recorded grid.
#[derive(Debug, Clone)]
pub struct GridReplay {
    pub grid: Arc<GridDataset>,
    pub function_id: String,
    pub input_id: String,
}

impl Evaluator for GridReplay {
    fn evaluate(&self, config: &ResourceConfig, seed: u64) -> Result<RunResult, BenchError> {
        self.grid.replay(&self.function_id, &self.input_id, config, seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Archetype {
    CpuBound,
    MemoryCliff,
    NetworkPlateau,
}

/// Parametric stand-in for a measured function.
///
/// Duration is `scale * speed * (serial + parallel / min(cpu, cap))` with
/// multiplicative lognormal noise; memory below the requirement is an OOM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticFunctionSpec {
    #[serde(default)]
    pub name: String,
    pub archetype: Archetype,
    pub serial_ms: f64,
    pub parallel_ms: f64,
    /// Largest CPU share that still speeds the function up.
    pub parallel_cap: f64,
    pub required_mem_mb: f64,
    #[serde(default)]
    pub family_speed: BTreeMap<Family, f64>,
    #[serde(default)]
    pub input_scale: BTreeMap<String, f64>,
    /// Per-input memory requirement overriding `required_mem_mb`.
    #[serde(default)]
    pub input_required_mem_mb: BTreeMap<String, f64>,
    #[serde(default)]
    pub noise_cv: f64,
}

/// Network-bound functions stop benefiting from CPU past this share.
const NETWORK_CPU_CAP: f64 = 0.5;

impl SyntheticFunctionSpec {
    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: &str| Err(BenchError::InvalidSpec(format!("{}: {m}", self.name)));
        if !(self.serial_ms >= 0.0 && self.parallel_ms >= 0.0) {
            return bad("serial and parallel times must be non-negative");
        }
        if self.serial_ms + self.parallel_ms <= 0.0 {
            return bad("total work must be positive");
        }
        if !(self.parallel_cap >= 0.25) {
            return bad("parallel cap must be at least 0.25");
        }
        if !(self.required_mem_mb >= 0.0) {
            return bad("required memory must be non-negative");
        }
        if self
            .family_speed
            .values()
            .chain(self.input_scale.values())
            .any(|m| !(m.is_finite() && *m > 0.0))
        {
            return bad("multipliers must be positive");
        }
        if !(self.noise_cv >= 0.0 && self.noise_cv.is_finite()) {
            return bad("noise cv must be non-negative");
        }
        Ok(())
    }

    pub fn required_mem_for(&self, input_id: &str) -> f64 {
        self.input_required_mem_mb
            .get(input_id)
            .copied()
            .unwrap_or(self.required_mem_mb)
    }

    fn effective_cap(&self) -> f64 {
        match self.archetype {
            Archetype::NetworkPlateau => self.parallel_cap.min(NETWORK_CPU_CAP),
            _ => self.parallel_cap,
        }
    }

    /// Noise-free duration, or `None` on OOM.
    pub fn nominal_duration_ms(&self, input_id: &str, config: &ResourceConfig) -> Option<f64> {
        if (config.memory_mb as f64) < self.required_mem_for(input_id) {
            return None;
        }
        let scale = self.input_scale.get(input_id).copied().unwrap_or(1.0);
        let speed = self.family_speed.get(&config.family).copied().unwrap_or(1.0);
        let cpu = config.cpu_share.min(self.effective_cap());
        Some(scale * speed * (self.serial_ms + self.parallel_ms / cpu))
    }

    pub fn synth_eval(&self, input_id: &str, config: &ResourceConfig, rng_seed: u64, timeout_ms: f64) -> RunResult {
        let Some(nominal) = self.nominal_duration_ms(input_id, config) else {
            return RunResult::Oom;
        };
        let duration = if self.noise_cv > 0.0 {
            let sigma2 = (1.0 + self.noise_cv * self.noise_cv).ln();
            // mean-one lognormal with the requested coefficient of variation
            let noise = LogNormal::new(-0.5 * sigma2, sigma2.sqrt()).expect("finite parameters");
            nominal * noise.sample(&mut seed::rng(rng_seed))
        } else {
            nominal
        };
        if duration > timeout_ms {
            return RunResult::Timeout;
        }
        RunResult::Ok {
            duration_ms: duration,
            peak_mem_mb: self.required_mem_for(input_id),
        }
    }

    /// Noise-free outcome of every config in `space`.
    pub fn truth(&self, input_id: &str, space: &SearchSpace, timeout_ms: f64) -> TruthTable {
        let mut table = TruthTable::default();
        let noiseless = SyntheticFunctionSpec {
            noise_cv: 0.0,
            ..self.clone()
        };
        for config in space.enumerate() {
            let run = noiseless.synth_eval(input_id, &config, 0, timeout_ms);
            table.insert(config, run);
        }
        table
    }

    pub fn inputs(&self) -> Vec<String> {
        let mut v: Vec<String> = self.input_scale.keys().cloned().collect();
        if !v.iter().any(|i| i == DEFAULT_INPUT) {
            v.insert(0, DEFAULT_INPUT.to_string());
        }
        v
    }

    /// Materializes `reps` noisy repetitions of every config and input.
    pub fn generate_grid(&self, space: &SearchSpace, reps: usize, seed: u64, grid: &mut GridDataset) {
        let fid = seed::label(&self.name);
        for input in self.inputs() {
            let iid = seed::label(&input);
            for (ci, config) in space.enumerate().into_iter().enumerate() {
                for rep in 0..reps {
                    let s = seed::derive(seed, &[fid, iid, ci as u64, rep as u64]);
                    let run = self.synth_eval(&input, &config, s, DEFAULT_TIMEOUT_MS);
                    grid.push(&self.name, &input, config.clone(), run);
                }
            }
        }
    }
}

/// A synthetic function bound to one input.
#[derive(Debug, Clone)]
pub struct SyntheticEvaluator {
    pub spec: SyntheticFunctionSpec,
    pub input_id: String,
    pub timeout_ms: f64,
}

impl SyntheticEvaluator {
    pub fn new(spec: SyntheticFunctionSpec, input_id: &str) -> Self {
        SyntheticEvaluator {
            spec,
            input_id: input_id.to_string(),
            timeout_ms: DEFAULT_TIMEOUT_MS,
        }
    }
}

impl Evaluator for SyntheticEvaluator {
    fn evaluate(&self, config: &ResourceConfig, seed: u64) -> Result<RunResult, BenchError> {
        Ok(self.spec.synth_eval(&self.input_id, config, seed, self.timeout_ms))
    }

    fn timeout_ms(&self) -> f64 {
        self.timeout_ms
    }
}

/// Ground-truth outcome per config.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TruthTable {
    outcomes: BTreeMap<ResourceConfig, RunResult>,
}

impl TruthTable {
    pub fn insert(&mut self, config: ResourceConfig, run: RunResult) {
        self.outcomes.insert(config, run);
    }

    pub fn outcome(&self, config: &ResourceConfig) -> Option<&RunResult> {
        self.outcomes.get(config)
    }

    /// Duration of a successful config.
    pub fn time(&self, config: &ResourceConfig) -> Option<f64> {
        self.outcome(config).and_then(RunResult::duration_ms)
    }

    pub fn cost(
        &self,
        config: &ResourceConfig,
        pricing: &PricingTable,
        charge: MemoryCharge,
        use_spot: bool,
    ) -> Option<f64> {
        let run = self.outcome(config)?;
        let d = run.duration_ms()?;
        billed_cost(config, d, run.peak_mem_mb(), charge, pricing, use_spot).ok()
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ResourceConfig, &RunResult)> {
        self.outcomes.iter()
    }
}

/// Where trials come from: a synthetic function or a recorded grid.
#[derive(Debug, Clone)]
pub enum Workload {
    Synthetic(SyntheticEvaluator),
    Replay(GridReplay),
}

impl Workload {
    pub fn name(&self) -> &str {
        match self {
            Workload::Synthetic(s) => &s.spec.name,
            Workload::Replay(r) => &r.function_id,
        }
    }

    pub fn input_id(&self) -> &str {
        match self {
            Workload::Synthetic(s) => &s.input_id,
            Workload::Replay(r) => &r.input_id,
        }
    }

    /// Same function, different input.
    pub fn with_input(&self, input_id: &str) -> Workload {
        match self {
            Workload::Synthetic(s) => Workload::Synthetic(SyntheticEvaluator {
                input_id: input_id.to_string(),
                ..s.clone()
            }),
            Workload::Replay(r) => Workload::Replay(GridReplay {
                input_id: input_id.to_string(),
                ..r.clone()
            }),
        }
    }

    pub fn inputs(&self) -> Vec<String> {
        match self {
            Workload::Synthetic(s) => s.spec.inputs(),
            Workload::Replay(r) => r.grid.inputs(&r.function_id),
        }
    }

    /// Ground truth over `space`: noise-free for synthetic functions, the
    /// aggregated repetitions for recorded grids.
    pub fn truth(&self, space: &SearchSpace) -> Result<TruthTable, BenchError> {
        match self {
            Workload::Synthetic(s) => Ok(s.spec.truth(&s.input_id, space, s.timeout_ms)),
            Workload::Replay(r) => r.grid.truth(&r.function_id, &r.input_id, space),
        }
    }
}

impl Evaluator for Workload {
    fn evaluate(&self, config: &ResourceConfig, seed: u64) -> Result<RunResult, BenchError> {
        match self {
            Workload::Synthetic(s) => s.evaluate(config, seed),
            Workload::Replay(r) => r.evaluate(config, seed),
        }
    }

    fn timeout_ms(&self) -> f64 {
        match self {
            Workload::Synthetic(s) => s.timeout_ms(),
            Workload::Replay(r) => r.timeout_ms(),
        }
    }
}

fn speeds(values: [f64; 6]) -> BTreeMap<Family, f64> {
    crate::space::DEFAULT_FAMILIES
        .iter()
        .zip(values)
        .map(|(f, v)| (Family::from(*f), v))
        .collect()
}

fn scales(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// Names of the bundled synthetic functions.
pub const PRESET_NAMES: [&str; 6] = [
    "face-detect",
    "face-blur",
    "transcode",
    "ocr",
    "linpack",
    "object-copy",
];

/// Bundled synthetic functions: two CPU-bound, two that scale past one vCPU,
/// one with a memory cliff and one network-bound. Family speed multipliers
/// are ordered c6g, m6g, c5, m5, c5a, m5a.
pub fn preset(name: &str) -> Result<SyntheticFunctionSpec, BenchError> {
    let inputs = scales(&[("default", 1.0), ("small", 0.6), ("medium", 1.4), ("large", 2.2)]);
    let spec = match name {
        "face-detect" => SyntheticFunctionSpec {
            name: name.into(),
            archetype: Archetype::CpuBound,
            serial_ms: 350.0,
            parallel_ms: 1400.0,
            parallel_cap: 1.0,
            required_mem_mb: 128.0,
            family_speed: speeds([1.18, 1.22, 0.92, 1.0, 0.97, 1.04]),
            input_scale: inputs,
            input_required_mem_mb: BTreeMap::new(),
            noise_cv: 0.05,
        },
        "face-blur" => SyntheticFunctionSpec {
            name: name.into(),
            archetype: Archetype::CpuBound,
            serial_ms: 600.0,
            parallel_ms: 2600.0,
            parallel_cap: 1.25,
            required_mem_mb: 256.0,
            family_speed: speeds([0.96, 1.02, 0.88, 1.0, 0.91, 0.99]),
            input_scale: inputs,
            input_required_mem_mb: BTreeMap::new(),
            noise_cv: 0.05,
        },
        "transcode" => SyntheticFunctionSpec {
            name: name.into(),
            archetype: Archetype::CpuBound,
            serial_ms: 2000.0,
            parallel_ms: 8000.0,
            parallel_cap: 2.0,
            required_mem_mb: 512.0,
            family_speed: speeds([1.1, 1.14, 0.9, 1.0, 0.95, 1.05]),
            input_scale: inputs,
            input_required_mem_mb: [("large".to_string(), 768.0)].into_iter().collect(),
            noise_cv: 0.05,
        },
        "ocr" => SyntheticFunctionSpec {
            name: name.into(),
            archetype: Archetype::CpuBound,
            serial_ms: 1500.0,
            parallel_ms: 4500.0,
            parallel_cap: 1.5,
            required_mem_mb: 256.0,
            family_speed: speeds([0.93, 0.98, 0.95, 1.0, 0.9, 0.97]),
            input_scale: inputs,
            input_required_mem_mb: BTreeMap::new(),
            noise_cv: 0.05,
        },
        "linpack" => SyntheticFunctionSpec {
            name: name.into(),
            archetype: Archetype::MemoryCliff,
            serial_ms: 800.0,
            parallel_ms: 2400.0,
            parallel_cap: 1.0,
            required_mem_mb: 1024.0,
            family_speed: speeds([1.05, 1.08, 0.87, 0.95, 0.92, 1.0]),
            input_scale: inputs,
            input_required_mem_mb: [
                ("small".to_string(), 512.0),
                ("large".to_string(), 2048.0),
            ]
            .into_iter()
            .collect(),
            noise_cv: 0.05,
        },
        "object-copy" => SyntheticFunctionSpec {
            name: name.into(),
            archetype: Archetype::NetworkPlateau,
            serial_ms: 1200.0,
            parallel_ms: 300.0,
            parallel_cap: 2.0,
            required_mem_mb: 128.0,
            family_speed: speeds([0.97, 0.95, 1.02, 1.0, 1.05, 1.03]),
            input_scale: inputs,
            input_required_mem_mb: BTreeMap::new(),
            noise_cv: 0.05,
        },
        other => return Err(BenchError::UnknownPreset(other.to_string())),
    };
    Ok(spec)
}

pub fn presets() -> Vec<SyntheticFunctionSpec> {
    PRESET_NAMES.iter().map(|n| preset(n).expect("bundled preset")).collect()
}
