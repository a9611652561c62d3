//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so every criterion reports even when an
//! earlier one fails. Lines go straight to stdout.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rightsize_core::bench::PRESET_NAMES;
use rightsize_core::error::BenchError;
use rightsize_core::eval::{count_violations, mape_all, mape_family_best, strategy_gap};
use rightsize_core::multiobj::{
    actual_front, hierarchical_optimize, pareto_distance, pareto_front, predicted_front, weighted_select,
    ParetoPoint, Predictor, TruthPredictor, PORTFOLIO_WEIGHTS,
};
use rightsize_core::provider::{count_alternates, substitute};
use rightsize_core::{
    expected_improvement, preset, run, solve_pricing, default_pricing, AnalysisError, Evaluator, Family,
    InstancePriceRecord, Method, Metric, MemoryCharge, Normalizers, ObjectiveSpec, OptimizationTrace, OptimizeError,
    PricingTable, Problem, ResourceConfig, RunResult, RunSettings, SearchSpace, Strategy, SurrogateKind,
    SyntheticEvaluator, TruthTable,
};

// Pinned tolerances and limits.
const PRICING_REL_TOL: f64 = 1e-9;
const PRICING_SYSTEMS: usize = 100;
const FAST_LIMIT: Duration = Duration::from_secs(1);
const EI_TOL: f64 = 1e-9;
const EI_TRIPLES: usize = 1000;
const EI_WORKED_TOL: f64 = 5e-7;
const SIMPSON_INTERVALS: usize = 40_000;
const SIMPSON_LOWER_Z: f64 = -14.0;
const CONVERGENCE_BUDGET: usize = 20;
const CONVERGENCE_N_INIT: usize = 3;
const CONVERGENCE_SEEDS: u64 = 10;
const CONVERGENCE_RATIO: f64 = 1.10;
const CONVERGENCE_MIN_PASSING: usize = 5;
const CONVERGENCE_LIMIT: Duration = Duration::from_secs(300);
const PARETO_SETS: usize = 1000;
const PARETO_MAX_N: usize = 300;
const HIER_THETA: f64 = 0.2;
const VALUE_TIE_REL: f64 = 1e-12;
const MAPE_TOL: f64 = 1e-9;
const MAPE_SCALES: [f64; 5] = [0.25, 0.5, 0.9, 1.1, 3.0];
const MAPE_HAND_EXPECTED: f64 = (10.0 + 500.0 / 9.0) / 2.0;
const SPOT_MULTIPLIER: f64 = 0.2;
const TIME_CAP: f64 = 0.10;
const REPRO_SEEDS: &str = "3";

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs())
}

fn space() -> SearchSpace {
    SearchSpace::default()
}

fn truth_of(name: &str) -> TruthTable {
    let spec = preset(name).unwrap();
    spec.truth("default", &space(), rightsize_core::bench::DEFAULT_TIMEOUT_MS)
}

// 1

fn random_price_system(rng: &mut ChaCha8Rng) -> (Vec<InstancePriceRecord>, BTreeMap<String, f64>, BTreeMap<String, f64>) {
    let n_cpu = rng.random_range(1..=4);
    let n_mem = rng.random_range(1..=3);
    let x: BTreeMap<String, f64> = (0..n_cpu).map(|g| (format!("cpu{g}"), rng.random_range(0.005..0.2))).collect();
    let y: BTreeMap<String, f64> = (0..n_mem).map(|m| (format!("mem{m}"), rng.random_range(0.0005..0.02))).collect();
    let alphas = [1u32, 2, 4, 8, 16, 32];
    let mut records = Vec::new();
    let mut push = |cpu: &str, mem: &str, alpha: u32, beta: f64| {
        let price = alpha as f64 * x[cpu] + beta * y[mem];
        let id = records.len();
        records.push(InstancePriceRecord::new(Family::new(format!("f{id}")), alpha, beta, price, cpu, mem));
    };
    for m in 0..n_mem {
        // two shapes with different memory per vCPU pin down cpu0 and this memory group
        let a = alphas[rng.random_range(0..alphas.len())];
        let ratio = [1.0, 2.0, 4.0, 8.0][rng.random_range(0..4)];
        push("cpu0", &format!("mem{m}"), a, a as f64 * ratio);
        let b = alphas[rng.random_range(0..alphas.len())];
        push("cpu0", &format!("mem{m}"), b, b as f64 * ratio * 2.0);
    }
    for g in 1..n_cpu {
        let a = alphas[rng.random_range(0..alphas.len())];
        let beta = a as f64 * [2.0, 4.0, 8.0][rng.random_range(0..3)];
        let m = rng.random_range(0..n_mem);
        push(&format!("cpu{g}"), &format!("mem{m}"), a, beta);
    }
    records.shuffle(rng);
    (records, x, y)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0_f64;
    for i in 0..PRICING_SYSTEMS {
        let (records, x, y) = random_price_system(&mut rng);
        let t = solve_pricing(&records).map_err(|e| format!("system {i}: {e}"))?;
        for (g, want) in &x {
            worst = worst.max(rel_err(t.cpu_rates[g], *want));
        }
        for (m, want) in &y {
            worst = worst.max(rel_err(t.mem_rates[m], *want));
        }
    }
    check(worst < PRICING_REL_TOL, || format!("worst relative error {worst:e}"))?;
    let t = solve_pricing(&[
        InstancePriceRecord::new("c5", 2, 4.0, 0.085, "cpuA", "memX"),
        InstancePriceRecord::new("m5", 2, 8.0, 0.096, "cpuB", "memX"),
        InstancePriceRecord::new("r5", 2, 16.0, 0.126, "cpuB", "memX"),
    ])
    .map_err(|e| e.to_string())?;
    let (y, xa, xb) = (t.mem_rates["memX"], t.cpu_rates["cpuA"], t.cpu_rates["cpuB"]);
    check(
        rel_err(y, 0.00375) < PRICING_REL_TOL && rel_err(xa, 0.035) < PRICING_REL_TOL && rel_err(xb, 0.033) < PRICING_REL_TOL,
        || format!("three-instance example gave Y={y} X=({xa}, {xb})"),
    )?;
    let elapsed = start.elapsed();
    check(elapsed < FAST_LIMIT, || format!("took {elapsed:?}"))?;
    Ok(format!("{PRICING_SYSTEMS} systems, worst rel err {worst:.1e}; Y=0.00375 X=0.035/0.033; {elapsed:.1?}"))
}

// 2

fn prop_cpu_by_hand(memory_mb: u32) -> f64 {
    match memory_mb {
        128 | 256 => 0.25,
        512 => 0.5,
        768 => 0.75,
        1024 => 1.0,
        2048 => 2.0,
        _ => unreachable!(),
    }
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let cpus = [0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0];
    let mems = [128u32, 256, 512, 768, 1024, 2048];
    let fams = ["c6g", "m6g", "c5", "m5", "c5a", "m5a"];
    let mut brute = BTreeSet::new();
    for f in fams {
        for c in cpus {
            for m in mems {
                brute.insert(ResourceConfig::new(c, m, f));
            }
        }
    }
    let space = space();
    let full: BTreeSet<ResourceConfig> = space.enumerate().into_iter().collect();
    check(space.enumerate().len() == 288 && full == brute, || format!("decoupled has {} configs", full.len()))?;
    let sliced = space.slice_on_failure(512).map_err(|e| e.to_string())?;
    let sliced_set: BTreeSet<ResourceConfig> = sliced.enumerate().into_iter().collect();
    let sliced_brute: BTreeSet<ResourceConfig> = brute.iter().filter(|c| c.memory_mb > 512).cloned().collect();
    check(sliced_set.len() == 144 && sliced_set == sliced_brute, || format!("slice at 512 kept {}", sliced_set.len()))?;
    for f in fams {
        let fam = Family::from(f);
        for strategy in Strategy::standard_set(&fam) {
            let sub: BTreeSet<ResourceConfig> = space
                .with_strategy(strategy.clone())
                .map_err(|e| e.to_string())?
                .enumerate()
                .into_iter()
                .collect();
            let want: BTreeSet<ResourceConfig> = brute
                .iter()
                .filter(|c| match &strategy {
                    Strategy::Decoupled => true,
                    Strategy::DecoupledSingleFamily(g) => &c.family == g,
                    Strategy::PropCpu(g) => &c.family == g && c.cpu_share == prop_cpu_by_hand(c.memory_mb),
                    Strategy::FixedCpu(g) => &c.family == g && c.cpu_share == 1.0,
                })
                .cloned()
                .collect();
            check(sub.is_subset(&full), || format!("{} escapes the decoupled space", strategy.name()))?;
            check(sub == want, || format!("{} differs from brute force", strategy.name()))?;
        }
    }
    for name in PRESET_NAMES {
        let truth = truth_of(name);
        let gaps = strategy_gap(&truth, &default_pricing(), &space, &Family::from("m5")).map_err(|e| e.to_string())?;
        let d = gaps.iter().find(|g| g.strategy == "decoupled").ok_or("no decoupled row")?;
        check(d.time_ratio == 1.0 && d.cost_ratio == 1.0, || {
            format!("{name}: decoupled gap ({}, {})", d.time_ratio, d.cost_ratio)
        })?;
    }
    let elapsed = start.elapsed();
    check(elapsed < FAST_LIMIT, || format!("took {elapsed:?}"))?;
    Ok(format!("288 -> 144 at 512 MB, 24 subspaces match brute force, decoupled gap 1.0 on 6 grids; {elapsed:.1?}"))
}

// 3

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// EI by composite Simpson quadrature of `(best - y)^+` against the normal density.
fn ei_quadrature(mean: f64, sd: f64, best: f64) -> f64 {
    let z0 = (best - mean) / sd;
    if z0 <= SIMPSON_LOWER_Z {
        return 0.0;
    }
    let n = SIMPSON_INTERVALS;
    let h = (z0 - SIMPSON_LOWER_Z) / n as f64;
    let f = |z: f64| (best - mean - sd * z) * normal_pdf(z);
    let mut s = f(SIMPSON_LOWER_Z) + f(z0);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(SIMPSON_LOWER_Z + i as f64 * h);
    }
    s * h / 3.0
}

fn criterion_3() -> Outcome {
    let worked = [
        (expected_improvement(1.0, 1.0, 1.0), 0.398942),
        (expected_improvement(2.0, 1.0, 1.0), 0.083315),
        (expected_improvement(2.0, 0.0, 1.0), 0.0),
    ];
    for (got, want) in worked {
        check((got - want).abs() < EI_WORKED_TOL, || format!("worked example gave {got}, want {want}"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0_f64;
    for _ in 0..EI_TRIPLES {
        let sd: f64 = rng.random_range(0.01..5.0);
        let z: f64 = rng.random_range(-8.0..8.0);
        let mean: f64 = rng.random_range(-100.0..100.0);
        let best = mean + z * sd;
        let got = expected_improvement(mean, sd, best);
        let want = ei_quadrature(mean, sd, best);
        let err = (got - want).abs();
        worst = worst.max(err);
        check(err <= EI_TOL, || format!("EI({mean}, {sd}, {best}) = {got}, quadrature {want}"))?;
    }
    Ok(format!("3 worked values; {EI_TRIPLES} triples vs quadrature, worst abs err {worst:.1e}"))
}

// 4 and 5

struct ConvergenceRuns {
    traces: Vec<OptimizationTrace>,
    /// (preset, median normalized best, seeds that found nothing)
    medians: Vec<(&'static str, f64, usize)>,
    elapsed: Duration,
}

fn convergence_runs() -> &'static ConvergenceRuns {
    static RUNS: OnceLock<ConvergenceRuns> = OnceLock::new();
    RUNS.get_or_init(|| {
        let start = Instant::now();
        let space = space();
        let pricing = default_pricing();
        let mut traces = Vec::new();
        let mut medians = Vec::new();
        for name in PRESET_NAMES {
            let truth = truth_of(name);
            let optimum = space
                .enumerate()
                .iter()
                .filter_map(|c| truth.time(c))
                .fold(f64::INFINITY, f64::min);
            let evaluator = SyntheticEvaluator::new(preset(name).unwrap(), "default");
            let problem = Problem {
                evaluator: &evaluator,
                pricing: &pricing,
                objective: ObjectiveSpec::Time,
                function_id: name,
                input_id: "default",
            };
            let mut ratios = Vec::new();
            let mut failed = 0;
            for seed in 0..CONVERGENCE_SEEDS {
                let settings = RunSettings::new(Method::Bo(SurrogateKind::Gp), seed)
                    .with_budget(CONVERGENCE_BUDGET)
                    .with_n_init(CONVERGENCE_N_INIT);
                let trace = match run(&problem, &space, &settings) {
                    Ok(t) => t,
                    Err(OptimizeError::SpaceExhausted { trace }) => *trace,
                    Err(e) => panic!("{name} seed {seed}: {e}"),
                };
                match trace.best().and_then(|b| truth.time(&b.config)) {
                    Some(t) => ratios.push(t / optimum),
                    None => {
                        failed += 1;
                        ratios.push(f64::INFINITY);
                    }
                }
                traces.push(trace);
            }
            ratios.sort_by(f64::total_cmp);
            let n = ratios.len();
            let median = if n % 2 == 1 {
                ratios[n / 2]
            } else {
                (ratios[n / 2 - 1] + ratios[n / 2]) / 2.0
            };
            medians.push((name, median, failed));
        }
        ConvergenceRuns {
            traces,
            medians,
            elapsed: start.elapsed(),
        }
    })
}

fn criterion_4() -> Outcome {
    let runs = convergence_runs();
    let passing = runs.medians.iter().filter(|(_, m, _)| *m <= CONVERGENCE_RATIO).count();
    let detail = runs
        .medians
        .iter()
        .map(|(n, m, _)| format!("{n}={m:.3}"))
        .collect::<Vec<_>>()
        .join(" ");
    check(passing >= CONVERGENCE_MIN_PASSING, || format!("{passing}/6 within 10%: {detail}"))?;
    check(runs.elapsed < CONVERGENCE_LIMIT, || format!("took {:?}", runs.elapsed))?;
    Ok(format!("{passing}/6 within 10% ({detail}); {:.1?}", runs.elapsed))
}

/// OOM below a memory cliff on top of a preset, to force slicing.
struct Cliff {
    inner: SyntheticEvaluator,
    min_mb: u32,
}

impl Evaluator for Cliff {
    fn evaluate(&self, config: &ResourceConfig, seed: u64) -> Result<RunResult, BenchError> {
        if config.memory_mb < self.min_mb {
            return Ok(RunResult::Oom);
        }
        self.inner.evaluate(config, seed)
    }
}

fn slicing_violation(trace: &OptimizationTrace) -> Option<String> {
    let mut floor = 0;
    let mut best = f64::INFINITY;
    for t in &trace.trials {
        if t.config.memory_mb <= floor {
            return Some(format!("trial {} at {} MB with floor {floor}", t.index, t.config.memory_mb));
        }
        if let Some(v) = t.value {
            best = best.min(v);
        }
        let want = (best < f64::INFINITY).then_some(best);
        if t.best_so_far != want {
            return Some(format!("trial {} best_so_far {:?}, running min {want:?}", t.index, t.best_so_far));
        }
        if t.memory_floor_mb < floor {
            return Some(format!("trial {} lowered the floor", t.index));
        }
        floor = t.memory_floor_mb;
    }
    None
}

fn criterion_5(extra: &[OptimizationTrace]) -> Outcome {
    let space = space();
    let pricing = default_pricing();
    let mut traces: Vec<&OptimizationTrace> = convergence_runs().traces.iter().chain(extra).collect();
    let mut own = Vec::new();
    for (i, name) in PRESET_NAMES.iter().enumerate() {
        let cliff = Cliff {
            inner: SyntheticEvaluator::new(preset(name).unwrap(), "default"),
            min_mb: [256, 512, 768, 1024, 2048, 512][i],
        };
        for method in Method::ALL {
            let problem = Problem {
                evaluator: &cliff,
                pricing: &pricing,
                objective: ObjectiveSpec::Time,
                function_id: name,
                input_id: "default",
            };
            let settings = RunSettings::new(method, i as u64).with_budget(12).with_n_init(3);
            own.push(match run(&problem, &space, &settings) {
                Ok(t) => t,
                Err(OptimizeError::SpaceExhausted { trace }) => *trace,
                Err(e) => return Err(format!("{name}/{method}: {e}")),
            });
        }
    }
    traces.extend(own.iter());
    let mut trials = 0;
    let mut slices = 0;
    for t in &traces {
        if let Some(v) = slicing_violation(t) {
            return Err(format!("{} {} seed {}: {v}", t.header.function_id, t.header.method, t.header.seed));
        }
        trials += t.trials.len();
        slices += t.slices.len();
    }
    check(slices > 0, || "no trace exercised slicing".into())?;
    Ok(format!("{} traces, {trials} trials, {slices} slices, no trial at or below the floor, best-so-far monotone", traces.len()))
}

// 6

fn brute_front(points: &[ParetoPoint]) -> BTreeSet<ResourceConfig> {
    points
        .iter()
        .filter(|p| {
            !points.iter().any(|q| {
                q.time_ms <= p.time_ms && q.cost <= p.cost && (q.time_ms < p.time_ms || q.cost < p.cost)
            })
        })
        .map(|p| p.config.clone())
        .collect()
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let all = space().enumerate();
    let mut pool = all.clone();
    // more distinct configs than one space holds, for n up to 300
    pool.extend(all.iter().map(|c| ResourceConfig::new(c.cpu_share, c.memory_mb, Family::new(format!("{}x", c.family)))));
    for i in 0..PARETO_SETS {
        let n = rng.random_range(1..=PARETO_MAX_N);
        pool.shuffle(&mut rng);
        let coarse = rng.random_bool(0.5);
        let points: Vec<ParetoPoint> = pool[..n]
            .iter()
            .map(|c| {
                let (t, k) = if coarse {
                    (rng.random_range(1..20) as f64, rng.random_range(1..20) as f64)
                } else {
                    (rng.random_range(1.0..1000.0), rng.random_range(0.1..10.0))
                };
                ParetoPoint::new(c.clone(), t, k)
            })
            .collect();
        let got: BTreeSet<ResourceConfig> = pareto_front(&points)
            .map_err(|e| format!("set {i}: {e}"))?
            .points
            .into_iter()
            .map(|p| p.config)
            .collect();
        check(got == brute_front(&points), || format!("set {i} (n={n}) differs from brute force"))?;
    }
    let space = space();
    let pricing = default_pricing();
    for name in PRESET_NAMES {
        let truth = truth_of(name);
        let time = TruthPredictor::new(&truth, Metric::Time, &pricing);
        let cost = TruthPredictor::new(&truth, Metric::Cost, &pricing);
        let actual = actual_front(&truth, &pricing, MemoryCharge::Allocated, &space).map_err(|e| e.to_string())?;
        let predicted = predicted_front(&time, &cost, &space, actual.normalizers).map_err(|e| e.to_string())?;
        let a: BTreeSet<_> = actual.configs().into_iter().cloned().collect();
        let p: BTreeSet<_> = predicted.configs().into_iter().cloned().collect();
        check(a == p, || format!("{name}: oracle front differs from actual"))?;
        let measure = |c: &ResourceConfig| Some((truth.time(c)?, truth.cost(c, &pricing, MemoryCharge::Allocated, false)?));
        let d = pareto_distance(&predicted, &actual, measure).map_err(|e| e.to_string())?;
        check(d.members.iter().all(|m| m.d_time == 0.0 && m.d_cost == 0.0), || {
            format!("{name}: nonzero oracle distance")
        })?;
    }
    Ok(format!("{PARETO_SETS} random sets match brute force; oracle fronts equal actual with zero distance on 6 grids"))
}

// 7

fn criterion_7() -> Outcome {
    let space = space();
    let pricing = default_pricing();
    let mut configs = space.enumerate();
    configs.sort();
    for name in PRESET_NAMES {
        let truth = truth_of(name);
        let rows: Vec<(ResourceConfig, f64, f64)> = configs
            .iter()
            .filter_map(|c| Some((c.clone(), truth.time(c)?, truth.cost(c, &pricing, MemoryCharge::Allocated, false)?)))
            .collect();
        let bt = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
        let bc = rows.iter().map(|r| r.2).fold(f64::INFINITY, f64::min);
        let time = TruthPredictor::new(&truth, Metric::Time, &pricing);
        let cost = TruthPredictor::new(&truth, Metric::Cost, &pricing);
        for w in PORTFOLIO_WEIGHTS {
            let score = |r: &(ResourceConfig, f64, f64)| w * r.1 / bt + (1.0 - w) * r.2 / bc;
            let brute = rows
                .iter()
                .fold(None::<&(ResourceConfig, f64, f64)>, |b, r| match b {
                    Some(b) if score(b) <= score(r) => Some(b),
                    _ => Some(r),
                })
                .ok_or("empty grid")?;
            let got = weighted_select(&time, &cost, &space, w, Normalizers { time: bt, cost: bc }).map_err(|e| e.to_string())?;
            check(got.config == brute.0 || close(got.value, score(brute), VALUE_TIE_REL), || {
                format!("{name} W={w}: chose {} want {}", got.config, brute.0)
            })?;
        }
        for primary in [Metric::Time, Metric::Cost] {
            let pick = |r: &(ResourceConfig, f64, f64)| primary.pick(r.1, r.2);
            let other = |r: &(ResourceConfig, f64, f64)| primary.other().pick(r.1, r.2);
            let incumbent = rows
                .iter()
                .fold(None::<&(ResourceConfig, f64, f64)>, |b, r| match b {
                    Some(b) if pick(b) <= pick(r) => Some(b),
                    _ => Some(r),
                })
                .ok_or("empty grid")?;
            let cap = (1.0 + HIER_THETA) * pick(incumbent);
            let brute = rows
                .iter()
                .filter(|r| pick(r) <= cap)
                .fold(None::<&(ResourceConfig, f64, f64)>, |b, r| match b {
                    Some(b) if (other(b), pick(b)) <= (other(r), pick(r)) => Some(b),
                    _ => Some(r),
                })
                .ok_or("no feasible config")?;
            let (pm, sm): (&dyn Predictor, &dyn Predictor) = match primary {
                Metric::Time => (&time, &cost),
                Metric::Cost => (&cost, &time),
            };
            let got = hierarchical_optimize(pm, sm, &space, primary, HIER_THETA, &incumbent.0, pick(incumbent))
                .map_err(|e| e.to_string())?;
            check(got.predicted_primary <= cap, || format!("{name} {}: cap broken", primary.name()))?;
            check(got.config == brute.0, || {
                format!("{name} {}: chose {} want {}", primary.name(), got.config, brute.0)
            })?;
        }
    }
    Ok("weighted W in {0,.25,.5,.75,1} and hierarchical theta=0.2 (time and cost primary) match brute force on 6 grids".into())
}

// 8

fn criterion_8() -> Outcome {
    let hand = [100.0, 149.0, 150.0, 400.0];
    let n = count_violations(hand.iter().map(|v| Some(*v)), 100.0, 1.5);
    check(n == 2, || format!("hand example gave {n}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..200 {
        let len = rng.random_range(1..40);
        let mut values: Vec<Option<f64>> = (0..len)
            .map(|_| rng.random_bool(0.9).then(|| rng.random_range(50.0..400.0_f64).round()))
            .collect();
        let base = count_violations(values.iter().copied(), 100.0, 1.5);
        for _ in 0..5 {
            values.shuffle(&mut rng);
            check(count_violations(values.iter().copied(), 100.0, 1.5) == base, || "order changed the count".into())?;
        }
    }
    Ok("[100,149,150,400] -> 2; 200 sequences invariant under 5 shuffles each".into())
}

// 9

struct Scaled<'a> {
    base: &'a dyn Predictor,
    k: f64,
}

impl Predictor for Scaled<'_> {
    fn predict(&self, c: &ResourceConfig) -> Result<Option<f64>, AnalysisError> {
        Ok(self.base.predict(c)?.map(|v| v * self.k))
    }
}

struct Table(BTreeMap<ResourceConfig, f64>);

impl Predictor for Table {
    fn predict(&self, c: &ResourceConfig) -> Result<Option<f64>, AnalysisError> {
        Ok(self.0.get(c).copied())
    }
}

fn criterion_9() -> Outcome {
    let space = space();
    let pricing = default_pricing();
    for name in PRESET_NAMES {
        let truth = truth_of(name);
        let oracle = TruthPredictor::new(&truth, Metric::Time, &pricing);
        let actual: Vec<(ResourceConfig, f64)> =
            space.enumerate().into_iter().filter_map(|c| truth.time(&c).map(|t| (c, t))).collect();
        let m = mape_all(&oracle, &actual).map_err(|e| e.to_string())?;
        let mf = mape_family_best(&oracle, &actual, &space).map_err(|e| e.to_string())?;
        check(m == 0.0 && mf == 0.0, || format!("{name}: oracle MAPE {m} / {mf}"))?;
        for k in MAPE_SCALES {
            let scaled = Scaled { base: &oracle, k };
            let m = mape_all(&scaled, &actual).map_err(|e| e.to_string())?;
            let want = (k - 1.0).abs() * 100.0;
            check((m - want).abs() < MAPE_TOL, || format!("{name} k={k}: {m} want {want}"))?;
        }
    }
    let two = SearchSpace::new(vec![1.0, 2.0], vec![512], vec![Family::from("c5"), Family::from("m5")], Strategy::Decoupled)
        .map_err(|e| e.to_string())?;
    let cfg = |cpu, fam| ResourceConfig::new(cpu, 512, fam);
    let actual = vec![
        (cfg(1.0, "c5"), 100.0),
        (cfg(2.0, "c5"), 60.0),
        (cfg(1.0, "m5"), 90.0),
        (cfg(2.0, "m5"), 50.0),
    ];
    let predicted = Table(
        [(cfg(1.0, "c5"), 80.0), (cfg(2.0, "c5"), 66.0), (cfg(1.0, "m5"), 40.0), (cfg(2.0, "m5"), 55.0)]
            .into_iter()
            .collect(),
    );
    let m = mape_family_best(&predicted, &actual, &two).map_err(|e| e.to_string())?;
    check((m - MAPE_HAND_EXPECTED).abs() < MAPE_TOL, || format!("hand grid gave {m}, want {MAPE_HAND_EXPECTED}"))?;
    Ok(format!("oracle 0%, scaled |k-1|*100 for k in {MAPE_SCALES:?}; hand 2-family grid {m:.4}%"))
}

// 10

fn spot_cost(pricing: &PricingTable, c: &ResourceConfig, t: f64, discounted: bool) -> f64 {
    let r = &pricing.families[&c.family];
    let hourly = c.cpu_share * r.vcpu_hour + c.memory_gb() * r.gb_hour;
    t * hourly / 3.6e6 * if discounted { SPOT_MULTIPLIER } else { 1.0 }
}

fn criterion_10() -> Outcome {
    let space = space();
    let pricing = default_pricing();
    let idle_sets: [&[&str]; 5] = [&["c6g", "m6g"], &["c5a"], &["m5", "m5a"], &["c6g", "m6g", "c5", "m5", "c5a", "m5a"], &[]];
    let mut substitutions = 0;
    let mut cases = 0;
    for name in PRESET_NAMES {
        let truth = truth_of(name);
        let mut configs = space.enumerate();
        configs.sort();
        let timed: Vec<(ResourceConfig, f64)> = configs.iter().filter_map(|c| truth.time(c).map(|t| (c.clone(), t))).collect();
        let fastest = |fam: Option<&Family>| {
            timed
                .iter()
                .filter(|(c, _)| fam.is_none_or(|f| &c.family == f))
                .fold(None::<&(ResourceConfig, f64)>, |b, r| match b {
                    Some(b) if b.1 <= r.1 => Some(b),
                    _ => Some(r),
                })
                .cloned()
        };
        let (incumbent, t0) = fastest(None).ok_or("empty grid")?;
        let oracle = TruthPredictor::new(&truth, Metric::Time, &pricing);
        for idle in idle_sets {
            let idle: Vec<Family> = idle.iter().map(|f| Family::from(*f)).collect();
            let mut want = (incumbent.clone(), spot_cost(&pricing, &incumbent, t0, idle.contains(&incumbent.family)));
            for fam in space.family_axis.iter().filter(|f| idle.contains(f)) {
                let Some((c, t)) = fastest(Some(fam)) else { continue };
                if t <= (1.0 + TIME_CAP) * t0 {
                    let k = spot_cost(&pricing, &c, t, true);
                    if k < want.1 {
                        want = (c, k);
                    }
                }
            }
            let got = substitute(&oracle, &truth, &pricing, &space, &incumbent, &idle, SPOT_MULTIPLIER, TIME_CAP)
                .map_err(|e| e.to_string())?;
            let got_cost = spot_cost(&pricing, &got.chosen, truth.time(&got.chosen).ok_or("chosen fails")?, idle.contains(&got.chosen.family));
            check(got.chosen == want.0 || close(got_cost, want.1, VALUE_TIE_REL), || {
                format!("{name} idle {idle:?}: chose {} want {}", got.chosen, want.0)
            })?;
            let nt = got.normalized_time.ok_or("no normalized time")?;
            check(nt <= 1.0 + TIME_CAP, || format!("{name}: time penalty {nt}"))?;
            substitutions += got.substituted as usize;
            cases += 1;
        }
    }
    check(substitutions > 0, || "no case substituted".into())?;

    let fams = ["c6g", "m6g", "c5", "m5", "c5a", "m5a"];
    let grid = |times: [f64; 6]| -> Vec<(ResourceConfig, f64)> {
        fams.iter()
            .zip(times)
            .flat_map(|(f, t)| [(ResourceConfig::new(1.0, 512, *f), t), (ResourceConfig::new(2.0, 512, *f), t * 1.5)])
            .collect()
    };
    let count = |v: &[(ResourceConfig, f64)], th: f64| count_alternates(v, th).map_err(|e| e.to_string());
    let red = grid([100.0, 130.0, 140.0, 150.0, 125.0, 200.0]);
    let blue = grid([100.0, 101.0, 102.0, 103.0, 104.0, 100.0]);
    let pair = grid([104.0, 100.0, 140.0, 150.0, 125.0, 200.0]);
    let hand = [
        (count(&red, 0.2)?, 0),
        (count(&blue, 0.05)?, 5),
        (count(&pair, 0.05)?, 1),
        (count(&pair, 0.2)?, 1),
        (count(&pair, 0.3)?, 2),
        (count(&red, 1.5)?, 5),
    ];
    for (i, (got, want)) in hand.iter().enumerate() {
        check(got == want, || format!("alternate case {i}: {got} want {want}"))?;
    }
    Ok(format!("{cases} oracle substitutions match brute force within the 10% cap ({substitutions} moved); red 0, blue 5, pair cases hold"))
}

// 11

fn read_dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn criterion_11(traces: &mut Vec<OptimizationTrace>) -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path().join("out");
    let args = [
        "optimize", "--synthetic", "face-detect,ocr", "--objective", "weighted:0.5", "--surrogate", "rf", "--seeds",
        REPRO_SEEDS,
    ];
    let invoke = || -> Result<BTreeMap<String, Vec<u8>>, String> {
        let status = Command::new(env!("CARGO_BIN_EXE_rightsize"))
            .arg("--out")
            .arg(&out)
            .args(args)
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(String::from_utf8_lossy(&status.stderr).into_owned());
        }
        let files = read_dir_bytes(&out);
        fs::remove_dir_all(&out).map_err(|e| e.to_string())?;
        Ok(files)
    };
    let first = invoke()?;
    let second = invoke()?;
    let trace_files: Vec<&String> = first.keys().filter(|k| k.ends_with(".jsonl")).collect();
    check(!trace_files.is_empty(), || "no traces written".into())?;
    check(first == second, || {
        let diff: Vec<_> = first.keys().filter(|k| first.get(*k) != second.get(*k)).collect();
        format!("files differ: {diff:?}")
    })?;
    for (name, bytes) in &first {
        if name.ends_with(".jsonl") {
            traces.push(OptimizationTrace::read_jsonl(bytes.as_slice()).map_err(|e| e.to_string())?);
        }
    }
    Ok(format!("{} trace files and summary/manifest byte-identical across two runs", trace_files.len()))
}

fn report(id: usize, outcome: Outcome) -> bool {
    let mut stdout = std::io::stdout().lock();
    let (tag, text, ok) = match outcome {
        Ok(t) => ("PASS", t, true),
        Err(t) => ("FAIL", t, false),
    };
    let _ = writeln!(stdout, "criterion {id:>2}: {tag} - {text}");
    ok
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    })
}

fn main() -> ExitCode {
    let mut repro_traces = Vec::new();
    let repro = guarded(|| criterion_11(&mut repro_traces));
    let results = [
        report(1, guarded(criterion_1)),
        report(2, guarded(criterion_2)),
        report(3, guarded(criterion_3)),
        report(4, guarded(criterion_4)),
        report(5, guarded(|| criterion_5(&repro_traces))),
        report(6, guarded(criterion_6)),
        report(7, guarded(criterion_7)),
        report(8, guarded(criterion_8)),
        report(9, guarded(criterion_9)),
        report(10, guarded(criterion_10)),
        report(11, repro),
    ];
    let passed = results.iter().filter(|ok| **ok).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
