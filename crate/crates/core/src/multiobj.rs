//! Time/cost trade-off interfaces: Pareto fronts over predicted objectives,
//! weighted portfolios and hierarchical (constrained) selection.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::bench::{Evaluator, TruthTable};
use crate::error::AnalysisError;
use crate::optimize::{run, Metric, Normalizers, ObjectiveSpec, OptimizationTrace, Problem, RunSettings};
use crate::pricing::{MemoryCharge, PricingTable};
use crate::space::{ResourceConfig, SearchSpace};
use crate::surrogate::{self, FittedSurrogate, Observation, SurrogateSpec};

/// Weights of the weighted portfolio, `W_t` ascending.
pub const PORTFOLIO_WEIGHTS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// Default allowed degradation of the primary objective.
pub const DEFAULT_THETA: f64 = 0.2;

/// Something that estimates one objective at a config.
pub trait Predictor {
    /// Estimated value; `None` when the config is known to fail.
    fn predict(&self, config: &ResourceConfig) -> Result<Option<f64>, AnalysisError>;
}

/// Ground truth used as a perfect model.
#[derive(Debug, Clone, Copy)]
pub struct TruthPredictor<'a> {
    pub truth: &'a TruthTable,
    pub metric: Metric,
    pub pricing: &'a PricingTable,
    pub charge: MemoryCharge,
    pub use_spot: bool,
}

impl<'a> TruthPredictor<'a> {
    pub fn new(truth: &'a TruthTable, metric: Metric, pricing: &'a PricingTable) -> Self {
        TruthPredictor {
            truth,
            metric,
            pricing,
            charge: MemoryCharge::Allocated,
            use_spot: false,
        }
    }
}

impl Predictor for TruthPredictor<'_> {
    fn predict(&self, config: &ResourceConfig) -> Result<Option<f64>, AnalysisError> {
        Ok(match self.metric {
            Metric::Time => self.truth.time(config),
            Metric::Cost => self.truth.cost(config, self.pricing, self.charge, self.use_spot),
        })
    }
}

/// Predictive mean of a surrogate over a space.
#[derive(Debug, Clone)]
pub struct ModelPredictor {
    pub model: FittedSurrogate,
    pub space: SearchSpace,
}

impl ModelPredictor {
    /// Fits `spec` to the successful trials of `trace`, above the trace's
    /// final memory floor. The returned space carries that floor.
    pub fn from_trace(trace: &OptimizationTrace, space: &SearchSpace, spec: &SurrogateSpec) -> Result<Self, AnalysisError> {
        let floor = trace
            .trials
            .last()
            .map_or(space.memory_floor_mb, |t| t.memory_floor_mb.max(space.memory_floor_mb));
        let mut space = space.clone();
        space.memory_floor_mb = floor;
        let training: Vec<Observation> = trace
            .trials
            .iter()
            .filter(|t| t.config.memory_mb > floor)
            .filter_map(|t| t.value.map(|v| (t.config.clone(), v)))
            .map(|(c, v)| Ok((space.encode(&c)?, v)))
            .collect::<Result<_, AnalysisError>>()?;
        if training.is_empty() {
            return Err(AnalysisError::Empty("trace has no successful trial to learn from".into()));
        }
        Ok(ModelPredictor {
            model: surrogate::fit(spec, &training)?,
            space,
        })
    }
}

impl Predictor for ModelPredictor {
    fn predict(&self, config: &ResourceConfig) -> Result<Option<f64>, AnalysisError> {
        let (mean, _) = self.model.predict(&self.space.encode(config)?)?;
        Ok(Some(mean))
    }
}

/// Converts a time predictor into a cost predictor (or back) through the
/// per-millisecond price of each config.
pub struct PricedPredictor<'a> {
    pub base: &'a dyn Predictor,
    /// Metric produced by `base`.
    pub from: Metric,
    pub pricing: &'a PricingTable,
}

impl Predictor for PricedPredictor<'_> {
    fn predict(&self, config: &ResourceConfig) -> Result<Option<f64>, AnalysisError> {
        let Some(v) = self.base.predict(config)? else {
            return Ok(None);
        };
        let rate = self.pricing.cost_rate_per_ms(config, false)?;
        Ok(Some(match self.from {
            Metric::Time => v * rate,
            Metric::Cost => v / rate,
        }))
    }
}

/// One config with its (predicted or measured) time and cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub config: ResourceConfig,
    pub time_ms: f64,
    pub cost: f64,
}

impl ParetoPoint {
    pub fn new(config: ResourceConfig, time_ms: f64, cost: f64) -> Self {
        ParetoPoint { config, time_ms, cost }
    }

    /// Strictly better in one objective and no worse in the other.
    pub fn dominates(&self, other: &ParetoPoint) -> bool {
        self.time_ms <= other.time_ms
            && self.cost <= other.cost
            && (self.time_ms < other.time_ms || self.cost < other.cost)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoFront {
    /// Non-dominated points by ascending time, then cost, then config.
    pub points: Vec<ParetoPoint>,
    /// Scale used to normalize time and cost.
    pub normalizers: Normalizers,
}

impl ParetoFront {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn configs(&self) -> Vec<&ResourceConfig> {
        self.points.iter().map(|p| &p.config).collect()
    }

    /// Member coordinates divided by the normalizers.
    pub fn normalized(&self) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .map(|p| (p.time_ms / self.normalizers.time, p.cost / self.normalizers.cost))
            .collect()
    }
}

fn point_order(a: &ParetoPoint, b: &ParetoPoint) -> Ordering {
    a.time_ms
        .total_cmp(&b.time_ms)
        .then(a.cost.total_cmp(&b.cost))
        .then_with(|| a.config.cmp(&b.config))
}

/// Non-dominated subset of `points`, deduplicated by config (first
/// occurrence wins). Points with identical values are all kept.
pub fn non_dominated(points: &[ParetoPoint]) -> Result<Vec<ParetoPoint>, AnalysisError> {
    if points.is_empty() {
        return Err(AnalysisError::Empty("no points to build a front from".into()));
    }
    if points.iter().any(|p| !p.time_ms.is_finite() || !p.cost.is_finite()) {
        return Err(AnalysisError::InvalidArgument("front points must be finite".into()));
    }
    let mut seen = std::collections::HashSet::new();
    let mut sorted: Vec<&ParetoPoint> = points.iter().filter(|p| seen.insert(&p.config)).collect();
    sorted.sort_by(|a, b| point_order(a, b));

    let mut front = Vec::new();
    let mut min_cost_before = f64::INFINITY;
    let mut i = 0;
    while i < sorted.len() {
        let t = sorted[i].time_ms;
        let mut j = i;
        while j < sorted.len() && sorted[j].time_ms == t {
            j += 1;
        }
        let group_min = sorted[i].cost;
        for p in &sorted[i..j] {
            if p.cost < min_cost_before && p.cost == group_min {
                front.push((*p).clone());
            }
        }
        min_cost_before = min_cost_before.min(group_min);
        i = j;
    }
    Ok(front)
}

/// Pareto front of `points`, normalized by their minimum time and cost.
pub fn pareto_front(points: &[ParetoPoint]) -> Result<ParetoFront, AnalysisError> {
    let front = non_dominated(points)?;
    let normalizers = Normalizers {
        time: points.iter().map(|p| p.time_ms).fold(f64::INFINITY, f64::min),
        cost: points.iter().map(|p| p.cost).fold(f64::INFINITY, f64::min),
    };
    Ok(ParetoFront { points: front, normalizers })
}

/// Front of predicted (time, cost) over every config of `space`.
///
/// Configs a predictor marks as failing are skipped. `normalizers` are the
/// best values found by the runs that trained the two models.
pub fn predicted_front(
    time: &dyn Predictor,
    cost: &dyn Predictor,
    space: &SearchSpace,
    normalizers: Normalizers,
) -> Result<ParetoFront, AnalysisError> {
    let mut points = Vec::new();
    for c in space.enumerate() {
        if let (Some(t), Some(k)) = (time.predict(&c)?, cost.predict(&c)?) {
            points.push(ParetoPoint::new(c, t, k));
        }
    }
    Ok(ParetoFront {
        points: non_dominated(&points)?,
        normalizers,
    })
}

/// Front of the measured outcomes over `space`.
pub fn actual_front(
    truth: &TruthTable,
    pricing: &PricingTable,
    charge: MemoryCharge,
    space: &SearchSpace,
) -> Result<ParetoFront, AnalysisError> {
    let mut points = Vec::new();
    for c in space.enumerate() {
        if let (Some(t), Some(k)) = (truth.time(&c), truth.cost(&c, pricing, charge, false)) {
            points.push(ParetoPoint::new(c, t, k));
        }
    }
    pareto_front(&points)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberDistance {
    pub config: ResourceConfig,
    pub nearest: ResourceConfig,
    /// Relative time gap to the nearest actual member.
    pub d_time: f64,
    /// Relative cost gap to the nearest actual member.
    pub d_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoDistance {
    pub members: Vec<MemberDistance>,
    pub mean_d_time: f64,
    pub mean_d_cost: f64,
}

/// Gap between each predicted member, at its measured (time, cost), and the
/// nearest actual member in normalized Euclidean distance (ties go to the
/// smaller time).
pub fn pareto_distance(
    predicted: &ParetoFront,
    actual: &ParetoFront,
    measure: impl Fn(&ResourceConfig) -> Option<(f64, f64)>,
) -> Result<ParetoDistance, AnalysisError> {
    if predicted.is_empty() || actual.is_empty() {
        return Err(AnalysisError::Empty("both fronts must be non-empty".into()));
    }
    let n = actual.normalizers;
    let mut members = Vec::with_capacity(predicted.len());
    for p in &predicted.points {
        let (t, c) = measure(&p.config).ok_or_else(|| AnalysisError::MissingTruth(p.config.clone()))?;
        let dist = |q: &ParetoPoint| ((t - q.time_ms) / n.time).hypot((c - q.cost) / n.cost);
        let nearest = actual
            .points
            .iter()
            .min_by(|a, b| dist(a).total_cmp(&dist(b)).then(a.time_ms.total_cmp(&b.time_ms)))
            .expect("actual front is non-empty");
        members.push(MemberDistance {
            config: p.config.clone(),
            nearest: nearest.config.clone(),
            d_time: (t - nearest.time_ms).abs() / nearest.time_ms,
            d_cost: (c - nearest.cost).abs() / nearest.cost,
        });
    }
    let k = members.len() as f64;
    Ok(ParetoDistance {
        mean_d_time: members.iter().map(|m| m.d_time).sum::<f64>() / k,
        mean_d_cost: members.iter().map(|m| m.d_cost).sum::<f64>() / k,
        members,
    })
}

/// A config chosen for a trade-off, with the values it was chosen on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub w_time: f64,
    pub config: ResourceConfig,
    pub time_ms: f64,
    pub cost: f64,
    pub value: f64,
}

/// Argmin of the weighted objective over predicted values; ties go to the
/// smallest config.
pub fn weighted_select(
    time: &dyn Predictor,
    cost: &dyn Predictor,
    space: &SearchSpace,
    w_time: f64,
    normalizers: Normalizers,
) -> Result<Recommendation, AnalysisError> {
    let objective = ObjectiveSpec::weighted(w_time, normalizers);
    objective.validate()?;
    let mut configs = space.enumerate();
    configs.sort();
    let mut best: Option<Recommendation> = None;
    for c in configs {
        let (Some(t), Some(k)) = (time.predict(&c)?, cost.predict(&c)?) else {
            continue;
        };
        let value = crate::optimize::objective_value(&objective, t, k)?;
        if best.as_ref().is_none_or(|b| value < b.value) {
            best = Some(Recommendation {
                w_time,
                config: c,
                time_ms: t,
                cost: k,
                value,
            });
        }
    }
    best.ok_or_else(|| AnalysisError::Empty("no config has both predictions".into()))
}

/// Recommendations for every weight plus the traces that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedPortfolio {
    pub normalizers: Normalizers,
    pub recommendations: Vec<Recommendation>,
    #[serde(skip)]
    pub traces: Vec<OptimizationTrace>,
}

fn recommendation_from(trace: &OptimizationTrace, w_time: f64) -> Result<Recommendation, AnalysisError> {
    let best = trace
        .best()
        .ok_or_else(|| AnalysisError::Empty(format!("optimization for W_t={w_time} found no working config")))?;
    Ok(Recommendation {
        w_time,
        config: best.config.clone(),
        time_ms: best.duration_ms.unwrap_or(f64::NAN),
        cost: best.cost.unwrap_or(f64::NAN),
        value: best.value.unwrap_or(f64::NAN),
    })
}

/// Runs the time and cost optimizations, fixes the normalizers from their
/// best values, then runs one weighted optimization per intermediate weight.
/// Recommendations are ordered by ascending `W_t`.
pub fn weighted_portfolio(
    evaluator: &dyn Evaluator,
    pricing: &PricingTable,
    space: &SearchSpace,
    settings: &RunSettings,
    function_id: &str,
    input_id: &str,
) -> Result<WeightedPortfolio, AnalysisError> {
    let problem = |objective| Problem {
        evaluator,
        pricing,
        objective,
        function_id,
        input_id,
    };
    let time_trace = run(&problem(ObjectiveSpec::Time), space, settings)?;
    let cost_trace = run(&problem(ObjectiveSpec::Cost), space, settings)?;
    let by_time = recommendation_from(&time_trace, 1.0)?;
    let by_cost = recommendation_from(&cost_trace, 0.0)?;
    let normalizers = Normalizers {
        time: by_time.time_ms,
        cost: by_cost.cost,
    };
    let mut recommendations = vec![by_cost];
    let mut traces = vec![cost_trace];
    for w in &PORTFOLIO_WEIGHTS[1..4] {
        let trace = run(&problem(ObjectiveSpec::weighted(*w, normalizers)), space, settings)?;
        recommendations.push(recommendation_from(&trace, *w)?);
        traces.push(trace);
    }
    recommendations.push(by_time);
    traces.push(time_trace);
    Ok(WeightedPortfolio {
        normalizers,
        recommendations,
        traces,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchicalChoice {
    pub config: ResourceConfig,
    pub primary: Metric,
    pub theta: f64,
    /// Upper bound on the primary objective: `(1 + theta) * best`.
    pub cap: f64,
    pub predicted_primary: f64,
    pub predicted_secondary: f64,
}

/// Minimizes the predicted secondary objective among configs whose predicted
/// primary stays within `(1 + theta)` of `best_primary`, the value of the
/// primary-best config `incumbent`. The incumbent is always feasible. Ties go
/// to the lower primary, then the smaller config.
pub fn hierarchical_optimize(
    primary_model: &dyn Predictor,
    secondary_model: &dyn Predictor,
    space: &SearchSpace,
    primary: Metric,
    theta: f64,
    incumbent: &ResourceConfig,
    best_primary: f64,
) -> Result<HierarchicalChoice, AnalysisError> {
    if !(theta >= 0.0) {
        return Err(AnalysisError::InvalidArgument(format!("theta {theta} must be non-negative")));
    }
    let cap = (1.0 + theta) * best_primary;
    let mut configs = space.enumerate();
    configs.sort();
    let mut best: Option<(ResourceConfig, f64, f64)> = None;
    let consider = |c: ResourceConfig, p: f64, s: f64, best: &mut Option<(ResourceConfig, f64, f64)>| {
        let better = match best {
            None => true,
            Some((bc, bp, bs)) => s
                .total_cmp(bs)
                .then(p.total_cmp(bp))
                .then_with(|| c.cmp(bc))
                .is_lt(),
        };
        if better {
            *best = Some((c, p, s));
        }
    };
    for c in configs {
        let (Some(p), Some(s)) = (primary_model.predict(&c)?, secondary_model.predict(&c)?) else {
            continue;
        };
        if p <= cap || c == *incumbent {
            consider(c, p, s, &mut best);
        }
    }
    if best.is_none() {
        // the incumbent may sit outside `space` or lack a prediction
        let p = primary_model.predict(incumbent)?.unwrap_or(best_primary);
        let s = secondary_model
            .predict(incumbent)?
            .ok_or_else(|| AnalysisError::MissingTruth(incumbent.clone()))?;
        consider(incumbent.clone(), p, s, &mut best);
    }
    let (config, predicted_primary, predicted_secondary) = best.expect("incumbent is feasible");
    Ok(HierarchicalChoice {
        config,
        primary,
        theta,
        cap,
        predicted_primary,
        predicted_secondary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::RunResult;
    use crate::space::Family;

    fn p(t: f64, c: f64, mem: u32) -> ParetoPoint {
        ParetoPoint::new(ResourceConfig::new(1.0, mem, "m5"), t, c)
    }

    fn values(front: &[ParetoPoint]) -> Vec<(f64, f64)> {
        front.iter().map(|p| (p.time_ms, p.cost)).collect()
    }

    #[test]
    fn front_by_inspection() {
        let pts = vec![p(1.0, 3.0, 128), p(2.0, 2.0, 256), p(3.0, 1.0, 512), p(3.0, 3.0, 768)];
        assert_eq!(values(&non_dominated(&pts).unwrap()), vec![(1.0, 3.0), (2.0, 2.0), (3.0, 1.0)]);
        assert_eq!(non_dominated(&pts[..1]).unwrap().len(), 1);
        assert!(non_dominated(&[]).is_err());
    }

    #[test]
    fn identical_points_both_kept() {
        let pts = vec![p(2.0, 2.0, 128), p(2.0, 2.0, 256), p(2.0, 2.0, 128)];
        assert_eq!(non_dominated(&pts).unwrap().len(), 2);
        let tied_time = vec![p(2.0, 3.0, 128), p(2.0, 2.0, 256)];
        assert_eq!(values(&non_dominated(&tied_time).unwrap()), vec![(2.0, 2.0)]);
    }

    struct Table(Vec<(ResourceConfig, f64)>);

    impl Predictor for Table {
        fn predict(&self, config: &ResourceConfig) -> Result<Option<f64>, AnalysisError> {
            Ok(self.0.iter().find(|(c, _)| c == config).map(|(_, v)| *v))
        }
    }

    fn abc() -> (SearchSpace, Table, Table, Vec<ResourceConfig>) {
        let space = SearchSpace::new(vec![1.0], vec![128, 256, 512], vec![Family::from("m5")], crate::space::Strategy::Decoupled).unwrap();
        let cs = space.enumerate();
        let time = Table(vec![(cs[0].clone(), 100.0), (cs[1].clone(), 115.0), (cs[2].clone(), 150.0)]);
        let cost = Table(vec![(cs[0].clone(), 10.0), (cs[1].clone(), 6.0), (cs[2].clone(), 3.0)]);
        (space, time, cost, cs)
    }

    #[test]
    fn hierarchical_hand_example() {
        let (space, time, cost, cs) = abc();
        let pick = hierarchical_optimize(&time, &cost, &space, Metric::Time, 0.2, &cs[0], 100.0).unwrap();
        assert_eq!(pick.config, cs[1]);
        assert_eq!(pick.predicted_secondary, 6.0);
        let pick = hierarchical_optimize(&time, &cost, &space, Metric::Time, 0.0, &cs[0], 100.0).unwrap();
        assert_eq!(pick.config, cs[0]);
        let pick = hierarchical_optimize(&time, &cost, &space, Metric::Time, 0.5, &cs[0], 100.0).unwrap();
        assert_eq!(pick.config, cs[2]);
    }

    #[test]
    fn weighted_select_extremes() {
        let (space, time, cost, cs) = abc();
        let n = Normalizers { time: 100.0, cost: 3.0 };
        assert_eq!(weighted_select(&time, &cost, &space, 1.0, n).unwrap().config, cs[0]);
        assert_eq!(weighted_select(&time, &cost, &space, 0.0, n).unwrap().config, cs[2]);
    }

    #[test]
    fn distance_arithmetic() {
        let a = ResourceConfig::new(1.0, 128, "m5");
        let b = ResourceConfig::new(1.0, 256, "m5");
        let actual = ParetoFront {
            points: vec![ParetoPoint::new(a.clone(), 100.0, 10.0)],
            normalizers: Normalizers { time: 100.0, cost: 10.0 },
        };
        let predicted = ParetoFront {
            points: vec![ParetoPoint::new(b.clone(), 90.0, 9.0)],
            normalizers: Normalizers { time: 90.0, cost: 9.0 },
        };
        let d = pareto_distance(&predicted, &actual, |_| Some((120.0, 10.0))).unwrap();
        assert!((d.members[0].d_time - 0.2).abs() < 1e-12);
        assert_eq!(d.members[0].d_cost, 0.0);
        assert_eq!(d.mean_d_time, d.members[0].d_time);
    }

    #[test]
    fn distance_tie_prefers_smaller_time() {
        let a = ResourceConfig::new(1.0, 128, "m5");
        let b = ResourceConfig::new(1.0, 256, "m5");
        let actual = ParetoFront {
            points: vec![ParetoPoint::new(a.clone(), 90.0, 11.0), ParetoPoint::new(b.clone(), 110.0, 9.0)],
            normalizers: Normalizers { time: 100.0, cost: 10.0 },
        };
        let predicted = ParetoFront {
            points: vec![ParetoPoint::new(b.clone(), 100.0, 10.0)],
            normalizers: actual.normalizers,
        };
        let d = pareto_distance(&predicted, &actual, |_| Some((100.0, 10.0))).unwrap();
        assert_eq!(d.members[0].nearest, a);
    }

    #[test]
    fn constant_cost_gives_single_member() {
        let (space, time, _, cs) = abc();
        let flat = Table(cs.iter().map(|c| (c.clone(), 5.0)).collect());
        let front = predicted_front(&time, &flat, &space, Normalizers { time: 1.0, cost: 1.0 }).unwrap();
        assert_eq!(front.configs(), vec![&cs[0]]);
    }

    #[test]
    fn priced_predictor_round_trip() {
        let pricing = crate::pricing::default_pricing();
        let mut truth = TruthTable::default();
        let c = ResourceConfig::new(0.5, 512, "c5");
        truth.insert(c.clone(), RunResult::Ok { duration_ms: 1000.0, peak_mem_mb: 200.0 });
        let time = TruthPredictor::new(&truth, Metric::Time, &pricing);
        let cost = PricedPredictor { base: &time, from: Metric::Time, pricing: &pricing };
        let expected = TruthPredictor::new(&truth, Metric::Cost, &pricing).predict(&c).unwrap().unwrap();
        assert!((cost.predict(&c).unwrap().unwrap() - expected).abs() < 1e-18);
        let back = PricedPredictor { base: &cost, from: Metric::Cost, pricing: &pricing };
        assert!((back.predict(&c).unwrap().unwrap() - 1000.0).abs() < 1e-9);
    }
}
