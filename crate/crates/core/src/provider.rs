//! Provider-side analysis: how many instance families can stand in for the
//! best one, and what moving a function onto discounted idle families saves.

use serde::{Deserialize, Serialize};

use crate::bench::TruthTable;
use crate::error::AnalysisError;
use crate::multiobj::Predictor;
use crate::optimize::{objective_value, Normalizers, ObjectiveSpec};
use crate::pricing::{billed_cost, MemoryCharge, PricingTable};
use crate::space::{Family, ResourceConfig, SearchSpace};

/// Thresholds of the alternate-family table.
pub const DEFAULT_THETAS: [f64; 3] = [0.05, 0.10, 0.20];
/// Price multiplier of idle families.
pub const DEFAULT_SPOT_MULTIPLIER: f64 = 0.2;
/// Allowed relative slowdown of a substitute.
pub const DEFAULT_TIME_CAP: f64 = 0.10;

/// Objective columns of the alternate-family table: time, three weighted
/// mixes, cost.
pub fn table_objectives() -> [(&'static str, ObjectiveSpec); 5] {
    let w = |w_time| ObjectiveSpec::Weighted {
        w_time,
        normalizers: None,
    };
    [
        ("ET", ObjectiveSpec::Time),
        ("W0.25", w(0.25)),
        ("W0.5", w(0.5)),
        ("W0.75", w(0.75)),
        ("EC", ObjectiveSpec::Cost),
    ]
}

/// Ground-truth objective value of every working config of `space`.
/// Weighted objectives without normalizers use the grid's best time and cost.
pub fn grid_values(
    truth: &TruthTable,
    pricing: &PricingTable,
    space: &SearchSpace,
    objective: &ObjectiveSpec,
) -> Result<Vec<(ResourceConfig, f64)>, AnalysisError> {
    let charge = MemoryCharge::for_strategy(&space.strategy);
    let measured: Vec<(ResourceConfig, f64, f64)> = space
        .enumerate()
        .into_iter()
        .filter_map(|c| {
            let t = truth.time(&c)?;
            let k = truth.cost(&c, pricing, charge, false)?;
            Some((c, t, k))
        })
        .collect();
    if measured.is_empty() {
        return Err(AnalysisError::Empty("no working config in the grid".into()));
    }
    let objective = match *objective {
        ObjectiveSpec::Weighted {
            w_time,
            normalizers: None,
        } => ObjectiveSpec::weighted(
            w_time,
            Normalizers {
                time: measured.iter().map(|m| m.1).fold(f64::INFINITY, f64::min),
                cost: measured.iter().map(|m| m.2).fold(f64::INFINITY, f64::min),
            },
        ),
        other => other,
    };
    measured
        .into_iter()
        .map(|(c, t, k)| Ok((c, objective_value(&objective, t, k)?)))
        .collect()
}

/// Smallest value, ties to the smallest config.
fn argmin(values: &[(ResourceConfig, f64)]) -> Option<&(ResourceConfig, f64)> {
    values
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)))
}

/// Families other than the best config's own with at least one config
/// within `(1 + theta)` of the best value.
pub fn count_alternates(values: &[(ResourceConfig, f64)], theta: f64) -> Result<usize, AnalysisError> {
    if !(theta >= 0.0) {
        return Err(AnalysisError::InvalidArgument(format!("theta {theta} must be non-negative")));
    }
    let (best_config, best) = argmin(values).ok_or_else(|| AnalysisError::Empty("no values".into()))?;
    let limit = if theta.is_infinite() {
        f64::INFINITY
    } else {
        (1.0 + theta) * best
    };
    let mut families: Vec<&Family> = values
        .iter()
        .filter(|(c, v)| c.family != best_config.family && *v <= limit)
        .map(|(c, _)| &c.family)
        .collect();
    families.sort();
    families.dedup();
    Ok(families.len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlternateCount {
    pub function_id: String,
    pub objective: String,
    pub theta: f64,
    pub count: usize,
}

/// One row of the alternate-family table: every objective column at every threshold.
pub fn alternates_row(
    function_id: &str,
    truth: &TruthTable,
    pricing: &PricingTable,
    space: &SearchSpace,
    thetas: &[f64],
) -> Result<Vec<AlternateCount>, AnalysisError> {
    let mut out = Vec::new();
    for (label, objective) in table_objectives() {
        let values = grid_values(truth, pricing, space, &objective)?;
        for &theta in thetas {
            out.push(AlternateCount {
                function_id: function_id.to_string(),
                objective: label.to_string(),
                theta,
                count: count_alternates(&values, theta)?,
            });
        }
    }
    Ok(out)
}

/// Lowest prediction among `configs`, ties to the smallest config.
pub fn predicted_argmin(
    predictor: &dyn Predictor,
    configs: impl IntoIterator<Item = ResourceConfig>,
) -> Result<Option<(ResourceConfig, f64)>, AnalysisError> {
    let mut best: Option<(ResourceConfig, f64)> = None;
    for c in configs {
        if let Some(v) = predictor.predict(&c)? {
            let better = best
                .as_ref()
                .is_none_or(|(bc, bv)| v.total_cmp(bv).then_with(|| c.cmp(bc)).is_lt());
            if better {
                best = Some((c, v));
            }
        }
    }
    Ok(best)
}

fn family_configs(space: &SearchSpace, family: &Family) -> Vec<ResourceConfig> {
    space.enumerate().into_iter().filter(|c| &c.family == family).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyBest {
    pub family: Family,
    pub actual_best: Option<ResourceConfig>,
    pub actual_value: Option<f64>,
    pub predicted_best: Option<ResourceConfig>,
    pub predicted_value: Option<f64>,
    /// Ground truth at the predicted best.
    pub predicted_best_actual: Option<f64>,
}

/// Actual and predicted best config of every family of `space`.
pub fn family_bests(
    actual: &[(ResourceConfig, f64)],
    predictor: &dyn Predictor,
    space: &SearchSpace,
) -> Result<Vec<FamilyBest>, AnalysisError> {
    let lookup = |c: &ResourceConfig| actual.iter().find(|(a, _)| a == c).map(|(_, v)| *v);
    let mut out = Vec::new();
    for family in &space.family_axis {
        let configs = family_configs(space, family);
        if configs.is_empty() {
            continue;
        }
        let own: Vec<(ResourceConfig, f64)> = actual.iter().filter(|(c, _)| &c.family == family).cloned().collect();
        let actual_best = argmin(&own).cloned();
        let predicted = predicted_argmin(predictor, configs)?;
        out.push(FamilyBest {
            family: family.clone(),
            actual_best: actual_best.as_ref().map(|b| b.0.clone()),
            actual_value: actual_best.map(|b| b.1),
            predicted_best_actual: predicted.as_ref().and_then(|p| lookup(&p.0)),
            predicted_best: predicted.as_ref().map(|p| p.0.clone()),
            predicted_value: predicted.map(|p| p.1),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubstitutionReport {
    pub incumbent: ResourceConfig,
    pub chosen: ResourceConfig,
    pub chosen_family: Family,
    pub substituted: bool,
    pub idle_families: Vec<Family>,
    pub spot_multiplier: f64,
    pub cap: f64,
    /// Measured time of the choice over the incumbent's; `None` if the choice fails.
    pub normalized_time: Option<f64>,
    /// Discounted measured cost of the choice over the incumbent's full price.
    pub normalized_cost: Option<f64>,
    pub time_penalty: Option<f64>,
    pub cost_reduction: Option<f64>,
}

/// Moves a function from `incumbent` (its best-found config) to the config
/// of an idle family with the lowest discounted predicted cost, provided the
/// predicted time stays within `(1 + cap)` of the incumbent's measured time.
/// Without a qualifying idle family the incumbent is kept.
#[allow(clippy::too_many_arguments)]
pub fn substitute(
    model_time: &dyn Predictor,
    truth: &TruthTable,
    pricing: &PricingTable,
    space: &SearchSpace,
    incumbent: &ResourceConfig,
    idle: &[Family],
    spot_multiplier: f64,
    cap: f64,
) -> Result<SubstitutionReport, AnalysisError> {
    if !(cap > 0.0) {
        return Err(AnalysisError::InvalidArgument(format!("time cap {cap} must be positive")));
    }
    let spot = pricing.without_spot().with_spot(idle, spot_multiplier)?;
    let base_time = truth
        .time(incumbent)
        .ok_or_else(|| AnalysisError::MissingTruth(incumbent.clone()))?;
    let base_cost = billed_cost(incumbent, base_time, None, MemoryCharge::Allocated, pricing, false)?;
    let limit = (1.0 + cap) * base_time;

    let incumbent_time = model_time.predict(incumbent)?.unwrap_or(base_time);
    let mut chosen = (incumbent.clone(), spot.cost_rate_per_ms(incumbent, true)? * incumbent_time);
    for family in space.family_axis.iter().filter(|f| idle.contains(f)) {
        let Some((config, t)) = predicted_argmin(model_time, family_configs(space, family))? else {
            continue;
        };
        if t > limit {
            continue;
        }
        let cost = spot.cost_rate_per_ms(&config, true)? * t;
        if cost < chosen.1 {
            chosen = (config, cost);
        }
    }
    let (config, _) = chosen;
    let measured_time = truth.time(&config);
    let measured_cost = match measured_time {
        Some(t) => Some(billed_cost(&config, t, None, MemoryCharge::Allocated, &spot, true)?),
        None => None,
    };
    let normalized_time = measured_time.map(|t| t / base_time);
    let normalized_cost = measured_cost.map(|c| c / base_cost);
    Ok(SubstitutionReport {
        incumbent: incumbent.clone(),
        chosen_family: config.family.clone(),
        substituted: config != *incumbent,
        chosen: config,
        idle_families: idle.to_vec(),
        spot_multiplier,
        cap,
        time_penalty: normalized_time.map(|t| t - 1.0),
        cost_reduction: normalized_cost.map(|c| 1.0 - c),
        normalized_time,
        normalized_cost,
    })
}
