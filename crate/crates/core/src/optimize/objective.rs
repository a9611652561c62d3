use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::OptimizeError;

/// One of the two measured objectives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Time,
    Cost,
}

impl Metric {
    pub fn other(self) -> Metric {
        match self {
            Metric::Time => Metric::Cost,
            Metric::Cost => Metric::Time,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Time => "time",
            Metric::Cost => "cost",
        }
    }

    pub fn pick(self, time: f64, cost: f64) -> f64 {
        match self {
            Metric::Time => time,
            Metric::Cost => cost,
        }
    }
}

impl FromStr for Metric {
    type Err = OptimizeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "time" | "et" => Ok(Metric::Time),
            "cost" | "ec" => Ok(Metric::Cost),
            other => Err(OptimizeError::InvalidSettings(format!("unknown metric `{other}`"))),
        }
    }
}

/// Best single-objective values used to put time and cost on a common scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalizers {
    pub time: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObjectiveSpec {
    Time,
    Cost,
    /// `w_time * time / B_t + (1 - w_time) * cost / B_c`.
    Weighted {
        w_time: f64,
        #[serde(default)]
        normalizers: Option<Normalizers>,
    },
    /// Optimize `primary`; the secondary is minimized afterwards within `theta`.
    Hierarchical { primary: Metric, theta: f64 },
}

impl ObjectiveSpec {
    pub fn validate(&self) -> Result<(), OptimizeError> {
        match *self {
            ObjectiveSpec::Weighted { w_time, normalizers } => {
                if !(0.0..=1.0).contains(&w_time) {
                    return Err(OptimizeError::InvalidSettings(format!("weight {w_time} outside [0, 1]")));
                }
                if let Some(n) = normalizers {
                    if !(n.time > 0.0 && n.cost > 0.0) {
                        return Err(OptimizeError::InvalidSettings("normalizers must be positive".into()));
                    }
                }
            }
            ObjectiveSpec::Hierarchical { theta, .. } if !(theta > 0.0) => {
                return Err(OptimizeError::InvalidSettings(format!("threshold {theta} must be positive")));
            }
            _ => {}
        }
        Ok(())
    }

    pub fn weighted(w_time: f64, normalizers: Normalizers) -> Self {
        ObjectiveSpec::Weighted {
            w_time,
            normalizers: Some(normalizers),
        }
    }
}

impl fmt::Display for ObjectiveSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObjectiveSpec::Time => f.write_str("time"),
            ObjectiveSpec::Cost => f.write_str("cost"),
            ObjectiveSpec::Weighted { w_time, .. } => write!(f, "weighted:{w_time}"),
            ObjectiveSpec::Hierarchical { primary, theta } => write!(f, "hier:{theta}:{}", primary.name()),
        }
    }
}

/// Parses `time`, `cost`, `weighted:W` or `hier:THETA[:time|cost]`.
impl FromStr for ObjectiveSpec {
    type Err = OptimizeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || OptimizeError::InvalidSettings(format!("cannot parse objective `{s}`"));
        let mut parts = s.split(':');
        let spec = match parts.next() {
            Some("time") => ObjectiveSpec::Time,
            Some("cost") => ObjectiveSpec::Cost,
            Some("weighted") => ObjectiveSpec::Weighted {
                w_time: parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?,
                normalizers: None,
            },
            Some("hier") => ObjectiveSpec::Hierarchical {
                theta: parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?,
                primary: parts.next().map(str::parse).transpose()?.unwrap_or(Metric::Time),
            },
            _ => return Err(bad()),
        };
        if parts.next().is_some() {
            return Err(bad());
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Scalar value minimized by the optimizer.
pub fn objective_value(objective: &ObjectiveSpec, duration_ms: f64, cost: f64) -> Result<f64, OptimizeError> {
    match *objective {
        ObjectiveSpec::Time => Ok(duration_ms),
        ObjectiveSpec::Cost => Ok(cost),
        ObjectiveSpec::Weighted { w_time, normalizers } => {
            let n = normalizers.ok_or(OptimizeError::MissingNormalizers)?;
            Ok(w_time * duration_ms / n.time + (1.0 - w_time) * cost / n.cost)
        }
        ObjectiveSpec::Hierarchical { primary, .. } => Ok(primary.pick(duration_ms, cost)),
    }
}
