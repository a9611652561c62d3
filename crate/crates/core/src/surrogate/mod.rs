//! Regression surrogates with predictive uncertainty over encoded configs.

mod gbrt;
mod gp;
mod tree;

use serde::{Deserialize, Serialize};

use crate::error::SurrogateError;

pub use gbrt::GbrtModel;
pub use gp::{GpHyperparameters, GpModel, AMPLITUDE_BOUNDS, LENGTH_SCALE_BOUNDS, NOISE_BOUNDS};
pub use tree::{ForestModel, RegressionTree, Splitter, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurrogateKind {
    Gp,
    Rf,
    Et,
    Gbrt,
}

impl SurrogateKind {
    pub const ALL: [SurrogateKind; 4] = [
        SurrogateKind::Gp,
        SurrogateKind::Rf,
        SurrogateKind::Et,
        SurrogateKind::Gbrt,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SurrogateKind::Gp => "gp",
            SurrogateKind::Rf => "rf",
            SurrogateKind::Et => "et",
            SurrogateKind::Gbrt => "gbrt",
        }
    }
}

impl std::str::FromStr for SurrogateKind {
    type Err = SurrogateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gp" => Ok(SurrogateKind::Gp),
            "rf" => Ok(SurrogateKind::Rf),
            "et" => Ok(SurrogateKind::Et),
            "gbrt" => Ok(SurrogateKind::Gbrt),
            other => Err(SurrogateError::InvalidSpec(format!("unknown surrogate `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateSpec {
    pub kind: SurrogateKind,
    /// Trees per ensemble (RF, ET) or boosting stages per quantile model (GBRT).
    #[serde(default = "default_estimators")]
    pub n_estimators: usize,
    /// Hyperparameter optimizer starts for the GP, including the default start.
    #[serde(default = "default_restarts")]
    pub gp_restarts: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_estimators() -> usize {
    100
}

fn default_restarts() -> usize {
    3
}

impl SurrogateSpec {
    pub fn new(kind: SurrogateKind, seed: u64) -> Self {
        SurrogateSpec {
            kind,
            n_estimators: default_estimators(),
            gp_restarts: default_restarts(),
            seed,
        }
    }

    fn validate(&self) -> Result<(), SurrogateError> {
        if self.n_estimators == 0 {
            return Err(SurrogateError::InvalidSpec("ensemble size must be at least 1".into()));
        }
        if self.gp_restarts == 0 {
            return Err(SurrogateError::InvalidSpec("at least one GP start is required".into()));
        }
        Ok(())
    }
}

/// Encoded input with its observed objective value.
pub type Observation = (Vec<f64>, f64);

#[derive(Debug, Clone)]
pub enum FittedSurrogate {
    Gp(GpModel),
    Forest(ForestModel),
    Gbrt(GbrtModel),
}

/// Fits a surrogate of `spec.kind`; deterministic for a given spec and data.
pub fn fit(spec: &SurrogateSpec, observations: &[Observation]) -> Result<FittedSurrogate, SurrogateError> {
    spec.validate()?;
    let (first, _) = observations.first().ok_or(SurrogateError::NoObservations)?;
    let dim = first.len();
    for (x, y) in observations {
        if x.len() != dim {
            return Err(SurrogateError::Dimension {
                expected: dim,
                got: x.len(),
            });
        }
        if !y.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(SurrogateError::NonFinite);
        }
    }
    let xs: Vec<Vec<f64>> = observations.iter().map(|(x, _)| x.clone()).collect();
    let ys: Vec<f64> = observations.iter().map(|(_, y)| *y).collect();
    Ok(match spec.kind {
        SurrogateKind::Gp => FittedSurrogate::Gp(GpModel::fit(&xs, &ys, spec.gp_restarts, spec.seed)),
        SurrogateKind::Rf => FittedSurrogate::Forest(ForestModel::fit(
            &xs,
            &ys,
            spec.n_estimators,
            Splitter::Best,
            true,
            spec.seed,
        )),
        SurrogateKind::Et => FittedSurrogate::Forest(ForestModel::fit(
            &xs,
            &ys,
            spec.n_estimators,
            Splitter::Random,
            false,
            spec.seed,
        )),
        SurrogateKind::Gbrt => FittedSurrogate::Gbrt(GbrtModel::fit(&xs, &ys, spec.n_estimators)),
    })
}

impl FittedSurrogate {
    pub fn kind(&self) -> SurrogateKind {
        match self {
            FittedSurrogate::Gp(_) => SurrogateKind::Gp,
            FittedSurrogate::Forest(f) if f.splitter() == Splitter::Random => SurrogateKind::Et,
            FittedSurrogate::Forest(_) => SurrogateKind::Rf,
            FittedSurrogate::Gbrt(_) => SurrogateKind::Gbrt,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            FittedSurrogate::Gp(m) => m.dim(),
            FittedSurrogate::Forest(m) => m.dim(),
            FittedSurrogate::Gbrt(m) => m.dim(),
        }
    }

    /// Predictive mean and standard deviation.
    pub fn predict(&self, x: &[f64]) -> Result<(f64, f64), SurrogateError> {
        if x.len() != self.dim() {
            return Err(SurrogateError::Dimension {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let (mean, std) = match self {
            FittedSurrogate::Gp(m) => m.predict(x),
            FittedSurrogate::Forest(m) => m.predict(x),
            FittedSurrogate::Gbrt(m) => m.predict(x),
        };
        Ok((mean, std.max(0.0)))
    }
}

/// Serializable model: spec plus training set, refit on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateDump {
    pub spec: SurrogateSpec,
    pub training: Vec<Observation>,
}

impl SurrogateDump {
    pub fn load(&self) -> Result<FittedSurrogate, SurrogateError> {
        fit(&self.spec, &self.training)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> Vec<Observation> {
        (0..5)
            .map(|i| {
                let t = i as f64 / 4.0;
                (vec![t, 0.5], 10.0 + 4.0 * t)
            })
            .collect()
    }

    #[test]
    fn every_kind_fits_and_predicts_finite() {
        for kind in SurrogateKind::ALL {
            let m = fit(&SurrogateSpec::new(kind, 1), &line()).unwrap();
            assert_eq!(m.kind(), kind);
            let (mu, sd) = m.predict(&[0.3, 0.5]).unwrap();
            assert!(mu.is_finite() && sd.is_finite() && sd >= 0.0, "{kind:?}");
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let m = fit(&SurrogateSpec::new(SurrogateKind::Rf, 1), &line()).unwrap();
        assert_eq!(
            m.predict(&[0.1]).unwrap_err(),
            SurrogateError::Dimension { expected: 2, got: 1 }
        );
        let mut bad = line();
        bad.push((vec![0.1], 3.0));
        assert!(fit(&SurrogateSpec::new(SurrogateKind::Gp, 1), &bad).is_err());
    }

    #[test]
    fn empty_and_non_finite_inputs() {
        let spec = SurrogateSpec::new(SurrogateKind::Gp, 1);
        assert_eq!(fit(&spec, &[]).unwrap_err(), SurrogateError::NoObservations);
        assert_eq!(
            fit(&spec, &[(vec![0.0], f64::NAN)]).unwrap_err(),
            SurrogateError::NonFinite
        );
        let zero = SurrogateSpec {
            n_estimators: 0,
            ..SurrogateSpec::new(SurrogateKind::Rf, 0)
        };
        assert!(matches!(fit(&zero, &line()), Err(SurrogateError::InvalidSpec(_))));
    }

    #[test]
    fn refit_is_bit_reproducible() {
        for kind in SurrogateKind::ALL {
            let a = fit(&SurrogateSpec::new(kind, 7), &line()).unwrap();
            let b = fit(&SurrogateSpec::new(kind, 7), &line()).unwrap();
            for i in 0..20 {
                let x = [i as f64 / 19.0, 0.2];
                let (ma, sa) = a.predict(&x).unwrap();
                let (mb, sb) = b.predict(&x).unwrap();
                assert_eq!(ma.to_bits(), mb.to_bits());
                assert_eq!(sa.to_bits(), sb.to_bits());
            }
        }
    }

    #[test]
    fn dump_refits_to_same_predictions() {
        let dump = SurrogateDump {
            spec: SurrogateSpec::new(SurrogateKind::Et, 3),
            training: line(),
        };
        let json = serde_json::to_string(&dump).unwrap();
        let back: SurrogateDump = serde_json::from_str(&json).unwrap();
        assert_eq!(back, dump);
        let a = dump.load().unwrap().predict(&[0.4, 0.5]).unwrap();
        let b = back.load().unwrap().predict(&[0.4, 0.5]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn conflicting_duplicates_still_fit() {
        let obs = vec![(vec![0.5, 0.5], 1.0), (vec![0.5, 0.5], 3.0), (vec![0.5, 0.5], 2.0)];
        for kind in SurrogateKind::ALL {
            let m = fit(&SurrogateSpec::new(kind, 0), &obs).unwrap();
            let (mu, _) = m.predict(&[0.5, 0.5]).unwrap();
            assert!(mu.is_finite());
            assert!((mu - 2.0).abs() < 1.0, "{kind:?} {mu}");
        }
    }
}
