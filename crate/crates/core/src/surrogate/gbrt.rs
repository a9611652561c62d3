//! Gradient-boosted regression trees: a squared-loss point model plus
//! pinball-loss models at the 16th and 84th percentiles, whose half spread
//! stands in for one standard deviation.

use super::tree::{RegressionTree, Splitter, TreeParams};
use crate::seed;

const LOWER_QUANTILE: f64 = 0.16;
const UPPER_QUANTILE: f64 = 0.84;
const LEARNING_RATE: f64 = 0.1;
const MAX_DEPTH: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Loss {
    Squared,
    Quantile(f64),
}

/// Lower weighted percentile: smallest value whose empirical CDF reaches `q`.
fn quantile(values: &mut [f64], q: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let k = ((q * n as f64).ceil() as usize).clamp(1, n) - 1;
    values[k]
}

#[derive(Debug, Clone)]
struct BoostedModel {
    init: f64,
    stages: Vec<RegressionTree>,
}

impl BoostedModel {
    fn fit(xs: &[Vec<f64>], ys: &[f64], stages: usize, loss: Loss) -> Self {
        let n = ys.len();
        let init = match loss {
            Loss::Squared => ys.iter().sum::<f64>() / n as f64,
            Loss::Quantile(q) => quantile(&mut ys.to_vec(), q),
        };
        let mut current = vec![init; n];
        let params = TreeParams {
            max_depth: Some(MAX_DEPTH),
            min_samples_leaf: 1,
            splitter: Splitter::Best,
        };
        let sample: Vec<usize> = (0..n).collect();
        // Best splits over all features need no randomness beyond feature order.
        let mut rng = seed::rng(0);
        let mut trees = Vec::with_capacity(stages);
        for _ in 0..stages {
            let residual: Vec<f64> = ys.iter().zip(&current).map(|(y, f)| y - f).collect();
            let gradient: Vec<f64> = match loss {
                Loss::Squared => residual.clone(),
                Loss::Quantile(q) => residual.iter().map(|&r| if r > 0.0 { q } else { q - 1.0 }).collect(),
            };
            if gradient.iter().all(|g| g.abs() < 1e-300) {
                break;
            }
            let mut tree = RegressionTree::fit(xs, &gradient, &sample, &params, &mut rng);
            if let Loss::Quantile(q) = loss {
                tree.relabel_leaves(|rows| {
                    let mut r: Vec<f64> = rows.iter().map(|&i| residual[i]).collect();
                    if r.is_empty() {
                        0.0
                    } else {
                        quantile(&mut r, q)
                    }
                });
            }
            for (i, x) in xs.iter().enumerate() {
                current[i] += LEARNING_RATE * tree.predict(x);
            }
            trees.push(tree);
        }
        BoostedModel { init, stages: trees }
    }

    fn predict(&self, x: &[f64]) -> f64 {
        self.init + LEARNING_RATE * self.stages.iter().map(|t| t.predict(x)).sum::<f64>()
    }
}

#[derive(Debug, Clone)]
pub struct GbrtModel {
    point: BoostedModel,
    lower: BoostedModel,
    upper: BoostedModel,
    dim: usize,
}

impl GbrtModel {
    pub fn fit(xs: &[Vec<f64>], ys: &[f64], stages: usize) -> Self {
        GbrtModel {
            point: BoostedModel::fit(xs, ys, stages, Loss::Squared),
            lower: BoostedModel::fit(xs, ys, stages, Loss::Quantile(LOWER_QUANTILE)),
            upper: BoostedModel::fit(xs, ys, stages, Loss::Quantile(UPPER_QUANTILE)),
            dim: xs[0].len(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Point prediction and its 16th/84th percentile predictions.
    pub fn quantiles(&self, x: &[f64]) -> (f64, f64, f64) {
        (self.lower.predict(x), self.point.predict(x), self.upper.predict(x))
    }

    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let (lo, mid, hi) = self.quantiles(x);
        (mid, spread_to_std(lo, hi))
    }
}

fn spread_to_std(q16: f64, q84: f64) -> f64 {
    ((q84 - q16) / 2.0).max(0.0)
}
