//! CART regression trees (squared-error splits) and the bagged / extremely
//! randomized forests built from them.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Splitter {
    /// Best threshold over all midpoints between distinct values.
    Best,
    /// One uniform random threshold per feature, best feature kept.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub splitter: Splitter,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_leaf: 1,
            splitter: Splitter::Best,
        }
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        value: f64,
        samples: Vec<usize>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

fn mean_of(targets: &[f64], idx: &[usize]) -> f64 {
    idx.iter().map(|&i| targets[i]).sum::<f64>() / idx.len() as f64
}

fn sse(targets: &[f64], idx: &[usize]) -> f64 {
    let m = mean_of(targets, idx);
    idx.iter().map(|&i| (targets[i] - m).powi(2)).sum()
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl RegressionTree {
    /// Grows a tree on the rows of `xs` listed in `sample` (repeats allowed).
    pub fn fit(xs: &[Vec<f64>], targets: &[f64], sample: &[usize], params: &TreeParams, rng: &mut ChaCha8Rng) -> Self {
        let mut tree = RegressionTree { nodes: Vec::new() };
        tree.grow(xs, targets, sample.to_vec(), 0, params, rng);
        tree
    }

    fn grow(
        &mut self,
        xs: &[Vec<f64>],
        targets: &[f64],
        idx: Vec<usize>,
        depth: usize,
        params: &TreeParams,
        rng: &mut ChaCha8Rng,
    ) -> usize {
        let id = self.nodes.len();
        let value = mean_of(targets, &idx);
        self.nodes.push(Node::Leaf { value, samples: Vec::new() });

        let can_split = idx.len() >= 2 * params.min_samples_leaf.max(1)
            && params.max_depth.is_none_or(|d| depth < d)
            && sse(targets, &idx) > 1e-300;
        let choice = if can_split {
            self.choose_split(xs, targets, &idx, params, rng)
        } else {
            None
        };
        match choice {
            Some(split) => {
                let (l, r): (Vec<usize>, Vec<usize>) =
                    idx.iter().partition(|&&i| xs[i][split.feature] <= split.threshold);
                let left = self.grow(xs, targets, l, depth + 1, params, rng);
                let right = self.grow(xs, targets, r, depth + 1, params, rng);
                self.nodes[id] = Node::Split {
                    feature: split.feature,
                    threshold: split.threshold,
                    left,
                    right,
                };
            }
            None => self.nodes[id] = Node::Leaf { value, samples: idx },
        }
        id
    }

    fn choose_split(
        &self,
        xs: &[Vec<f64>],
        targets: &[f64],
        idx: &[usize],
        params: &TreeParams,
        rng: &mut ChaCha8Rng,
    ) -> Option<SplitChoice> {
        let dim = xs[idx[0]].len();
        let min_leaf = params.min_samples_leaf.max(1);
        let parent = sse(targets, idx);
        let mut features: Vec<usize> = (0..dim).collect();
        features.shuffle(rng);
        let mut best: Option<SplitChoice> = None;
        let mut consider = |c: SplitChoice| {
            if c.score < parent - 1e-12 * parent.abs() && best.as_ref().is_none_or(|b| c.score < b.score) {
                best = Some(c);
            }
        };
        for &f in &features {
            match params.splitter {
                Splitter::Best => {
                    let mut order: Vec<usize> = idx.to_vec();
                    order.sort_by(|&a, &b| xs[a][f].total_cmp(&xs[b][f]));
                    let n = order.len();
                    let total: f64 = order.iter().map(|&i| targets[i]).sum();
                    let total_sq: f64 = order.iter().map(|&i| targets[i] * targets[i]).sum();
                    let (mut ls, mut lsq) = (0.0, 0.0);
                    for k in 0..n - 1 {
                        let t = targets[order[k]];
                        ls += t;
                        lsq += t * t;
                        let (a, b) = (xs[order[k]][f], xs[order[k + 1]][f]);
                        let nl = k + 1;
                        let nr = n - nl;
                        if a == b || nl < min_leaf || nr < min_leaf {
                            continue;
                        }
                        let rs = total - ls;
                        let rsq = total_sq - lsq;
                        let score = (lsq - ls * ls / nl as f64) + (rsq - rs * rs / nr as f64);
                        consider(SplitChoice {
                            feature: f,
                            threshold: 0.5 * (a + b),
                            score: score.max(0.0),
                        });
                    }
                }
                Splitter::Random => {
                    let (lo, hi) = idx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                        (lo.min(xs[i][f]), hi.max(xs[i][f]))
                    });
                    if !(hi > lo) {
                        continue;
                    }
                    let mut threshold = rng.random_range(lo..hi);
                    if threshold >= hi {
                        threshold = lo;
                    }
                    let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| xs[i][f] <= threshold);
                    if l.len() < min_leaf || r.len() < min_leaf {
                        continue;
                    }
                    consider(SplitChoice {
                        feature: f,
                        threshold,
                        score: sse(targets, &l) + sse(targets, &r),
                    });
                }
            }
        }
        best
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Leaf { value, .. } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Replaces each leaf value by `f(rows reaching that leaf)`.
    pub fn relabel_leaves(&mut self, mut f: impl FnMut(&[usize]) -> f64) {
        for node in &mut self.nodes {
            if let Node::Leaf { value, samples } = node {
                *value = f(samples);
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

/// Random forest (bootstrap + best splits) or extra trees (full sample + random splits).
#[derive(Debug, Clone)]
pub struct ForestModel {
    trees: Vec<RegressionTree>,
    splitter: Splitter,
    dim: usize,
}

impl ForestModel {
    pub fn fit(xs: &[Vec<f64>], ys: &[f64], n_trees: usize, splitter: Splitter, bootstrap: bool, rng_seed: u64) -> Self {
        let n = ys.len();
        let params = TreeParams {
            splitter,
            ..TreeParams::default()
        };
        let trees = (0..n_trees)
            .map(|t| {
                let mut rng = seed::rng(seed::derive(rng_seed, &[t as u64]));
                let sample: Vec<usize> = if bootstrap {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                RegressionTree::fit(xs, ys, &sample, &params, &mut rng)
            })
            .collect();
        ForestModel {
            trees,
            splitter,
            dim: xs[0].len(),
        }
    }

    pub fn splitter(&self) -> Splitter {
        self.splitter
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tree_predictions(&self, x: &[f64]) -> Vec<f64> {
        self.trees.iter().map(|t| t.predict(x)).collect()
    }

    /// Mean and population standard deviation of the per-tree predictions.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let preds = self.tree_predictions(x);
        let n = preds.len() as f64;
        let mean = preds.iter().sum::<f64>() / n;
        let var = preds.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / n;
        (mean, var.sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step_data() -> (Vec<Vec<f64>>, Vec<f64>) {
        let xs: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, (i % 2) as f64]).collect();
        let ys = xs.iter().map(|x| if x[0] < 4.0 { 1.0 } else { 5.0 }).collect();
        (xs, ys)
    }

    #[test]
    fn full_tree_fits_training_data() {
        let (xs, ys) = step_data();
        let idx: Vec<usize> = (0..xs.len()).collect();
        let tree = RegressionTree::fit(&xs, &ys, &idx, &TreeParams::default(), &mut seed::rng(0));
        for (x, y) in xs.iter().zip(&ys) {
            assert_eq!(tree.predict(x), *y);
        }
        // one clean split suffices
        assert_eq!(tree.leaf_count(), 2);
    }

    #[test]
    fn depth_limit_and_relabel() {
        let xs: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64]).collect();
        let ys: Vec<f64> = (0..8).map(|i| (i * i) as f64).collect();
        let idx: Vec<usize> = (0..8).collect();
        let params = TreeParams {
            max_depth: Some(1),
            ..TreeParams::default()
        };
        let mut tree = RegressionTree::fit(&xs, &ys, &idx, &params, &mut seed::rng(0));
        assert_eq!(tree.leaf_count(), 2);
        tree.relabel_leaves(|rows| rows.len() as f64);
        let total: f64 = [0.0, 7.0].iter().map(|&x| tree.predict(&[x])).sum();
        assert_eq!(total, 8.0);
    }

    #[test]
    fn single_tree_forest_has_zero_spread() {
        let xs = vec![vec![0.0], vec![1.0]];
        let ys = vec![10.0, 14.0];
        let f = ForestModel::fit(&xs, &ys, 1, Splitter::Best, true, 3);
        for i in 0..=10 {
            let (_, sd) = f.predict(&[i as f64 / 10.0]);
            assert_eq!(sd, 0.0);
        }
        // piecewise constant: at most two distinct values over the line
        let mut vals: Vec<u64> = (0..=100).map(|i| f.predict(&[i as f64 / 100.0]).0.to_bits()).collect();
        vals.sort();
        vals.dedup();
        assert!(vals.len() <= 2);
    }

    #[test]
    fn forest_stats_are_population_moments() {
        // two stumps predicting 10 and 14 give mean 12 and sd 2
        let leaf = |v: f64| RegressionTree {
            nodes: vec![Node::Leaf { value: v, samples: vec![] }],
        };
        let f = ForestModel {
            trees: vec![leaf(10.0), leaf(14.0)],
            splitter: Splitter::Best,
            dim: 1,
        };
        assert_eq!(f.predict(&[0.0]), (12.0, 2.0));
    }

    #[test]
    fn extra_trees_split_inside_feature_range() {
        let (xs, ys) = step_data();
        let f = ForestModel::fit(&xs, &ys, 50, Splitter::Random, false, 9);
        let (lo, _) = f.predict(&[0.0, 0.0]);
        let (hi, _) = f.predict(&[7.0, 1.0]);
        assert!(lo < 2.0 && hi > 4.0, "{lo} {hi}");
    }
}
