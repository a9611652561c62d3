//! Gaussian process regression with an ARD Matérn 5/2 kernel, a constant
//! amplitude and a white-noise term. Hyperparameters maximize the log
//! marginal likelihood over log-space boxes, using Adam from several starts.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;

use crate::seed;

/// Bounds on the kernel amplitude (signal variance, standardized units).
pub const AMPLITUDE_BOUNDS: (f64, f64) = (1e-3, 1e3);
/// Bounds on each per-dimension length scale.
pub const LENGTH_SCALE_BOUNDS: (f64, f64) = (1e-2, 1e2);
/// Bounds on the noise variance (standardized units).
pub const NOISE_BOUNDS: (f64, f64) = (1e-10, 1e-1);

const OPT_ITERS: usize = 200;
const LEARNING_RATE: f64 = 0.08;
const SQRT5: f64 = 2.236_067_977_499_79;

#[derive(Debug, Clone, PartialEq)]
pub struct GpHyperparameters {
    pub amplitude: f64,
    pub length_scales: Vec<f64>,
    pub noise: f64,
}

impl GpHyperparameters {
    fn to_log(&self) -> Vec<f64> {
        let mut t = Vec::with_capacity(self.length_scales.len() + 2);
        t.push(self.amplitude.ln());
        t.extend(self.length_scales.iter().map(|l| l.ln()));
        t.push(self.noise.ln());
        t
    }

    fn from_log(theta: &[f64]) -> Self {
        let d = theta.len() - 2;
        GpHyperparameters {
            amplitude: theta[0].exp(),
            length_scales: theta[1..=d].iter().map(|t| t.exp()).collect(),
            noise: theta[d + 1].exp(),
        }
    }
}

fn log_bounds(dim: usize) -> Vec<(f64, f64)> {
    let ln = |(a, b): (f64, f64)| (a.ln(), b.ln());
    let mut b = vec![ln(AMPLITUDE_BOUNDS)];
    b.extend(std::iter::repeat_n(ln(LENGTH_SCALE_BOUNDS), dim));
    b.push(ln(NOISE_BOUNDS));
    b
}

/// Matérn 5/2 correlation as a function of the scaled distance.
fn matern52(r: f64) -> f64 {
    (1.0 + SQRT5 * r + 5.0 / 3.0 * r * r) * (-SQRT5 * r).exp()
}

fn scaled_distance(a: &[f64], b: &[f64], length_scales: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(length_scales)
        .map(|((x, y), l)| {
            let d = (x - y) / l;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Cholesky of `k + jitter*I`, escalating jitter until it factors.
fn robust_cholesky(k: &DMatrix<f64>) -> (Cholesky<f64, Dyn>, f64) {
    let mut jitter = 0.0;
    loop {
        let mut m = k.clone();
        if jitter > 0.0 {
            for i in 0..m.nrows() {
                m[(i, i)] += jitter;
            }
        }
        if let Some(c) = Cholesky::new(m) {
            return (c, jitter);
        }
        jitter = if jitter == 0.0 { 1e-10 } else { jitter * 10.0 };
        assert!(jitter < 1e3, "kernel matrix cannot be regularized");
    }
}

/// Log marginal likelihood and its gradient with respect to the log hyperparameters.
fn lml_with_grad(theta: &[f64], xs: &[Vec<f64>], y: &DVector<f64>) -> (f64, Vec<f64>) {
    let n = xs.len();
    let dim = theta.len() - 2;
    let hp = GpHyperparameters::from_log(theta);

    let mut k = DMatrix::<f64>::zeros(n, n);
    // dK/dlog(l_d) for every dimension
    let mut dk_dl = vec![DMatrix::<f64>::zeros(n, n); dim];
    for i in 0..n {
        for j in 0..=i {
            let r = scaled_distance(&xs[i], &xs[j], &hp.length_scales);
            let kij = hp.amplitude * matern52(r);
            k[(i, j)] = kij;
            k[(j, i)] = kij;
            if i != j {
                let common = hp.amplitude * 5.0 / 3.0 * (1.0 + SQRT5 * r) * (-SQRT5 * r).exp();
                for (d, g) in dk_dl.iter_mut().enumerate() {
                    let delta = (xs[i][d] - xs[j][d]) / hp.length_scales[d];
                    let v = common * delta * delta;
                    g[(i, j)] = v;
                    g[(j, i)] = v;
                }
            }
        }
    }
    let kernel_only = k.clone();
    for i in 0..n {
        k[(i, i)] += hp.noise;
    }
    let (chol, _) = robust_cholesky(&k);
    let alpha = chol.solve(y);
    let log_det: f64 = chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
    let lml = -0.5 * y.dot(&alpha) - 0.5 * log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();

    let k_inv = chol.inverse();
    let w = &alpha * alpha.transpose() - k_inv;
    let half_trace = |dk: &DMatrix<f64>| 0.5 * w.component_mul(dk).sum();
    let mut grad = Vec::with_capacity(theta.len());
    grad.push(half_trace(&kernel_only));
    for g in &dk_dl {
        grad.push(half_trace(g));
    }
    grad.push(0.5 * hp.noise * w.diagonal().sum());
    (lml, grad)
}

/// Adam ascent in log space, clamped to the bounds; returns the best point visited.
fn maximize(start: Vec<f64>, bounds: &[(f64, f64)], xs: &[Vec<f64>], y: &DVector<f64>) -> (Vec<f64>, f64) {
    let (b1, b2, eps) = (0.9, 0.999, 1e-8);
    let mut theta = start;
    let mut m = vec![0.0; theta.len()];
    let mut v = vec![0.0; theta.len()];
    let mut best = (theta.clone(), f64::NEG_INFINITY);
    for t in 1..=OPT_ITERS {
        let (lml, grad) = lml_with_grad(&theta, xs, y);
        if lml.is_finite() && lml > best.1 {
            best = (theta.clone(), lml);
        }
        for i in 0..theta.len() {
            let g = if grad[i].is_finite() { grad[i] } else { 0.0 };
            m[i] = b1 * m[i] + (1.0 - b1) * g;
            v[i] = b2 * v[i] + (1.0 - b2) * g * g;
            let mh = m[i] / (1.0 - b1.powi(t as i32));
            let vh = v[i] / (1.0 - b2.powi(t as i32));
            theta[i] = (theta[i] + LEARNING_RATE * mh / (vh.sqrt() + eps)).clamp(bounds[i].0, bounds[i].1);
        }
    }
    let (lml, _) = lml_with_grad(&theta, xs, y);
    if lml.is_finite() && lml > best.1 {
        best = (theta, lml);
    }
    best
}

/// Zero-mean, unit-variance targets; constant targets keep unit scale.
fn standardize(ys: &[f64]) -> (DVector<f64>, f64, f64) {
    let n = ys.len() as f64;
    let mean = ys.iter().sum::<f64>() / n;
    let std = (ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n).sqrt();
    let std = if std > 1e-12 * mean.abs() && std > 0.0 { std } else { 1.0 };
    (DVector::from_iterator(ys.len(), ys.iter().map(|v| (v - mean) / std)), mean, std)
}

#[derive(Debug, Clone)]
pub struct GpModel {
    xs: Vec<Vec<f64>>,
    hyper: GpHyperparameters,
    y_mean: f64,
    y_std: f64,
    alpha: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    log_marginal_likelihood: f64,
}

impl GpModel {
    /// Fits on raw targets; they are standardized internally.
    pub fn fit(xs: &[Vec<f64>], ys: &[f64], restarts: usize, rng_seed: u64) -> Self {
        let dim = xs[0].len();
        let (y, y_mean, y_std) = standardize(ys);

        let bounds = log_bounds(dim);
        let mut rng = seed::rng(rng_seed);
        let mut best: Option<(Vec<f64>, f64)> = None;
        for restart in 0..restarts {
            let start = if restart == 0 {
                GpHyperparameters {
                    amplitude: 1.0,
                    length_scales: vec![1.0; dim],
                    noise: 1e-4,
                }
                .to_log()
            } else {
                bounds.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)).collect()
            };
            let candidate = maximize(start, &bounds, xs, &y);
            if best.as_ref().is_none_or(|b| candidate.1 > b.1) {
                best = Some(candidate);
            }
        }
        let (theta, lml) = best.expect("at least one start");
        Self::with_hyperparameters_std(xs, &y, y_mean, y_std, GpHyperparameters::from_log(&theta), lml)
    }

    /// Conditions on data with fixed hyperparameters (targets still standardized).
    pub fn with_hyperparameters(xs: &[Vec<f64>], ys: &[f64], hyper: GpHyperparameters) -> Self {
        let (y, y_mean, y_std) = standardize(ys);
        let (lml, _) = lml_with_grad(&hyper.to_log(), xs, &y);
        Self::with_hyperparameters_std(xs, &y, y_mean, y_std, hyper, lml)
    }

    fn with_hyperparameters_std(
        xs: &[Vec<f64>],
        y: &DVector<f64>,
        y_mean: f64,
        y_std: f64,
        hyper: GpHyperparameters,
        log_marginal_likelihood: f64,
    ) -> Self {
        let n = xs.len();
        let mut k = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = hyper.amplitude * matern52(scaled_distance(&xs[i], &xs[j], &hyper.length_scales));
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
            k[(i, i)] += hyper.noise;
        }
        let (chol, _) = robust_cholesky(&k);
        let alpha = chol.solve(y);
        GpModel {
            xs: xs.to_vec(),
            hyper,
            y_mean,
            y_std,
            alpha,
            chol,
            log_marginal_likelihood,
        }
    }

    pub fn dim(&self) -> usize {
        self.xs[0].len()
    }

    pub fn hyperparameters(&self) -> &GpHyperparameters {
        &self.hyper
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        self.log_marginal_likelihood
    }

    /// Posterior mean and standard deviation of the latent function (noise excluded).
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let ks = DVector::from_iterator(
            self.xs.len(),
            self.xs
                .iter()
                .map(|xi| self.hyper.amplitude * matern52(scaled_distance(x, xi, &self.hyper.length_scales))),
        );
        let mean = ks.dot(&self.alpha);
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&ks)
            .unwrap_or_else(|| DVector::zeros(ks.len()));
        let var = (self.hyper.amplitude - v.norm_squared()).max(0.0);
        (self.y_mean + self.y_std * mean, self.y_std * var.sqrt())
    }
}
