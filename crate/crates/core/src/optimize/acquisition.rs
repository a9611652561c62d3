use libm::erfc;

/// Below this predictive spread a candidate is treated as certain.
pub const MIN_STDDEV: f64 = 1e-12;

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Expected improvement below `best_so_far` of a Gaussian prediction (minimization).
pub fn expected_improvement(mean: f64, stddev: f64, best_so_far: f64) -> f64 {
    if !(stddev >= MIN_STDDEV) {
        return 0.0;
    }
    let improvement = best_so_far - mean;
    let z = improvement / stddev;
    (improvement * std_normal_cdf(z) + stddev * std_normal_pdf(z)).max(0.0)
}
