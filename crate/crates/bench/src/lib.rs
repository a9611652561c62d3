//! Fixtures shared by the benchmarks.

use rightsize_core::surrogate::Observation;
use rightsize_core::{preset, SearchSpace, TruthTable};

/// Noise-free ground truth of a bundled function on the default grid.
pub fn truth(name: &str) -> TruthTable {
    let spec = preset(name).expect("bundled preset");
    spec.truth("default", &SearchSpace::default(), rightsize_core::bench::DEFAULT_TIMEOUT_MS)
}

/// Every `stride`-th working config of `space` as an encoded training point.
pub fn observations(space: &SearchSpace, truth: &TruthTable, stride: usize) -> Vec<Observation> {
    space
        .enumerate()
        .iter()
        .step_by(stride)
        .filter_map(|c| Some((space.encode(c).ok()?, truth.time(c)?)))
        .collect()
}
