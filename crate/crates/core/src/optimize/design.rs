//! Model-free designs: uniform random sampling and Latin hypercube sampling
//! snapped onto the discrete grid.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::OptimizeError;
use crate::seed;
use crate::space::{ResourceConfig, SearchSpace};

/// `n` distinct configs drawn uniformly without replacement.
pub fn random_design(space: &SearchSpace, n: usize, rng_seed: u64) -> Result<Vec<ResourceConfig>, OptimizeError> {
    let mut all = space.enumerate();
    if n > all.len() {
        return Err(OptimizeError::TooManySamples {
            requested: n,
            available: all.len(),
        });
    }
    let mut rng = seed::rng(rng_seed);
    let (picked, _) = all.partial_shuffle(&mut rng, n);
    Ok(picked.to_vec())
}

/// Latin hypercube in `[0,1)^dims`: each axis has exactly one point per
/// stratum `[k/n, (k+1)/n)`.
pub fn lhs_unit(n: usize, dims: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut points = vec![vec![0.0; dims]; n];
    for d in 0..dims {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(rng);
        for (i, p) in points.iter_mut().enumerate() {
            let u: f64 = rng.random_range(0.0..1.0);
            p[d] = (strata[i] as f64 + u) / n as f64;
        }
    }
    points
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Latin hypercube over the live cpu, memory and family values of `space`.
///
/// Each unit coordinate maps onto an axis index by equal-width bins. A point
/// that lands on a duplicate or inadmissible config is snapped to the nearest
/// unused admitted config in encoded space, preferring one with the same CPU
/// share. Returns at most `|space|` configs.
pub fn lhs_design(space: &SearchSpace, n: usize, rng_seed: u64) -> Vec<ResourceConfig> {
    let all = space.enumerate();
    let n = n.min(all.len());
    if n == 0 {
        return Vec::new();
    }
    let mut cpus: Vec<f64> = Vec::new();
    let mut mems: Vec<u32> = Vec::new();
    let mut families = Vec::new();
    for c in &all {
        if !cpus.iter().any(|v| v.to_bits() == c.cpu_share.to_bits()) {
            cpus.push(c.cpu_share);
        }
        if !mems.contains(&c.memory_mb) {
            mems.push(c.memory_mb);
        }
        if !families.contains(&c.family) {
            families.push(c.family.clone());
        }
    }
    cpus.sort_by(f64::total_cmp);
    mems.sort_unstable();

    let encoded: Vec<Vec<f64>> = all
        .iter()
        .map(|c| space.encode(c).expect("enumerated configs are on-axis"))
        .collect();
    let bin = |u: f64, len: usize| ((u * len as f64) as usize).min(len - 1);

    let mut rng = seed::rng(rng_seed);
    let unit = lhs_unit(n, 3, &mut rng);
    let mut used: HashSet<usize> = HashSet::new();
    let mut out = Vec::with_capacity(n);
    for p in unit {
        let target = ResourceConfig::new(
            cpus[bin(p[0], cpus.len())],
            mems[bin(p[1], mems.len())],
            families[bin(p[2], families.len())].clone(),
        );
        let exact = all.iter().position(|c| *c == target).filter(|i| !used.contains(i));
        let idx = exact.unwrap_or_else(|| {
            let target_enc = space.encode(&target).expect("target is on-axis");
            let nearest = |same_cpu: bool| {
                (0..all.len())
                    .filter(|i| !used.contains(i))
                    .filter(|&i| !same_cpu || all[i].cpu_share.to_bits() == target.cpu_share.to_bits())
                    .min_by(|&a, &b| {
                        squared_distance(&encoded[a], &target_enc)
                            .total_cmp(&squared_distance(&encoded[b], &target_enc))
                            .then(a.cmp(&b))
                    })
            };
            nearest(true).or_else(|| nearest(false)).expect("n <= |space|")
        });
        used.insert(idx);
        out.push(all[idx].clone());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{Family, Strategy};

    #[test]
    fn random_design_full_is_permutation() {
        let s = SearchSpace::default();
        let mut d = random_design(&s, 288, 4).unwrap();
        d.sort();
        let mut all = s.enumerate();
        all.sort();
        assert_eq!(d, all);
        assert!(matches!(
            random_design(&s, 289, 4),
            Err(OptimizeError::TooManySamples { requested: 289, available: 288 })
        ));
    }

    #[test]
    fn random_design_is_seeded() {
        let s = SearchSpace::default();
        assert_eq!(random_design(&s, 5, 1).unwrap(), random_design(&s, 5, 1).unwrap());
        assert_ne!(random_design(&s, 5, 1).unwrap(), random_design(&s, 5, 2).unwrap());
        let one = random_design(&s, 1, 3).unwrap();
        assert!(s.admits(&one[0]));
    }

    #[test]
    fn unit_lhs_hits_each_quartile_once() {
        let pts = lhs_unit(4, 1, &mut seed::rng(8));
        let mut q: Vec<usize> = pts.iter().map(|p| (p[0] * 4.0) as usize).collect();
        q.sort();
        assert_eq!(q, vec![0, 1, 2, 3]);
    }

    #[test]
    fn eight_points_cover_cpu_axis() {
        let s = SearchSpace::default();
        for seed in 0..20 {
            let d = lhs_design(&s, 8, seed);
            let mut cpus: Vec<f64> = d.iter().map(|c| c.cpu_share).collect();
            cpus.sort_by(f64::total_cmp);
            assert_eq!(cpus, s.cpu_axis);
        }
    }

    #[test]
    fn single_point_design() {
        let d = lhs_design(&SearchSpace::default(), 1, 0);
        assert_eq!(d.len(), 1);
    }

    #[test]
    fn lhs_respects_strategy_and_floor() {
        let s = SearchSpace::default()
            .with_strategy(Strategy::PropCpu(Family::from("m5")))
            .unwrap()
            .slice_on_failure(256)
            .unwrap();
        let d = lhs_design(&s, 10, 5);
        assert_eq!(d.len(), 4);
        let unique: HashSet<_> = d.iter().collect();
        assert_eq!(unique.len(), 4);
        assert!(d.iter().all(|c| s.admits(c)));
    }
}
