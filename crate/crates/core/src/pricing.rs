//! Per-vCPU and per-GB hourly rates recovered from whole-instance prices, and
//! the execution cost of a run under those rates.
//!
//! Every instance price satisfies `alpha * X[cpu_group] + beta * Y[mem_group] = price`.
//! Families sharing a CPU type share `X`; families sharing a memory pricing
//! tier share `Y`. Stacking one equation per instance gives a linear system
//! solved here by SVD least squares, so price sheets with more instances than
//! unknowns are accepted as long as they are consistent.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::PricingError;
use crate::space::{Family, ResourceConfig};

/// Relative per-equation residual allowed when solving a price system.
pub const RESIDUAL_TOLERANCE: f64 = 1e-9;

const MS_PER_HOUR: f64 = 3_600_000.0;

/// One row of a price sheet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstancePriceRecord {
    pub family: Family,
    /// vCPU count of the priced instance.
    pub alpha: u32,
    /// Memory of the priced instance, GB.
    pub beta: f64,
    pub price_per_hour: f64,
    pub cpu_group: String,
    pub mem_group: String,
    #[serde(default)]
    pub spot_multiplier: Option<f64>,
}

impl InstancePriceRecord {
    pub fn new(
        family: impl Into<Family>,
        alpha: u32,
        beta: f64,
        price_per_hour: f64,
        cpu_group: &str,
        mem_group: &str,
    ) -> Self {
        InstancePriceRecord {
            family: family.into(),
            alpha,
            beta,
            price_per_hour,
            cpu_group: cpu_group.to_string(),
            mem_group: mem_group.to_string(),
            spot_multiplier: None,
        }
    }

    fn validate(&self) -> Result<(), PricingError> {
        let bad = |reason: &str| {
            Err(PricingError::InvalidRecord {
                family: self.family.to_string(),
                reason: reason.to_string(),
            })
        };
        if self.alpha < 1 {
            return bad("alpha must be at least 1");
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return bad("beta must be positive");
        }
        if !(self.price_per_hour.is_finite() && self.price_per_hour > 0.0) {
            return bad("price must be positive");
        }
        if let Some(m) = self.spot_multiplier {
            if !(m > 0.0 && m <= 1.0) {
                return bad("spot multiplier must lie in (0, 1]");
            }
        }
        Ok(())
    }
}

/// Resolved rates for one family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyRate {
    pub cpu_group: String,
    pub mem_group: String,
    /// Currency per vCPU-hour.
    pub vcpu_hour: f64,
    /// Currency per GB-hour.
    pub gb_hour: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spot_multiplier: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingTable {
    pub cpu_rates: BTreeMap<String, f64>,
    pub mem_rates: BTreeMap<String, f64>,
    pub families: BTreeMap<Family, FamilyRate>,
    /// Largest relative equation residual of the solve.
    pub max_relative_residual: f64,
}

/// Solves the stacked price equations for per-group rates.
pub fn solve_pricing(records: &[InstancePriceRecord]) -> Result<PricingTable, PricingError> {
    if records.is_empty() {
        return Err(PricingError::Empty);
    }
    for r in records {
        r.validate()?;
    }
    let cpu_groups: Vec<&str> = records
        .iter()
        .map(|r| r.cpu_group.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mem_groups: Vec<&str> = records
        .iter()
        .map(|r| r.mem_group.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let unknowns = cpu_groups.len() + mem_groups.len();
    let rows = records.len();

    let mut a = DMatrix::<f64>::zeros(rows, unknowns);
    let mut b = DVector::<f64>::zeros(rows);
    for (i, r) in records.iter().enumerate() {
        let ci = cpu_groups.iter().position(|g| *g == r.cpu_group).unwrap();
        let mi = mem_groups.iter().position(|g| *g == r.mem_group).unwrap();
        a[(i, ci)] = r.alpha as f64;
        a[(i, cpu_groups.len() + mi)] = r.beta;
        b[i] = r.price_per_hour;
    }

    // Thin SVD needs rows >= cols to expose the full rank deficiency.
    if rows < unknowns {
        let rank = a.clone().svd(false, false).rank(rank_eps(&a));
        return Err(PricingError::Underdetermined { rank, unknowns });
    }
    let svd = a.clone().svd(true, true);
    let rank = svd.rank(rank_eps(&a));
    if rank < unknowns {
        return Err(PricingError::Underdetermined { rank, unknowns });
    }
    let x = svd
        .solve(&b, rank_eps(&a))
        .map_err(|_| PricingError::Underdetermined { rank, unknowns })?;

    let fitted = &a * &x;
    let max_relative_residual = fitted
        .iter()
        .zip(b.iter())
        .map(|(f, p)| ((f - p) / p).abs())
        .fold(0.0_f64, f64::max);
    if max_relative_residual > RESIDUAL_TOLERANCE {
        return Err(PricingError::Inconsistent {
            residual: max_relative_residual,
            tolerance: RESIDUAL_TOLERANCE,
        });
    }

    let mut cpu_rates = BTreeMap::new();
    for (i, g) in cpu_groups.iter().enumerate() {
        cpu_rates.insert(g.to_string(), x[i]);
    }
    let mut mem_rates = BTreeMap::new();
    for (i, g) in mem_groups.iter().enumerate() {
        mem_rates.insert(g.to_string(), x[cpu_groups.len() + i]);
    }
    for (group, &value) in cpu_rates.iter().chain(mem_rates.iter()) {
        if value <= 0.0 {
            return Err(PricingError::NegativeRate {
                group: group.clone(),
                value,
            });
        }
    }

    let mut families = BTreeMap::new();
    for r in records {
        families.insert(
            r.family.clone(),
            FamilyRate {
                cpu_group: r.cpu_group.clone(),
                mem_group: r.mem_group.clone(),
                vcpu_hour: cpu_rates[&r.cpu_group],
                gb_hour: mem_rates[&r.mem_group],
                spot_multiplier: r.spot_multiplier,
            },
        );
    }
    Ok(PricingTable {
        cpu_rates,
        mem_rates,
        families,
        max_relative_residual,
    })
}

fn rank_eps(a: &DMatrix<f64>) -> f64 {
    let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    scale * a.nrows().max(a.ncols()) as f64 * f64::EPSILON * 16.0
}

impl PricingTable {
    pub fn rate(&self, family: &Family) -> Result<&FamilyRate, PricingError> {
        self.families
            .get(family)
            .ok_or_else(|| PricingError::UnknownFamily(family.clone()))
    }

    /// Copy of the table with `multiplier` as the spot multiplier of `families`.
    pub fn with_spot<'a>(
        &self,
        families: impl IntoIterator<Item = &'a Family>,
        multiplier: f64,
    ) -> Result<PricingTable, PricingError> {
        let mut table = self.clone();
        for f in families {
            if !(multiplier > 0.0 && multiplier <= 1.0) {
                return Err(PricingError::InvalidRecord {
                    family: f.to_string(),
                    reason: "spot multiplier must lie in (0, 1]".into(),
                });
            }
            let rate = table
                .families
                .get_mut(f)
                .ok_or_else(|| PricingError::UnknownFamily(f.clone()))?;
            rate.spot_multiplier = Some(multiplier);
        }
        Ok(table)
    }

    /// Copy of the table with all spot multipliers removed.
    pub fn without_spot(&self) -> PricingTable {
        let mut table = self.clone();
        for rate in table.families.values_mut() {
            rate.spot_multiplier = None;
        }
        table
    }

    /// Cost of running `duration_ms` on `cpu_share` vCPUs and `memory_mb` of
    /// charged memory on `family`.
    pub fn cost_of(
        &self,
        family: &Family,
        cpu_share: f64,
        memory_mb: f64,
        duration_ms: f64,
        use_spot: bool,
    ) -> Result<f64, PricingError> {
        let rate = self.rate(family)?;
        let hourly = cpu_share * rate.vcpu_hour + (memory_mb / 1024.0) * rate.gb_hour;
        let mut cost = duration_ms / MS_PER_HOUR * hourly;
        if use_spot {
            if let Some(m) = rate.spot_multiplier {
                cost *= m;
            }
        }
        Ok(cost)
    }

    /// Cost per millisecond of `config`, so that `cost = duration_ms * rate`.
    pub fn cost_rate_per_ms(&self, config: &ResourceConfig, use_spot: bool) -> Result<f64, PricingError> {
        self.cost_of(&config.family, config.cpu_share, config.memory_mb as f64, 1.0, use_spot)
    }

    /// Parses a price sheet CSV: `family,alpha,beta,price_per_hour,cpu_group,mem_group[,spot_multiplier]`.
    pub fn read_records<R: Read>(reader: R) -> Result<Vec<InstancePriceRecord>, PricingError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(reader);
        let mut out = Vec::new();
        for row in rdr.deserialize() {
            out.push(row?);
        }
        Ok(out)
    }
}

/// Cost of a run billed on allocated memory.
pub fn execution_cost(
    config: &ResourceConfig,
    duration_ms: f64,
    table: &PricingTable,
    use_spot: bool,
) -> Result<f64, PricingError> {
    table.cost_of(
        &config.family,
        config.cpu_share,
        config.memory_mb as f64,
        duration_ms,
        use_spot,
    )
}

/// Which memory figure a strategy bills.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MemoryCharge {
    /// The configured memory limit.
    #[default]
    Allocated,
    /// Peak memory actually used by the run.
    Consumed,
}

/// Cost of a run under a billing mode; `Consumed` falls back to the limit
/// when no peak was recorded.
pub fn billed_cost(
    config: &ResourceConfig,
    duration_ms: f64,
    peak_mem_mb: Option<f64>,
    charge: MemoryCharge,
    table: &PricingTable,
    use_spot: bool,
) -> Result<f64, PricingError> {
    let memory = match (charge, peak_mem_mb) {
        (MemoryCharge::Consumed, Some(peak)) => peak.min(config.memory_mb as f64),
        _ => config.memory_mb as f64,
    };
    table.cost_of(&config.family, config.cpu_share, memory, duration_ms, use_spot)
}

/// Hourly on-demand prices of 2-vCPU instances (large size) for the default
/// families plus the memory-optimized siblings that pin down the memory rates.
pub fn default_price_sheet() -> Vec<InstancePriceRecord> {
    vec![
        InstancePriceRecord::new("c5", 2, 4.0, 0.085, "intel-c", "intel"),
        InstancePriceRecord::new("m5", 2, 8.0, 0.096, "intel-m", "intel"),
        InstancePriceRecord::new("r5", 2, 16.0, 0.126, "intel-m", "intel"),
        InstancePriceRecord::new("c6g", 2, 4.0, 0.068, "arm-c", "arm"),
        InstancePriceRecord::new("m6g", 2, 8.0, 0.077, "arm-m", "arm"),
        InstancePriceRecord::new("r6g", 2, 16.0, 0.1008, "arm-m", "arm"),
        InstancePriceRecord::new("c5a", 2, 4.0, 0.077, "amd-c", "amd"),
        InstancePriceRecord::new("m5a", 2, 8.0, 0.086, "amd-m", "amd"),
        InstancePriceRecord::new("r5a", 2, 16.0, 0.113, "amd-m", "amd"),
    ]
}

/// Solved table for [`default_price_sheet`].
pub fn default_pricing() -> PricingTable {
    solve_pricing(&default_price_sheet()).expect("default price sheet is consistent")
}
