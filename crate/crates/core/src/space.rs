//! Discrete configuration grid: axes, allocation strategies, numeric encoding
//! and failure-driven slicing.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::SpaceError;

/// Default CPU shares, in vCPUs.
pub const DEFAULT_CPU_AXIS: [f64; 8] = [0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0];
/// Default memory limits, in MB.
pub const DEFAULT_MEM_AXIS: [u32; 6] = [128, 256, 512, 768, 1024, 2048];
/// Default instance families.
pub const DEFAULT_FAMILIES: [&str; 6] = ["c6g", "m6g", "c5", "m5", "c5a", "m5a"];
/// Family used by the single-family strategies unless told otherwise.
pub const DEFAULT_FAMILY: &str = "m5";

/// Instance family identifier, e.g. `m5`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Family(pub String);

impl Family {
    pub fn new(name: impl Into<String>) -> Self {
        Family(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Family {
    fn from(s: &str) -> Self {
        Family(s.to_string())
    }
}

/// One point of the grid.
///
/// Equality, hashing and ordering treat `cpu_share` by its bit pattern so a
/// config can key maps; axis values are exact literals so this is sound.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResourceConfig {
    pub cpu_share: f64,
    pub memory_mb: u32,
    pub family: Family,
}

impl ResourceConfig {
    pub fn new(cpu_share: f64, memory_mb: u32, family: impl Into<Family>) -> Self {
        ResourceConfig {
            cpu_share,
            memory_mb,
            family: family.into(),
        }
    }

    pub fn memory_gb(&self) -> f64 {
        self.memory_mb as f64 / 1024.0
    }
}

impl PartialEq for ResourceConfig {
    fn eq(&self, other: &Self) -> bool {
        self.cpu_share.to_bits() == other.cpu_share.to_bits()
            && self.memory_mb == other.memory_mb
            && self.family == other.family
    }
}

impl Eq for ResourceConfig {}

impl Hash for ResourceConfig {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.cpu_share.to_bits().hash(state);
        self.memory_mb.hash(state);
        self.family.hash(state);
    }
}

impl Ord for ResourceConfig {
    fn cmp(&self, other: &Self) -> Ordering {
        self.family
            .cmp(&other.family)
            .then(self.cpu_share.total_cmp(&other.cpu_share))
            .then(self.memory_mb.cmp(&other.memory_mb))
    }
}

impl PartialOrd for ResourceConfig {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for ResourceConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}vCPU/{}MB", self.family, self.cpu_share, self.memory_mb)
    }
}

/// How CPU, memory and family may be combined.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "family", rename_all = "snake_case")]
pub enum Strategy {
    /// Every combination of the three axes.
    Decoupled,
    /// Every CPU/memory combination on one family.
    DecoupledSingleFamily(Family),
    /// CPU share tied to the memory limit on one family.
    PropCpu(Family),
    /// One full vCPU, any memory, on one family.
    FixedCpu(Family),
}

impl Strategy {
    pub fn family(&self) -> Option<&Family> {
        match self {
            Strategy::Decoupled => None,
            Strategy::DecoupledSingleFamily(f) | Strategy::PropCpu(f) | Strategy::FixedCpu(f) => {
                Some(f)
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            Strategy::Decoupled => "decoupled".to_string(),
            Strategy::DecoupledSingleFamily(f) => format!("decoupled-{f}"),
            Strategy::PropCpu(f) => format!("prop-cpu-{f}"),
            Strategy::FixedCpu(f) => format!("fixed-cpu-{f}"),
        }
    }

    /// The four strategies compared against each other, single-family ones on `family`.
    pub fn standard_set(family: &Family) -> [Strategy; 4] {
        [
            Strategy::FixedCpu(family.clone()),
            Strategy::PropCpu(family.clone()),
            Strategy::DecoupledSingleFamily(family.clone()),
            Strategy::Decoupled,
        ]
    }
}

/// The discrete search space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub cpu_axis: Vec<f64>,
    pub mem_axis: Vec<u32>,
    pub family_axis: Vec<Family>,
    /// Largest memory limit observed to fail; nothing at or below it is enumerated.
    #[serde(default)]
    pub memory_floor_mb: u32,
    pub strategy: Strategy,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            cpu_axis: DEFAULT_CPU_AXIS.to_vec(),
            mem_axis: DEFAULT_MEM_AXIS.to_vec(),
            family_axis: DEFAULT_FAMILIES.iter().map(|&f| Family::from(f)).collect(),
            memory_floor_mb: 0,
            strategy: Strategy::Decoupled,
        }
    }
}

/// On-disk space descriptor; omitted fields take the default grid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SpaceDescriptor {
    #[serde(default)]
    pub cpu_axis: Option<Vec<f64>>,
    #[serde(default)]
    pub mem_axis: Option<Vec<u32>>,
    #[serde(default)]
    pub family_axis: Option<Vec<Family>>,
    #[serde(default)]
    pub strategy: Option<Strategy>,
}

impl SearchSpace {
    /// Builds a space from explicit axes, sorting the numeric axes ascending.
    pub fn new(
        mut cpu_axis: Vec<f64>,
        mut mem_axis: Vec<u32>,
        family_axis: Vec<Family>,
        strategy: Strategy,
    ) -> Result<Self, SpaceError> {
        if cpu_axis.is_empty() || mem_axis.is_empty() || family_axis.is_empty() {
            return Err(SpaceError::EmptyAxis);
        }
        if cpu_axis.iter().any(|c| !c.is_finite() || *c <= 0.0) {
            return Err(SpaceError::InvalidAxis("cpu shares must be positive".into()));
        }
        if mem_axis.contains(&0) {
            return Err(SpaceError::InvalidAxis("memory limits must be positive".into()));
        }
        cpu_axis.sort_by(f64::total_cmp);
        cpu_axis.dedup();
        mem_axis.sort_unstable();
        mem_axis.dedup();
        let mut seen = std::collections::HashSet::new();
        if !family_axis.iter().all(|f| seen.insert(f)) {
            return Err(SpaceError::InvalidAxis("duplicate family".into()));
        }
        let space = SearchSpace {
            cpu_axis,
            mem_axis,
            family_axis,
            memory_floor_mb: 0,
            strategy: Strategy::Decoupled,
        };
        space.with_strategy(strategy)
    }

    pub fn from_descriptor(desc: SpaceDescriptor) -> Result<Self, SpaceError> {
        let default = SearchSpace::default();
        SearchSpace::new(
            desc.cpu_axis.unwrap_or(default.cpu_axis),
            desc.mem_axis.unwrap_or(default.mem_axis),
            desc.family_axis.unwrap_or(default.family_axis),
            desc.strategy.unwrap_or(Strategy::Decoupled),
        )
    }

    pub fn descriptor(&self) -> SpaceDescriptor {
        SpaceDescriptor {
            cpu_axis: Some(self.cpu_axis.clone()),
            mem_axis: Some(self.mem_axis.clone()),
            family_axis: Some(self.family_axis.clone()),
            strategy: Some(self.strategy.clone()),
        }
    }

    /// Same axes and floor, different strategy.
    pub fn with_strategy(&self, strategy: Strategy) -> Result<Self, SpaceError> {
        if let Some(f) = strategy.family() {
            if !self.family_axis.contains(f) {
                return Err(SpaceError::UnknownFamily(f.clone()));
            }
        }
        Ok(SearchSpace {
            strategy,
            ..self.clone()
        })
    }

    pub fn family_index(&self, family: &Family) -> Option<usize> {
        self.family_axis.iter().position(|f| f == family)
    }

    pub fn contains_axes(&self, config: &ResourceConfig) -> bool {
        self.cpu_index(config.cpu_share).is_some()
            && self.mem_axis.contains(&config.memory_mb)
            && self.family_index(&config.family).is_some()
    }

    fn cpu_index(&self, cpu: f64) -> Option<usize> {
        self.cpu_axis.iter().position(|c| c.to_bits() == cpu.to_bits())
    }

    /// CPU share paired with `memory_mb` under the proportional strategy:
    /// one vCPU per GB, rounded up onto the CPU axis and clamped to its range.
    pub fn proportional_cpu(&self, memory_mb: u32) -> f64 {
        let wanted = memory_mb as f64 / 1024.0;
        self.cpu_axis
            .iter()
            .copied()
            .find(|&c| c >= wanted - 1e-12)
            .unwrap_or(*self.cpu_axis.last().expect("non-empty cpu axis"))
    }

    /// True if the config survives the strategy filter and the memory floor.
    pub fn admits(&self, config: &ResourceConfig) -> bool {
        if !self.contains_axes(config) || config.memory_mb <= self.memory_floor_mb {
            return false;
        }
        match &self.strategy {
            Strategy::Decoupled => true,
            Strategy::DecoupledSingleFamily(f) => &config.family == f,
            Strategy::PropCpu(f) => {
                &config.family == f
                    && self.proportional_cpu(config.memory_mb).to_bits() == config.cpu_share.to_bits()
            }
            Strategy::FixedCpu(f) => &config.family == f && config.cpu_share == 1.0,
        }
    }

    /// Memory limits still above the floor.
    pub fn live_memory(&self) -> impl Iterator<Item = u32> + '_ {
        self.mem_axis
            .iter()
            .copied()
            .filter(move |&m| m > self.memory_floor_mb)
    }

    /// All admitted configs ordered by (family axis order, cpu, memory).
    pub fn enumerate(&self) -> Vec<ResourceConfig> {
        let mut out = Vec::new();
        for family in &self.family_axis {
            if self.strategy.family().is_some_and(|f| f != family) {
                continue;
            }
            for &cpu in &self.cpu_axis {
                for mem in self.live_memory() {
                    let config = ResourceConfig::new(cpu, mem, family.clone());
                    if self.admits(&config) {
                        out.push(config);
                    }
                }
            }
        }
        out
    }

    /// Raises the memory floor after a failure at `failed_memory_mb`.
    pub fn slice_on_failure(&self, failed_memory_mb: u32) -> Result<SearchSpace, SpaceError> {
        if !self.mem_axis.contains(&failed_memory_mb) {
            return Err(SpaceError::OffAxisMemory(failed_memory_mb));
        }
        let sliced = SearchSpace {
            memory_floor_mb: self.memory_floor_mb.max(failed_memory_mb),
            ..self.clone()
        };
        if sliced.enumerate().is_empty() {
            return Err(SpaceError::Exhausted {
                floor_mb: sliced.memory_floor_mb,
            });
        }
        Ok(sliced)
    }

    /// Length of an encoded vector: cpu, log-memory, one-hot family.
    pub fn encoded_len(&self) -> usize {
        2 + self.family_axis.len()
    }

    /// Maps a config onto `[0,1]` cpu and log2-memory coordinates plus a family one-hot.
    pub fn encode(&self, config: &ResourceConfig) -> Result<Vec<f64>, SpaceError> {
        if !self.contains_axes(config) {
            return Err(SpaceError::OffAxis(config.clone()));
        }
        let family = self
            .family_index(&config.family)
            .ok_or_else(|| SpaceError::OffAxis(config.clone()))?;
        let (cmin, cmax) = (self.cpu_axis[0], *self.cpu_axis.last().unwrap());
        let cpu_norm = if cmax > cmin {
            (config.cpu_share - cmin) / (cmax - cmin)
        } else {
            0.0
        };
        let lmin = (self.mem_axis[0] as f64).log2();
        let lmax = (*self.mem_axis.last().unwrap() as f64).log2();
        let mem_norm = if lmax > lmin {
            ((config.memory_mb as f64).log2() - lmin) / (lmax - lmin)
        } else {
            0.0
        };
        let mut v = vec![0.0; self.encoded_len()];
        v[0] = cpu_norm;
        v[1] = mem_norm;
        v[2 + family] = 1.0;
        Ok(v)
    }
}
