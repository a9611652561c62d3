use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::objective::ObjectiveSpec;
use super::Method;
use crate::bench::RunResult;
use crate::space::{ResourceConfig, SpaceDescriptor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub function_id: String,
    pub input_id: String,
    pub seed: u64,
    pub objective: ObjectiveSpec,
    pub method: Method,
    pub budget: usize,
    pub n_init: usize,
    pub space: SpaceDescriptor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Random bootstrap before the first model fit.
    Init,
    /// Chosen by maximizing expected improvement.
    Model,
    /// Drawn by a model-free sampler.
    Sample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub phase: Phase,
    pub config: ResourceConfig,
    pub result: RunResult,
    /// Duration billed for the trial; the timeout for timed-out runs.
    pub duration_ms: Option<f64>,
    pub cost: Option<f64>,
    /// Objective value; `None` for failed runs.
    pub value: Option<f64>,
    pub best_so_far: Option<f64>,
    /// Expected improvement of the chosen config, for model-driven trials.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acquisition: Option<f64>,
    /// Memory floor after this trial.
    pub memory_floor_mb: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceEvent {
    pub trial: usize,
    pub failed_memory_mb: u32,
    pub floor_mb: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub header: TraceHeader,
    pub trials: Vec<Trial>,
    pub slices: Vec<SliceEvent>,
    /// Set when the untested space ran out before the budget did.
    pub stopped_early: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum TraceRecord {
    Header(TraceHeader),
    Trial(Trial),
    Slice(SliceEvent),
    End { stopped_early: bool },
}

impl OptimizationTrace {
    /// First trial reaching the lowest objective value.
    pub fn best(&self) -> Option<&Trial> {
        self.trials
            .iter()
            .filter(|t| t.value.is_some())
            .fold(None, |best: Option<&Trial>, t| match best {
                Some(b) if b.value <= t.value => Some(b),
                _ => Some(t),
            })
    }

    pub fn best_value(&self) -> Option<f64> {
        self.best().and_then(|t| t.value)
    }

    /// Incumbent config after each trial (`None` until a trial succeeds).
    pub fn incumbents(&self) -> Vec<Option<ResourceConfig>> {
        let mut best: Option<(f64, &ResourceConfig)> = None;
        self.trials
            .iter()
            .map(|t| {
                if let Some(v) = t.value {
                    if best.is_none_or(|(b, _)| v < b) {
                        best = Some((v, &t.config));
                    }
                }
                best.map(|(_, c)| c.clone())
            })
            .collect()
    }

    /// JSON lines: header, trials with slice events after the trial that
    /// caused them, then an end marker.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut line = |r: &TraceRecord| -> std::io::Result<()> {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")
        };
        line(&TraceRecord::Header(self.header.clone()))?;
        for t in &self.trials {
            line(&TraceRecord::Trial(t.clone()))?;
            for s in self.slices.iter().filter(|s| s.trial == t.index) {
                line(&TraceRecord::Slice(s.clone()))?;
            }
        }
        line(&TraceRecord::End {
            stopped_early: self.stopped_early,
        })
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> std::io::Result<Self> {
        let mut header = None;
        let mut trials = Vec::new();
        let mut slices = Vec::new();
        let mut stopped_early = false;
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str(&line)? {
                TraceRecord::Header(h) => header = Some(h),
                TraceRecord::Trial(t) => trials.push(t),
                TraceRecord::Slice(s) => slices.push(s),
                TraceRecord::End { stopped_early: s } => stopped_early = s,
            }
        }
        let header = header.ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidData, "trace has no header"))?;
        Ok(OptimizationTrace {
            header,
            trials,
            slices,
            stopped_early,
        })
    }
}
