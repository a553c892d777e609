//! Sweep specification and parallel execution.

use std::path::{Path, PathBuf};

use pima::metrics::{aggregate, AggregateSummary, RunSummary};
use pima::{sim, SchedulerKind, SimConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ExpError, ExpResult};

/// A traffic sweep: every scheduler at every `Λ`, replicated over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Shared run settings; `scheduler`, `total_rate` and `seed` are
    /// replaced per run.
    pub base: SimConfig,
    pub lambda_grid: Vec<f64>,
    pub schedulers: Vec<SchedulerKind>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
}

impl SweepSpec {
    pub fn validate(&self) -> ExpResult<()> {
        if self.lambda_grid.is_empty() {
            return Err(ExpError::config("lambda_grid", "must not be empty"));
        }
        if let Some(bad) = self.lambda_grid.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(ExpError::config("lambda_grid", format!("values must be positive, got {bad}")));
        }
        if self.schedulers.is_empty() {
            return Err(ExpError::config("schedulers", "must not be empty"));
        }
        if self.seeds.is_empty() {
            return Err(ExpError::config("seeds", "must not be empty"));
        }
        for &scheduler in &self.schedulers {
            self.cell_config(scheduler, self.lambda_grid[0], self.seeds[0]).validate().map_err(|e| match e {
                pima::Error::InvalidConfig { field, reason } => {
                    ExpError::config(format!("base.{field}"), format!("for {scheduler}: {reason}"))
                }
                other => ExpError::Sim(other),
            })?;
        }
        Ok(())
    }

    pub fn cell_config(&self, scheduler: SchedulerKind, lambda: f64, seed: u64) -> SimConfig {
        SimConfig { scheduler, total_rate: lambda, seed, ..self.base.clone() }
    }

    /// `(scheduler, Λ)` cells in output order.
    pub fn cells(&self) -> Vec<(SchedulerKind, f64)> {
        self.schedulers
            .iter()
            .flat_map(|&s| self.lambda_grid.iter().map(move |&l| (s, l)))
            .collect()
    }

    pub fn from_json(text: &str, path: &Path) -> ExpResult<Self> {
        serde_json::from_str(text).map_err(|source| ExpError::Parse { path: path.to_path_buf(), source })
    }

    /// Reads a spec file. With `defaults`, the file only needs the fields
    /// it overrides; objects are merged key by key.
    pub fn load(path: &Path, defaults: Option<&SweepSpec>) -> ExpResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| ExpError::Io { path: path.to_path_buf(), source })?;
        let Some(defaults) = defaults else {
            return Self::from_json(&text, path);
        };
        let parse = |source| ExpError::Parse { path: path.to_path_buf(), source };
        let mut merged = serde_json::to_value(defaults).expect("spec serializes");
        let overlay: serde_json::Value = serde_json::from_str(&text).map_err(parse)?;
        merge(&mut merged, overlay);
        serde_json::from_value(merged).map_err(parse)
    }
}

fn merge(into: &mut serde_json::Value, from: serde_json::Value) {
    match (into, from) {
        (serde_json::Value::Object(a), serde_json::Value::Object(b)) => {
            for (k, v) in b {
                match a.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        a.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Per-seed summaries of one cell, in seed order.
pub fn run_cell(spec: &SweepSpec, scheduler: SchedulerKind, lambda: f64) -> ExpResult<Vec<RunSummary>> {
    spec.seeds
        .par_iter()
        .map(|&seed| sim::run(&spec.cell_config(scheduler, lambda, seed)).map_err(ExpError::from))
        .collect()
}

/// One aggregated row per cell, in spec order. Runs execute in parallel;
/// the fold is ordered, so the output does not depend on scheduling.
pub fn run_sweep(spec: &SweepSpec) -> ExpResult<Vec<AggregateSummary>> {
    spec.validate()?;
    let cells = spec.cells();
    let jobs: Vec<(usize, u64)> =
        (0..cells.len()).flat_map(|c| spec.seeds.iter().map(move |&s| (c, s))).collect();
    let runs: Vec<RunSummary> = jobs
        .par_iter()
        .map(|&(c, seed)| {
            let (scheduler, lambda) = cells[c];
            sim::run(&spec.cell_config(scheduler, lambda, seed)).map_err(ExpError::from)
        })
        .collect::<ExpResult<_>>()?;
    Ok(cells
        .iter()
        .zip(runs.chunks(spec.seeds.len()))
        .map(|(&(scheduler, _), chunk)| aggregate(scheduler, chunk))
        .collect())
}
