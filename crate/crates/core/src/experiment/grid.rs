//! In-memory calibration and paired-cell execution over a grid.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{Domain, DomainId};
use crate::error::{Error, Result};
use crate::metrics::{cell_metrics, CellMetrics};
use crate::rollout::{calibration_trace, run_paired_cell, RolloutTrace};
use crate::schedule::{budget_for, CalibrationInfo, ThresholdSurface};

/// Calibrates the full-budget surface (`B = T`) of `domain` from terminal
/// rollouts on `seeds`. Per-budget surfaces are truncations of it.
pub fn calibrate_full(domain: &Domain, seeds: &[u64]) -> Result<ThresholdSurface> {
    let traces = seeds
        .par_iter()
        .map(|&s| calibration_trace(domain, s))
        .collect::<Result<Vec<_>>>()?;
    let mut surface = ThresholdSurface::calibrate(&traces, domain.horizon(), domain.horizon())?;
    surface.info = CalibrationInfo {
        domain: domain.id().to_string(),
        seeds: seeds.to_vec(),
    };
    Ok(surface)
}

/// Surfaces keyed by budget for every fraction in `fractions`.
pub fn surfaces_for(full: &ThresholdSurface, fractions: &[f64]) -> Result<BTreeMap<usize, Arc<ThresholdSurface>>> {
    let mut out = BTreeMap::new();
    for &f in fractions {
        let b = budget_for(f, full.horizon())?;
        if let std::collections::btree_map::Entry::Vacant(e) = out.entry(b) {
            e.insert(Arc::new(full.truncate(b)?));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub domain: DomainId,
    pub seed: u64,
    pub fraction: f64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellOutcome {
    Done {
        metrics: CellMetrics,
        traces: Vec<RolloutTrace>,
    },
    Failed(CellFailure),
}

/// One grid cell: run, score, and keep the traces (states elided when
/// `compact`).
pub fn evaluate_cell(
    domain: &Domain,
    fraction: f64,
    seed: u64,
    surface: Arc<ThresholdSurface>,
    eps: f64,
    q: f64,
    compact: bool,
) -> CellOutcome {
    let run = || -> Result<(CellMetrics, Vec<RolloutTrace>)> {
        let mut cell = run_paired_cell(domain, fraction, seed, Some(surface))?;
        let m = cell_metrics(&mut cell, &domain.spec, eps, q)?;
        let traces = if compact {
            cell.traces.into_iter().map(RolloutTrace::compact).collect()
        } else {
            cell.traces
        };
        Ok((m, traces))
    };
    match run() {
        Ok((metrics, traces)) => CellOutcome::Done { metrics, traces },
        Err(e) => CellOutcome::Failed(CellFailure {
            domain: domain.id(),
            seed,
            fraction,
            error: e.to_string(),
        }),
    }
}

/// Runs every (domain, fraction, seed) cell. Cells are computed in parallel
/// within one (domain, fraction) group and handed to `sink` in (domain,
/// fraction, seed) order, so only one group is held in memory.
#[allow(clippy::too_many_arguments)]
pub fn run_grid_with(
    domains: &[Domain],
    surfaces: &[BTreeMap<usize, Arc<ThresholdSurface>>],
    fractions: &[f64],
    seeds: &[u64],
    eps: f64,
    q: f64,
    compact: bool,
    mut sink: impl FnMut(CellOutcome) -> Result<()>,
) -> Result<()> {
    if surfaces.len() != domains.len() {
        return Err(Error::MissingArtifact("one surface set per domain is required".into()));
    }
    let mut groups = Vec::new();
    for (di, d) in domains.iter().enumerate() {
        for &f in fractions {
            let b = budget_for(f, d.horizon())?;
            let s = surfaces[di]
                .get(&b)
                .cloned()
                .ok_or_else(|| Error::MissingArtifact(format!("threshold surface for {} at B = {b}", d.id())))?;
            groups.push((d, f, s));
        }
    }
    for (d, f, s) in groups {
        let out: Vec<CellOutcome> = seeds
            .par_iter()
            .map(|&seed| evaluate_cell(d, f, seed, s.clone(), eps, q, compact))
            .collect();
        for o in out {
            sink(o)?;
        }
    }
    Ok(())
}

/// [`run_grid_with`] collected into a vector.
pub fn run_grid(
    domains: &[Domain],
    surfaces: &[BTreeMap<usize, Arc<ThresholdSurface>>],
    fractions: &[f64],
    seeds: &[u64],
    eps: f64,
    q: f64,
    compact: bool,
) -> Result<Vec<CellOutcome>> {
    let mut out = Vec::new();
    run_grid_with(domains, surfaces, fractions, seeds, eps, q, compact, |o| {
        out.push(o);
        Ok(())
    })?;
    Ok(out)
}
