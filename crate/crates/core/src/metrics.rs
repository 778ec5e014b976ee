//! Trajectory-fidelity metrics and paired aggregation.

use serde::{Deserialize, Serialize};

use crate::domain::{DomainId, DomainSpec};
use crate::error::{Error, Result};
use crate::geometry::{self, State};
use crate::rollout::{PairedCell, RolloutTrace, FEASIBLE_TOL};
use crate::schedule::ScheduleKind;

pub const DEFAULT_EPS: f64 = 1e-8;

/// `E_path = Σ_{t=1..T} d(x_t)`.
pub fn path_error(trace: &RolloutTrace) -> f64 {
    trace.post_defects.iter().sum()
}

fn on_manifold(x: &State, spec: &DomainSpec) -> Result<State> {
    if geometry::defect_generic(x, spec)? > FEASIBLE_TOL {
        geometry::project(x, spec)
    } else {
        Ok(x.clone())
    }
}

fn rho(a: &State, b: &State, spec: &DomainSpec) -> Result<f64> {
    geometry::distance(&on_manifold(a, spec)?, &on_manifold(b, spec)?, spec)
}

/// `E_state = Σ_{t=1..T} ρ(x_t, x_t^ref)`, projecting off-manifold states first.
pub fn state_path_error(trace: &RolloutTrace, reference: &RolloutTrace, spec: &DomainSpec) -> Result<f64> {
    let (a, b) = (trace.states()?, reference.states()?);
    if a.len() != b.len() {
        return Err(Error::Metric(format!("horizons differ ({} vs {})", a.len() - 1, b.len() - 1)));
    }
    a.iter().zip(b).skip(1).map(|(x, y)| rho(x, y, spec)).sum()
}

/// `E_end = ρ(x_T, x_T^ref)`.
pub fn endpoint_distance(trace: &RolloutTrace, reference: &RolloutTrace, spec: &DomainSpec) -> Result<f64> {
    let (a, b) = (trace.states()?, reference.states()?);
    if a.len() != b.len() {
        return Err(Error::Metric(format!("horizons differ ({} vs {})", a.len() - 1, b.len() - 1)));
    }
    rho(a.last().unwrap(), b.last().unwrap(), spec)
}

/// NEPE of `e` given the cell's stepwise and terminal path errors, or `None`
/// when the denominator is below `eps`.
pub fn nepe_value(e: f64, stepwise: f64, terminal: f64, eps: f64) -> Option<f64> {
    let den = terminal - stepwise;
    (den >= eps).then(|| (e - stepwise) / den)
}

/// `(m_periodic − m_adaptive) / m_periodic`; `None` when `m_periodic ≤ 0`.
pub fn improvement(m_periodic: f64, m_adaptive: f64) -> Option<f64> {
    (m_periodic > 0.0).then(|| (m_periodic - m_adaptive) / m_periodic)
}

pub fn benefit_recovered(nepe: f64) -> f64 {
    1.0 - nepe
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WinRate {
    pub rate: f64,
    pub se: f64,
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
    pub n: usize,
}

/// Strict win indicator `m_adaptive < m_periodic` over `(adaptive, periodic)`
/// pairs, with binomial SE `√(p(1−p)/N)`.
pub fn win_rate(pairs: &[(f64, f64)]) -> Result<WinRate> {
    if pairs.is_empty() {
        return Err(Error::Metric("win rate of an empty list".into()));
    }
    let n = pairs.len();
    let wins = pairs.iter().filter(|(a, p)| a < p).count();
    let ties = pairs.iter().filter(|(a, p)| a == p).count();
    let rate = wins as f64 / n as f64;
    Ok(WinRate {
        rate,
        se: (rate * (1.0 - rate) / n as f64).sqrt(),
        wins,
        losses: n - wins - ties,
        ties,
        n,
    })
}

/// Share of total defect carried by the `⌈qT⌉` largest entries; ties go to
/// the earlier index. `None` when the total is zero.
pub fn top_q_mass(defects: &[f64], q: f64) -> Result<Option<f64>> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::Metric(format!("q = {q} outside (0, 1]")));
    }
    let total: f64 = defects.iter().sum();
    if !(total > 0.0) {
        return Ok(None);
    }
    let k = ((q * defects.len() as f64).ceil() as usize).min(defects.len());
    let mut idx: Vec<usize> = (0..defects.len()).collect();
    idx.sort_by(|&a, &b| defects[b].total_cmp(&defects[a]).then(a.cmp(&b)));
    let top: f64 = idx[..k].iter().map(|&i| defects[i]).sum();
    Ok(Some(top / total))
}

/// Sample mean and `std/√N` (SE is 0 for a single value).
pub fn mean_se(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, (var / n).sqrt()))
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmMetrics {
    pub schedule: ScheduleKind,
    pub endpoint: f64,
    pub path: f64,
    pub state: f64,
    /// Absent on degenerate cells.
    pub nepe: Option<f64>,
    pub achieved_budget: f64,
    pub projection_calls: usize,
    pub final_projection: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub domain: DomainId,
    pub seed: u64,
    pub fraction: f64,
    pub budget: usize,
    pub horizon: usize,
    pub degenerate: bool,
    /// Top-q defect mass of the uncorrected (terminal) proposal defects.
    pub top_q_mass: Option<f64>,
    pub adaptive_events: Vec<usize>,
    /// In [`ScheduleKind::ALL`] order.
    pub arms: Vec<ArmMetrics>,
}

impl CellMetrics {
    pub fn arm(&self, kind: ScheduleKind) -> &ArmMetrics {
        self.arms.iter().find(|a| a.schedule == kind).expect("all arms present")
    }
}

/// Metrics of one cell; marks the traces degenerate when the terminal and
/// stepwise path errors nearly coincide.
pub fn cell_metrics(cell: &mut PairedCell, spec: &DomainSpec, eps: f64, q: f64) -> Result<CellMetrics> {
    let step = cell.arm(ScheduleKind::Stepwise).clone();
    let e_step = path_error(&step);
    let e_term = path_error(cell.arm(ScheduleKind::Terminal));
    let degenerate = nepe_value(0.0, e_step, e_term, eps).is_none();
    let mut arms = Vec::with_capacity(4);
    for tr in &mut cell.traces {
        tr.degenerate = degenerate;
        let path = path_error(tr);
        arms.push(ArmMetrics {
            schedule: tr.schedule,
            endpoint: endpoint_distance(tr, &step, spec)?,
            path,
            state: state_path_error(tr, &step, spec)?,
            nepe: nepe_value(path, e_step, e_term, eps),
            achieved_budget: tr.achieved_budget,
            projection_calls: tr.projection_calls,
            final_projection: tr.final_projection,
        });
    }
    Ok(CellMetrics {
        domain: cell.domain,
        seed: cell.seed,
        fraction: cell.fraction,
        budget: cell.budget,
        horizon: cell.horizon(),
        degenerate,
        top_q_mass: top_q_mass(&cell.arm(ScheduleKind::Terminal).proposal_defects, q)?,
        adaptive_events: cell.arm(ScheduleKind::Adaptive).correction_events.clone(),
        arms,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub se: f64,
}

impl Stat {
    fn of(values: &[f64]) -> Option<Stat> {
        mean_se(values).map(|(mean, se)| Stat { mean, se })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub schedule: ScheduleKind,
    pub endpoint: Stat,
    pub path: Stat,
    pub state: Stat,
    pub nepe: Option<Stat>,
    pub achieved_budget: Stat,
    pub achieved_min: f64,
    pub achieved_max: f64,
    pub final_projection_rate: f64,
    pub projection_calls: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub domain: DomainId,
    pub fraction: f64,
    pub budget: usize,
    pub horizon: usize,
    /// Paired cells in the group, degenerate ones included.
    pub n: usize,
    pub n_degenerate: usize,
    pub arms: Vec<ArmSummary>,
    pub endpoint_win: WinRate,
    pub pathwise_win: WinRate,
    /// Improvement of adaptive over periodic on mean NEPE, with the SE of the
    /// per-pair improvements.
    pub delta_nepe: Option<Stat>,
    /// Median per-pair NEPE improvement.
    pub median_delta_nepe: Option<f64>,
    pub delta_endpoint: Option<Stat>,
    /// `1 − mean adaptive NEPE`.
    pub benefit: Option<f64>,
    pub top_q_mass: Option<Stat>,
}

impl AggregateRow {
    pub fn arm(&self, kind: ScheduleKind) -> &ArmSummary {
        self.arms.iter().find(|a| a.schedule == kind).expect("all arms present")
    }
}

/// Aggregates one (domain, budget) group. Cells are folded in seed order so
/// the result does not depend on input order. Returns `None` for an empty
/// group.
pub fn aggregate(cells: &[&CellMetrics]) -> Result<Option<AggregateRow>> {
    let Some(first) = cells.first() else {
        return Ok(None);
    };
    let mut sorted: Vec<&CellMetrics> = cells.to_vec();
    sorted.sort_by_key(|c| c.seed);
    if sorted.iter().any(|c| c.domain != first.domain || c.budget != first.budget) {
        return Err(Error::Metric("aggregate group mixes domains or budgets".into()));
    }
    let live: Vec<&CellMetrics> = sorted.iter().copied().filter(|c| !c.degenerate).collect();
    let collect = |k: ScheduleKind, f: &dyn Fn(&ArmMetrics) -> f64, from: &[&CellMetrics]| -> Vec<f64> {
        from.iter().map(|c| f(c.arm(k))).collect()
    };
    let mut arms = Vec::with_capacity(4);
    for k in ScheduleKind::ALL {
        let ach = collect(k, &|a| a.achieved_budget, &sorted);
        let nepe: Vec<f64> = live.iter().filter_map(|c| c.arm(k).nepe).collect();
        arms.push(ArmSummary {
            schedule: k,
            endpoint: Stat::of(&collect(k, &|a| a.endpoint, &sorted)).unwrap(),
            path: Stat::of(&collect(k, &|a| a.path, &sorted)).unwrap(),
            state: Stat::of(&collect(k, &|a| a.state, &sorted)).unwrap(),
            nepe: Stat::of(&nepe),
            achieved_budget: Stat::of(&ach).unwrap(),
            achieved_min: ach.iter().copied().fold(f64::INFINITY, f64::min),
            achieved_max: ach.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            final_projection_rate: sorted.iter().filter(|c| c.arm(k).final_projection).count() as f64 / sorted.len() as f64,
            projection_calls: Stat::of(&collect(k, &|a| a.projection_calls as f64, &sorted)).unwrap(),
        });
    }
    let pairs = |f: &dyn Fn(&ArmMetrics) -> f64| -> Vec<(f64, f64)> {
        sorted
            .iter()
            .map(|c| (f(c.arm(ScheduleKind::Adaptive)), f(c.arm(ScheduleKind::Periodic))))
            .collect()
    };
    let summary = |k: ScheduleKind| arms.iter().find(|a| a.schedule == k).unwrap();
    let mean_nepe = |k: ScheduleKind| summary(k).nepe.map(|s| s.mean);
    let nepe_deltas: Vec<f64> = live
        .iter()
        .filter_map(|c| improvement(c.arm(ScheduleKind::Periodic).nepe?, c.arm(ScheduleKind::Adaptive).nepe?))
        .collect();
    let end_deltas: Vec<f64> = sorted
        .iter()
        .filter_map(|c| improvement(c.arm(ScheduleKind::Periodic).endpoint, c.arm(ScheduleKind::Adaptive).endpoint))
        .collect();
    let masses: Vec<f64> = sorted.iter().filter_map(|c| c.top_q_mass).collect();
    let (per, ada) = (mean_nepe(ScheduleKind::Periodic), mean_nepe(ScheduleKind::Adaptive));
    let with_se = |m: Option<f64>, d: &[f64]| {
        m.map(|mean| Stat {
            mean,
            se: mean_se(d).map_or(0.0, |(_, se)| se),
        })
    };
    let delta_nepe = with_se(per.zip(ada).and_then(|(p, a)| improvement(p, a)), &nepe_deltas);
    let delta_endpoint = with_se(
        improvement(summary(ScheduleKind::Periodic).endpoint.mean, summary(ScheduleKind::Adaptive).endpoint.mean),
        &end_deltas,
    );
    Ok(Some(AggregateRow {
        domain: first.domain,
        fraction: first.fraction,
        budget: first.budget,
        horizon: first.horizon,
        n: sorted.len(),
        n_degenerate: sorted.len() - live.len(),
        endpoint_win: win_rate(&pairs(&|a| a.endpoint))?,
        pathwise_win: win_rate(&pairs(&|a| a.path))?,
        delta_nepe,
        median_delta_nepe: median(&nepe_deltas),
        delta_endpoint,
        benefit: ada.map(benefit_recovered),
        top_q_mass: Stat::of(&masses),
        arms,
    }))
}
