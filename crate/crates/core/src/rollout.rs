//! Corrected rollouts and paired execution of all four schedules.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{Domain, DomainId};
use crate::dynamics::{self, NoiseStream};
use crate::error::{Error, Result};
use crate::geometry::{self, State};
use crate::schedule::{budget_for, BudgetState, ScheduleContext, ScheduleKind, SchedulePolicy, ScheduleRegistry, ThresholdSurface};

/// Defect above which the final state gets a terminal projection.
pub const FEASIBLE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutTrace {
    pub domain: DomainId,
    pub seed: u64,
    pub schedule: ScheduleKind,
    pub horizon: usize,
    /// Intermediate budget B; absent for unbudgeted schedules.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
    /// `x_0..x_T`, the last one after any final projection. Elided in compact
    /// records.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<Vec<State>>,
    /// `s_t = d(x̃_{t+1})` for `t < T`.
    pub proposal_defects: Vec<f64>,
    /// `d(x_t)` for `t = 1..T`.
    pub post_defects: Vec<f64>,
    pub correction_events: Vec<usize>,
    /// `|events| / T`.
    pub achieved_budget: f64,
    pub projection_calls: usize,
    pub final_projection: bool,
    pub degenerate: bool,
}

impl RolloutTrace {
    pub fn states(&self) -> Result<&[State]> {
        self.states
            .as_deref()
            .ok_or_else(|| Error::Metric("trace has no stored states (compact record)".into()))
    }

    pub fn compact(mut self) -> Self {
        self.states = None;
        self
    }

    /// Structural invariants of a complete trace.
    pub fn check(&self) -> Result<()> {
        let t = self.horizon;
        let fail = |m: &str| Err(Error::Metric(format!("{} {} seed {}: {m}", self.domain, self.schedule, self.seed)));
        if self.proposal_defects.len() != t || self.post_defects.len() != t {
            return fail("defect sequences do not match horizon");
        }
        if let Some(s) = &self.states {
            if s.len() != t + 1 {
                return fail("state count is not T + 1");
            }
        }
        if self.correction_events.windows(2).any(|w| w[0] >= w[1]) || self.correction_events.iter().any(|&e| e >= t) {
            return fail("correction events are not strictly increasing steps in [0, T)");
        }
        if self.projection_calls != self.correction_events.len() + usize::from(self.final_projection) {
            return fail("projection call count does not match events");
        }
        if let Some(b) = self.budget {
            if self.correction_events.len() > b {
                return fail("budget exceeded");
            }
        }
        Ok(())
    }
}

/// Runs one rollout under `policy` with a shared noise stream.
pub fn run_rollout(domain: &Domain, policy: &dyn SchedulePolicy, noise: &NoiseStream) -> Result<RolloutTrace> {
    let spec = &domain.spec;
    let params = &domain.params;
    let horizon = params.horizon;
    if policy.horizon() != horizon {
        return Err(Error::Config(format!(
            "schedule horizon {} differs from domain horizon {horizon}",
            policy.horizon()
        )));
    }
    let kind = policy.kind();
    let mut budget = BudgetState::new(policy.budget().unwrap_or(0));
    let mut x = dynamics::initial_state(spec, params, noise)?;
    let mut states = Vec::with_capacity(horizon + 1);
    let mut proposal_defects = Vec::with_capacity(horizon);
    let mut post_defects = Vec::with_capacity(horizon);
    let mut events = Vec::new();
    let mut final_projection = false;
    states.push(x.clone());
    for t in 0..horizon {
        let proposal = dynamics::propose_update(&x, t, params, noise, spec)?;
        let s = geometry::defect_generic(&proposal, spec)?;
        if !s.is_finite() {
            return Err(Error::NonFiniteStep {
                step: t,
                context: "proposal defect".into(),
            });
        }
        proposal_defects.push(s);
        // terminal's end-of-rollout decision is the final projection below
        let correct = kind != ScheduleKind::Terminal && policy.decide(t, s, &budget)?;
        let mut d = s;
        x = if correct {
            if kind.is_budgeted() {
                budget.spend(t)?;
            }
            events.push(t);
            let p = geometry::project(&proposal, spec).map_err(|e| tag(e, t))?;
            d = geometry::defect_generic(&p, spec)?;
            p
        } else {
            proposal
        };
        if t + 1 == horizon && d > FEASIBLE_TOL {
            x = geometry::project(&x, spec).map_err(|e| tag(e, t))?;
            d = geometry::defect_generic(&x, spec)?;
            final_projection = true;
        }
        post_defects.push(d);
        states.push(x.clone());
    }
    let trace = RolloutTrace {
        domain: spec.id,
        seed: noise.seed(),
        schedule: kind,
        horizon,
        budget: policy.budget(),
        states: Some(states),
        proposal_defects,
        achieved_budget: events.len() as f64 / horizon as f64,
        projection_calls: events.len() + usize::from(final_projection),
        correction_events: events,
        post_defects,
        final_projection,
        degenerate: false,
    };
    trace.check()?;
    Ok(trace)
}

fn tag(e: Error, step: usize) -> Error {
    match e {
        Error::Degenerate(m) => Error::NonFiniteStep {
            step,
            context: format!("projection failed: {m}"),
        },
        Error::NonFinite { context } => Error::NonFiniteStep { step, context },
        other => other,
    }
}

/// Noise stream with the per-step draws of `domain` precomputed.
pub fn noise_for(domain: &Domain, seed: u64) -> NoiseStream {
    NoiseStream::cached(seed, domain.horizon(), dynamics::noise_width(domain.id(), &domain.params))
}

/// Terminal-schedule proposal defects for calibration.
pub fn calibration_trace(domain: &Domain, seed: u64) -> Result<Vec<f64>> {
    let reg = ScheduleRegistry::default();
    let policy = reg.create("terminal", &context(domain, 0, None))?;
    Ok(run_rollout(domain, policy.as_ref(), &noise_for(domain, seed))?.proposal_defects)
}

fn context(domain: &Domain, budget: usize, surface: Option<Arc<ThresholdSurface>>) -> ScheduleContext {
    ScheduleContext {
        horizon: domain.horizon(),
        budget,
        surface,
    }
}

/// All four schedule arms for one (domain, seed, budget).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedCell {
    pub domain: DomainId,
    pub seed: u64,
    pub fraction: f64,
    pub budget: usize,
    /// In [`ScheduleKind::ALL`] order.
    pub traces: Vec<RolloutTrace>,
}

impl PairedCell {
    pub fn arm(&self, kind: ScheduleKind) -> &RolloutTrace {
        &self.traces[ScheduleKind::ALL.iter().position(|&k| k == kind).unwrap()]
    }

    pub fn horizon(&self) -> usize {
        self.traces[0].horizon
    }
}

/// Runs the paired cell. `surface` must be calibrated for `round(fraction·T)`.
pub fn run_paired_cell(domain: &Domain, fraction: f64, seed: u64, surface: Option<Arc<ThresholdSurface>>) -> Result<PairedCell> {
    let budget = budget_for(fraction, domain.horizon())?;
    let reg = ScheduleRegistry::default();
    let ctx = context(domain, budget, surface);
    let noise = noise_for(domain, seed);
    let traces = ScheduleKind::ALL
        .iter()
        .map(|k| {
            let policy = reg.create(k.name(), &ctx)?;
            run_rollout(domain, policy.as_ref(), &noise)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PairedCell {
        domain: domain.id(),
        seed,
        fraction,
        budget,
        traces,
    })
}
