//! Correction schedules: when to project during a rollout.

pub mod surface;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use surface::{CalibrationInfo, ThresholdSurface};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    Terminal,
    Stepwise,
    Periodic,
    Adaptive,
}

impl ScheduleKind {
    pub const ALL: [ScheduleKind; 4] = [
        ScheduleKind::Terminal,
        ScheduleKind::Stepwise,
        ScheduleKind::Periodic,
        ScheduleKind::Adaptive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScheduleKind::Terminal => "terminal",
            ScheduleKind::Stepwise => "stepwise",
            ScheduleKind::Periodic => "periodic",
            ScheduleKind::Adaptive => "adaptive",
        }
    }

    pub fn is_budgeted(self) -> bool {
        matches!(self, ScheduleKind::Periodic | ScheduleKind::Adaptive)
    }
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScheduleKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownSchedule(s.to_string()))
    }
}

/// Remaining corrections and the steps where the others were spent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BudgetState {
    remaining: usize,
    spent_at: Vec<usize>,
}

impl BudgetState {
    pub fn new(budget: usize) -> Self {
        BudgetState {
            remaining: budget,
            spent_at: Vec::new(),
        }
    }

    pub fn remaining(&self) -> usize {
        self.remaining
    }

    pub fn spent_at(&self) -> &[usize] {
        &self.spent_at
    }

    pub fn total(&self) -> usize {
        self.remaining + self.spent_at.len()
    }

    pub fn spend(&mut self, t: usize) -> Result<()> {
        if self.remaining == 0 {
            return Err(Error::BudgetExhausted);
        }
        if self.spent_at.last().is_some_and(|&last| t <= last) {
            return Err(Error::StepOutOfRange {
                t,
                horizon: usize::MAX,
            });
        }
        self.remaining -= 1;
        self.spent_at.push(t);
        Ok(())
    }
}

/// `{⌊(k+1)T/B⌋ − 1 : k < B}`, ascending. Always contains `T − 1` when `B ≥ 1`.
pub fn periodic_indices(horizon: usize, budget: usize) -> Result<Vec<usize>> {
    if budget > horizon {
        return Err(Error::BudgetExceedsHorizon { budget, horizon });
    }
    Ok((0..budget).map(|k| (k + 1) * horizon / budget - 1).collect())
}

/// `round(fraction·T)` with ties to even.
pub fn budget_for(fraction: f64, horizon: usize) -> Result<usize> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Config(format!("budget fraction {fraction} outside [0, 1]")));
    }
    Ok((fraction * horizon as f64).round_ties_even() as usize)
}

/// An online correction policy. `decide` sees only the current step, the
/// current proposal defect and the budget state.
pub trait SchedulePolicy: Send + Sync {
    fn kind(&self) -> ScheduleKind;
    fn horizon(&self) -> usize;
    /// Intermediate budget, or `None` for unbudgeted schedules.
    fn budget(&self) -> Option<usize>;
    fn decide_unchecked(&self, t: usize, s_t: f64, budget: &BudgetState) -> bool;

    fn decide(&self, t: usize, s_t: f64, budget: &BudgetState) -> Result<bool> {
        if t >= self.horizon() {
            return Err(Error::StepOutOfRange {
                t,
                horizon: self.horizon(),
            });
        }
        if !(s_t >= 0.0) {
            return Err(Error::Metric(format!("defect {s_t} at step {t} is not nonnegative")));
        }
        Ok(self.decide_unchecked(t, s_t, budget))
    }
}

pub struct Terminal {
    horizon: usize,
}

impl SchedulePolicy for Terminal {
    fn kind(&self) -> ScheduleKind {
        ScheduleKind::Terminal
    }
    fn horizon(&self) -> usize {
        self.horizon
    }
    fn budget(&self) -> Option<usize> {
        None
    }
    fn decide_unchecked(&self, t: usize, _: f64, _: &BudgetState) -> bool {
        t + 1 == self.horizon
    }
}

pub struct Stepwise {
    horizon: usize,
}

impl SchedulePolicy for Stepwise {
    fn kind(&self) -> ScheduleKind {
        ScheduleKind::Stepwise
    }
    fn horizon(&self) -> usize {
        self.horizon
    }
    fn budget(&self) -> Option<usize> {
        None
    }
    fn decide_unchecked(&self, _: usize, _: f64, _: &BudgetState) -> bool {
        true
    }
}

pub struct Periodic {
    budget: usize,
    marks: Vec<bool>,
}

impl Periodic {
    pub fn new(horizon: usize, budget: usize) -> Result<Self> {
        let mut marks = vec![false; horizon];
        for i in periodic_indices(horizon, budget)? {
            marks[i] = true;
        }
        Ok(Periodic { budget, marks })
    }
}

impl SchedulePolicy for Periodic {
    fn kind(&self) -> ScheduleKind {
        ScheduleKind::Periodic
    }
    fn horizon(&self) -> usize {
        self.marks.len()
    }
    fn budget(&self) -> Option<usize> {
        Some(self.budget)
    }
    fn decide_unchecked(&self, t: usize, _: f64, budget: &BudgetState) -> bool {
        self.marks[t] && budget.remaining() > 0
    }
}

pub struct Adaptive {
    surface: Arc<ThresholdSurface>,
}

impl Adaptive {
    pub fn new(surface: Arc<ThresholdSurface>) -> Self {
        Adaptive { surface }
    }
}

impl SchedulePolicy for Adaptive {
    fn kind(&self) -> ScheduleKind {
        ScheduleKind::Adaptive
    }
    fn horizon(&self) -> usize {
        self.surface.horizon()
    }
    fn budget(&self) -> Option<usize> {
        Some(self.surface.budget())
    }
    fn decide_unchecked(&self, t: usize, s_t: f64, budget: &BudgetState) -> bool {
        let b = budget.remaining();
        b > 0 && s_t >= self.surface.get(t, b.min(self.surface.budget()))
    }
}

/// Inputs available to a schedule factory.
#[derive(Clone)]
pub struct ScheduleContext {
    pub horizon: usize,
    pub budget: usize,
    pub surface: Option<Arc<ThresholdSurface>>,
}

pub type ScheduleFactory = fn(&ScheduleContext) -> Result<Box<dyn SchedulePolicy>>;

/// Name-keyed schedule constructors.
#[derive(Clone)]
pub struct ScheduleRegistry {
    entries: BTreeMap<String, ScheduleFactory>,
}

impl Default for ScheduleRegistry {
    fn default() -> Self {
        let mut r = ScheduleRegistry {
            entries: BTreeMap::new(),
        };
        r.register("terminal", |c| Ok(Box::new(Terminal { horizon: c.horizon })));
        r.register("stepwise", |c| Ok(Box::new(Stepwise { horizon: c.horizon })));
        r.register("periodic", |c| Ok(Box::new(Periodic::new(c.horizon, c.budget)?)));
        r.register("adaptive", |c| {
            let s = c
                .surface
                .clone()
                .ok_or_else(|| Error::Config("adaptive schedule requires a calibrated threshold surface".into()))?;
            if s.horizon() != c.horizon || s.budget() != c.budget {
                return Err(Error::Config(format!(
                    "surface is for T={} B={}, rollout needs T={} B={}",
                    s.horizon(),
                    s.budget(),
                    c.horizon,
                    c.budget
                )));
            }
            Ok(Box::new(Adaptive::new(s)))
        });
        r
    }
}

impl ScheduleRegistry {
    pub fn register(&mut self, name: &str, factory: ScheduleFactory) {
        self.entries.insert(name.to_string(), factory);
    }

    pub fn create(&self, name: &str, ctx: &ScheduleContext) -> Result<Box<dyn SchedulePolicy>> {
        let f = self.entries.get(name).ok_or_else(|| Error::UnknownSchedule(name.to_string()))?;
        f(ctx)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn periodic_placement() {
        assert_eq!(periodic_indices(8, 2).unwrap(), vec![3, 7]);
        assert_eq!(periodic_indices(8, 8).unwrap(), (0..8).collect::<Vec<_>>());
        assert!(periodic_indices(8, 0).unwrap().is_empty());
        assert!(periodic_indices(8, 9).is_err());
        assert_eq!(periodic_indices(200, 50).unwrap()[..3], [3, 7, 11]);
    }

    #[test]
    fn spend_bookkeeping() {
        let mut b = BudgetState::new(3);
        b.spend(5).unwrap();
        assert_eq!((b.remaining(), b.spent_at()), (2, &[5][..]));
        let mut b = BudgetState::new(2);
        b.spend(2).unwrap();
        b.spend(7).unwrap();
        assert_eq!((b.remaining(), b.spent_at()), (0, &[2, 7][..]));
        assert_eq!(b.spend(9), Err(Error::BudgetExhausted));
        assert_eq!(b.total(), 2);
    }

    #[test]
    fn budget_rounding_ties_to_even() {
        assert_eq!(budget_for(0.25, 200).unwrap(), 50);
        assert_eq!(budget_for(0.5, 5).unwrap(), 2);
        assert_eq!(budget_for(0.3, 5).unwrap(), 2);
        assert_eq!(budget_for(0.7, 5).unwrap(), 4);
        assert!(budget_for(1.5, 5).is_err());
    }

    fn ctx(h: usize, b: usize, s: Option<ThresholdSurface>) -> ScheduleContext {
        ScheduleContext {
            horizon: h,
            budget: b,
            surface: s.map(Arc::new),
        }
    }

    #[test]
    fn limiting_thresholds() {
        let reg = ScheduleRegistry::default();
        let inf = reg.create("adaptive", &ctx(6, 6, Some(ThresholdSurface::filled(6, 6, f64::INFINITY)))).unwrap();
        let zero = reg.create("adaptive", &ctx(6, 6, Some(ThresholdSurface::filled(6, 6, 0.0)))).unwrap();
        let mut b = BudgetState::new(6);
        for t in 0..6 {
            assert!(!inf.decide(t, 1e300, &b).unwrap());
            assert!(zero.decide(t, 0.0, &b).unwrap());
            b.spend(t).unwrap();
        }
        // exhausted
        assert!(!zero.decide(5, 10.0, &b).unwrap());
    }

    #[test]
    fn fixed_schedules() {
        let reg = ScheduleRegistry::default();
        let term = reg.create("terminal", &ctx(5, 0, None)).unwrap();
        let step = reg.create("stepwise", &ctx(5, 0, None)).unwrap();
        let per = reg.create("periodic", &ctx(8, 2, None)).unwrap();
        let b = BudgetState::new(2);
        let fired: Vec<bool> = (0..5).map(|t| term.decide(t, 0.0, &b).unwrap()).collect();
        assert_eq!(fired, [false, false, false, false, true]);
        assert!((0..5).all(|t| step.decide(t, 0.0, &b).unwrap()));
        let fired: Vec<usize> = (0..8).filter(|&t| per.decide(t, 0.0, &b).unwrap()).collect();
        assert_eq!(fired, [3, 7]);
        assert!(term.decide(5, 0.0, &b).is_err());
        assert!(step.decide(0, -1.0, &b).is_err());
    }

    #[test]
    fn ties_spend() {
        let s = ThresholdSurface::calibrate(&[vec![1.0, 2.0, 3.0, 4.0]], 4, 1).unwrap();
        let a = Adaptive::new(Arc::new(s));
        let b = BudgetState::new(1);
        assert!(a.decide(0, 3.0, &b).unwrap());
        assert!(!a.decide(0, 2.999, &b).unwrap());
        // b ≥ T − t: threshold is −∞
        assert!(a.decide(3, 0.0, &b).unwrap());
    }

    #[test]
    fn registry_errors() {
        let reg = ScheduleRegistry::default();
        assert!(matches!(reg.create("adaptive", &ctx(4, 1, None)), Err(Error::Config(_))));
        assert!(matches!(reg.create("greedy", &ctx(4, 1, None)), Err(Error::UnknownSchedule(_))));
        let s = ThresholdSurface::filled(4, 2, 0.0);
        assert!(reg.create("adaptive", &ctx(4, 1, Some(s))).is_err());
        assert_eq!(reg.names().collect::<Vec<_>>(), ["adaptive", "periodic", "stepwise", "terminal"]);
    }
}
