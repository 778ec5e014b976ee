//! TOML experiment configuration.
//!
//! ```toml
//! domains = ["so3", "terrain-ridge"]
//! horizon = 200
//! budgets = { start = 0.0, stop = 1.0, step = 0.05 }
//! calibration_seeds = { start = 10000, count = 64 }
//! evaluation_seeds = { start = 0, count = 50 }
//! q = 0.2
//! eps = 1e-8
//! out = "results"
//!
//! [domain.so3-impulse.dynamics]
//! impulse_magnitude = 25.0
//!
//! [domain.terrain-ridge.field]
//! ridge_amplitude = 1.5
//! ```
//!
//! Every key must be known; per-domain tables override individual fields of
//! the built-in defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::{Domain, DomainId, DomainSpec};
use crate::dynamics::DynamicsParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedRange {
    pub start: u64,
    pub count: u64,
}

impl SeedRange {
    pub fn seeds(&self) -> Vec<u64> {
        (self.start..self.start + self.count).collect()
    }

    fn end(&self) -> u64 {
        self.start + self.count
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl BudgetGrid {
    /// Grid points, snapped to the step so that `0.05·k` prints cleanly.
    pub fn fractions(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0) || !(0.0..=1.0).contains(&self.start) || !(0.0..=1.0).contains(&self.stop) || self.start > self.stop {
            return Err(Error::Config("budget grid must satisfy 0 <= start <= stop <= 1 and step > 0".into()));
        }
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        Ok((0..=n)
            .map(|k| {
                let v = self.start + k as f64 * self.step;
                (v * 1e9).round() / 1e9
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default = "default_domains")]
    domains: Vec<String>,
    horizon: Option<usize>,
    #[serde(default)]
    budgets: Option<BudgetSpec>,
    #[serde(default = "default_cal")]
    calibration_seeds: SeedRange,
    #[serde(default = "default_eval")]
    evaluation_seeds: SeedRange,
    #[serde(default = "default_q")]
    q: f64,
    #[serde(default = "default_eps")]
    eps: f64,
    #[serde(default = "default_summary_budget")]
    summary_budget: f64,
    #[serde(default)]
    out: Option<PathBuf>,
    #[serde(default)]
    compact_traces: bool,
    #[serde(default)]
    jobs: Option<usize>,
    /// Seeds for which pdm scenes and trajectory CSVs are written.
    #[serde(default = "default_scene_seeds")]
    scene_seeds: Vec<u64>,
    #[serde(default)]
    domain: BTreeMap<String, toml::Table>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum BudgetSpec {
    List(Vec<f64>),
    Grid(BudgetGrid),
}

fn default_domains() -> Vec<String> {
    DomainId::SYNTHETIC.iter().map(|d| d.to_string()).collect()
}
fn default_cal() -> SeedRange {
    SeedRange {
        start: 10_000,
        count: 64,
    }
}
fn default_eval() -> SeedRange {
    SeedRange { start: 0, count: 50 }
}
fn default_q() -> f64 {
    0.2
}
fn default_eps() -> f64 {
    crate::metrics::DEFAULT_EPS
}
fn default_summary_budget() -> f64 {
    0.25
}
fn default_scene_seeds() -> Vec<u64> {
    vec![0]
}

pub fn default_budget_grid() -> BudgetGrid {
    BudgetGrid {
        start: 0.0,
        stop: 1.0,
        step: 0.05,
    }
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub domains: Vec<Domain>,
    pub budgets: Vec<f64>,
    pub calibration_seeds: SeedRange,
    pub evaluation_seeds: SeedRange,
    pub q: f64,
    pub eps: f64,
    pub summary_budget: f64,
    pub out: PathBuf,
    pub compact_traces: bool,
    pub jobs: Option<usize>,
    pub scene_seeds: Vec<u64>,
    /// SHA-256 of the config source text.
    pub hash: String,
}

/// Wire form of a domain's overridable fields.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DomainTable {
    alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    field: Option<crate::geometry::HeightField>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lever: Option<crate::geometry::LeverArm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    obstacles: Option<crate::geometry::ObstacleSet>,
    dynamics: DynamicsParams,
}

/// Recursively overlays `user` onto `base`. Keys absent from `base` are
/// rejected; obstacle circle lists are replaced wholesale.
fn overlay(base: &mut toml::Table, user: &toml::Table, path: &str) -> Result<()> {
    for (k, v) in user {
        let here = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
        match (base.get_mut(k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(u)) => overlay(b, u, &here)?,
            (Some(slot), _) => *slot = v.clone(),
            (None, _) => return Err(Error::Config(format!("unknown key `{here}`"))),
        }
    }
    Ok(())
}

fn resolve_domain(id: DomainId, horizon: Option<usize>, user: Option<&toml::Table>) -> Result<Domain> {
    let mut d = Domain::default_for(id);
    if let (Some(h), true) = (horizon, id != DomainId::PdmLite) {
        d.params.horizon = h;
        d.params.impulse_start = 2 * h / 5;
        d.params.impulse_end = 2 * h / 5 + (h / 20).max(1);
    }
    if let Some(user) = user {
        let table = DomainTable {
            alpha: d.spec.alpha,
            field: d.spec.field,
            lever: d.spec.lever,
            obstacles: d.spec.obstacles.clone(),
            dynamics: d.params.clone(),
        };
        let mut base = toml::Table::try_from(&table).map_err(|e| Error::Config(e.to_string()))?;
        overlay(&mut base, user, &format!("domain.{id}"))?;
        let merged: DomainTable = base
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("domain.{id}: {}", e.message())))?;
        d.spec = DomainSpec {
            id,
            alpha: merged.alpha,
            field: merged.field,
            lever: merged.lever,
            obstacles: merged.obstacles,
        };
        d.params = merged.dynamics;
        if id == DomainId::PdmLite {
            if let Some(p) = &d.params.pdm {
                d.params.horizon = p.levels * p.inner_steps;
            }
        }
    }
    d.validate()?;
    Ok(d)
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        let mut ids = Vec::new();
        for name in &raw.domains {
            let id: DomainId = name.parse()?;
            if ids.contains(&id) {
                return Err(Error::Config(format!("domain `{id}` listed twice")));
            }
            ids.push(id);
        }
        if ids.is_empty() {
            return Err(Error::Config("no domains selected".into()));
        }
        for key in raw.domain.keys() {
            let id: DomainId = key.parse()?;
            if !ids.contains(&id) {
                return Err(Error::Config(format!("overrides for `{key}`, which is not in `domains`")));
            }
        }
        let domains = ids
            .iter()
            .map(|&id| resolve_domain(id, raw.horizon, raw.domain.get(id.name())))
            .collect::<Result<Vec<_>>>()?;
        let budgets = match raw.budgets {
            None => default_budget_grid().fractions()?,
            Some(BudgetSpec::Grid(g)) => g.fractions()?,
            Some(BudgetSpec::List(v)) => v,
        };
        if budgets.is_empty() || budgets.iter().any(|b| !(0.0..=1.0).contains(b)) {
            return Err(Error::Config("budget fractions must lie in [0, 1]".into()));
        }
        let (c, e) = (raw.calibration_seeds, raw.evaluation_seeds);
        if c.count == 0 || e.count == 0 {
            return Err(Error::Config("seed ranges must be nonempty".into()));
        }
        if c.start < e.end() && e.start < c.end() {
            let lo = c.start.max(e.start);
            let hi = c.end().min(e.end()) - 1;
            return Err(Error::Config(format!(
                "calibration seeds {}..{} overlap evaluation seeds {}..{} (shared {lo}..={hi})",
                c.start,
                c.end(),
                e.start,
                e.end()
            )));
        }
        if !(raw.q > 0.0 && raw.q <= 1.0) {
            return Err(Error::Config("q must be in (0, 1]".into()));
        }
        if !(raw.eps >= 0.0) {
            return Err(Error::Config("eps must be nonnegative".into()));
        }
        if raw.jobs == Some(0) {
            return Err(Error::Config("jobs must be positive".into()));
        }
        Ok(ExperimentConfig {
            domains,
            budgets,
            calibration_seeds: c,
            evaluation_seeds: e,
            q: raw.q,
            eps: raw.eps,
            summary_budget: raw.summary_budget,
            out: raw.out.unwrap_or_else(|| PathBuf::from("results")),
            compact_traces: raw.compact_traces,
            jobs: raw.jobs,
            scene_seeds: raw.scene_seeds,
            hash: hex::encode(Sha256::digest(text.as_bytes())),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Built-in defaults (six synthetic domains).
    pub fn default_synthetic() -> Self {
        Self::from_toml("").expect("defaults are valid")
    }

    pub fn domain(&self, id: DomainId) -> Option<&Domain> {
        self.domains.iter().find(|d| d.id() == id)
    }
}
