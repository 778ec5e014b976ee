//! Quick in-process consistency checks on a reduced grid.

use crate::domain::DomainId;
use crate::error::Result;
use crate::metrics::CellMetrics;
use crate::schedule::{periodic_indices, ScheduleKind, ThresholdSurface};

use super::config::ExperimentConfig;
use super::grid::{self, CellOutcome};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub ok: bool,
    pub detail: String,
}

const SMALL: &str = r#"
domains = ["so3", "se3", "terrain", "so3-impulse", "se3-lever", "terrain-ridge", "pdm-lite"]
horizon = 40
budgets = [0.0, 0.25, 1.0]
calibration_seeds = { start = 1000, count = 12 }
evaluation_seeds = { start = 0, count = 6 }

[domain.pdm-lite.dynamics.pdm]
levels = 4
"#;

pub fn small_config() -> ExperimentConfig {
    ExperimentConfig::from_toml(SMALL).expect("built-in selftest config is valid")
}

fn check(name: &'static str, ok: bool, detail: impl Into<String>) -> Check {
    Check {
        name,
        ok,
        detail: detail.into(),
    }
}

fn cells(cfg: &ExperimentConfig) -> Result<(Vec<CellMetrics>, usize)> {
    let seeds = cfg.calibration_seeds.seeds();
    let mut surfaces = Vec::new();
    for d in &cfg.domains {
        let full = grid::calibrate_full(d, &seeds)?;
        surfaces.push(grid::surfaces_for(&full, &cfg.budgets)?);
    }
    let out = grid::run_grid(&cfg.domains, &surfaces, &cfg.budgets, &cfg.evaluation_seeds.seeds(), cfg.eps, cfg.q, true)?;
    let mut failed = 0;
    let mut ok = Vec::new();
    for o in out {
        match o {
            CellOutcome::Done { metrics, .. } => ok.push(metrics),
            CellOutcome::Failed(_) => failed += 1,
        }
    }
    Ok((ok, failed))
}

pub fn run() -> Result<Vec<Check>> {
    let mut out = Vec::new();

    let idx_ok = (1..=30).all(|t| {
        (0..=t).all(|b| {
            let idx = periodic_indices(t, b).unwrap_or_default();
            idx.len() == b && idx.windows(2).all(|w| w[0] < w[1]) && idx.last().is_none_or(|&l| l < t)
        })
    });
    out.push(check("periodic indices", idx_ok, "count, order and range for T <= 30"));

    let traces = vec![vec![0.5, 2.0, 1.0, 0.1], vec![1.5, 0.2, 3.0, 0.4], vec![0.0, 1.0, 1.0, 1.0]];
    let s = ThresholdSurface::calibrate(&traces, 4, 4)?;
    let back = ThresholdSurface::from_text(&s.to_text(), "selftest")?;
    out.push(check("surface round trip", back == s && s.check().is_ok(), "text artifact reproduces the surface"));

    let cfg = small_config();
    let (a, failed) = cells(&cfg)?;
    out.push(check("no failed cells", failed == 0, format!("{failed} failed of {}", a.len() + failed)));

    let same = |c: &CellMetrics, x: ScheduleKind, y: ScheduleKind| {
        let (p, q) = (c.arm(x), c.arm(y));
        p.endpoint == q.endpoint && p.path == q.path && p.projection_calls == q.projection_calls
    };
    let zero = a
        .iter()
        .filter(|c| c.budget == 0)
        .all(|c| same(c, ScheduleKind::Periodic, ScheduleKind::Terminal) && same(c, ScheduleKind::Adaptive, ScheduleKind::Terminal));
    out.push(check("zero budget equals terminal", zero, "periodic and adaptive at B = 0"));
    let full = a
        .iter()
        .filter(|c| c.budget == c.horizon)
        .all(|c| same(c, ScheduleKind::Periodic, ScheduleKind::Stepwise) && same(c, ScheduleKind::Adaptive, ScheduleKind::Stepwise));
    out.push(check("full budget equals stepwise", full, "periodic and adaptive at B = T"));

    let within = a
        .iter()
        .all(|c| [ScheduleKind::Periodic, ScheduleKind::Adaptive].iter().all(|&k| c.arm(k).achieved_budget * c.horizon as f64 <= c.budget as f64 + 1e-9));
    out.push(check("budget compliance", within, "achieved events never exceed B"));

    let (b, _) = cells(&cfg)?;
    out.push(check("deterministic rerun", a == b, "identical metrics from a second run"));

    let pdm = a.iter().filter(|c| c.domain == DomainId::PdmLite).count();
    out.push(check("all domains ran", pdm > 0 && a.len() == cfg.domains.len() * 3 * 6, format!("{} cells", a.len())));

    Ok(out)
}
