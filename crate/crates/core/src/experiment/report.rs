//! Tables and plot data from per-cell metric records.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::domain::DomainId;
use crate::error::{Error, Result};
use crate::metrics::{aggregate, improvement, median, win_rate, AggregateRow, CellMetrics, Stat, WinRate};
use crate::schedule::ScheduleKind;

use super::svg;

/// Per-domain win rates pooled over all budgets with `0 < B < T`.
#[derive(Debug, Clone, PartialEq)]
pub struct WinRow {
    pub domain: DomainId,
    pub endpoint: WinRate,
    pub pathwise: WinRate,
    pub median_delta_nepe: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    /// One row per (domain, budget), sorted.
    pub rows: Vec<AggregateRow>,
    pub wins: Vec<WinRow>,
    pub summary_budget: f64,
    /// Groups with no cells at all, reported as warnings.
    pub warnings: Vec<String>,
}

impl Report {
    pub fn build(cells: &[CellMetrics], summary_budget: f64) -> Result<Report> {
        if cells.is_empty() {
            return Err(Error::MissingArtifact("no cell records".into()));
        }
        let mut groups: BTreeMap<(DomainId, usize), Vec<&CellMetrics>> = BTreeMap::new();
        for c in cells {
            groups.entry((c.domain, c.budget)).or_default().push(c);
        }
        let mut rows = Vec::new();
        let mut warnings = Vec::new();
        for ((d, b), g) in &groups {
            match aggregate(g)? {
                Some(r) => rows.push(r),
                None => warnings.push(format!("{d} B={b}: empty group")),
            }
        }
        let mut by_domain: BTreeMap<DomainId, Vec<&CellMetrics>> = BTreeMap::new();
        for c in cells {
            if c.budget > 0 && c.budget < c.horizon {
                by_domain.entry(c.domain).or_default().push(c);
            }
        }
        let mut wins = Vec::new();
        for (d, mut g) in by_domain {
            g.sort_by_key(|c| (c.budget, c.seed));
            let pairs = |f: &dyn Fn(ScheduleKind, &CellMetrics) -> f64| -> Vec<(f64, f64)> {
                g.iter().map(|c| (f(ScheduleKind::Adaptive, c), f(ScheduleKind::Periodic, c))).collect()
            };
            let deltas: Vec<f64> = g
                .iter()
                .filter(|c| !c.degenerate)
                .filter_map(|c| improvement(c.arm(ScheduleKind::Periodic).nepe?, c.arm(ScheduleKind::Adaptive).nepe?))
                .collect();
            wins.push(WinRow {
                domain: d,
                endpoint: win_rate(&pairs(&|k, c| c.arm(k).endpoint))?,
                pathwise: win_rate(&pairs(&|k, c| c.arm(k).path))?,
                median_delta_nepe: median(&deltas),
            });
        }
        Ok(Report {
            rows,
            wins,
            summary_budget,
            warnings,
        })
    }

    pub fn row(&self, domain: DomainId, fraction: f64) -> Option<&AggregateRow> {
        self.rows.iter().find(|r| r.domain == domain && (r.fraction - fraction).abs() < 1e-12)
    }

    pub fn domains(&self) -> Vec<DomainId> {
        let mut d: Vec<DomainId> = self.rows.iter().map(|r| r.domain).collect();
        d.dedup();
        d
    }

    pub fn summary_csv(&self) -> Result<String> {
        let mut w = Table::new(&[
            "domain",
            "budget_fraction",
            "n",
            "n_degenerate",
            "periodic_endpoint",
            "periodic_endpoint_se",
            "adaptive_endpoint",
            "adaptive_endpoint_se",
            "delta_endpoint",
            "delta_endpoint_se",
            "periodic_nepe",
            "periodic_nepe_se",
            "adaptive_nepe",
            "adaptive_nepe_se",
            "delta_nepe",
            "delta_nepe_se",
            "periodic_benefit",
            "adaptive_benefit",
            "periodic_e_state",
            "adaptive_e_state",
            "top_q_mass",
            "pathwise_win",
            "pathwise_win_se",
        ]);
        for r in self.rows.iter().filter(|r| (r.fraction - self.summary_budget).abs() < 1e-12) {
            let (p, a) = (r.arm(ScheduleKind::Periodic), r.arm(ScheduleKind::Adaptive));
            w.row(vec![
                r.domain.to_string(),
                num(r.fraction),
                r.n.to_string(),
                r.n_degenerate.to_string(),
                num(p.endpoint.mean),
                num(p.endpoint.se),
                num(a.endpoint.mean),
                num(a.endpoint.se),
                opt(r.delta_endpoint.map(|s| s.mean)),
                opt(r.delta_endpoint.map(|s| s.se)),
                opt(p.nepe.map(|s| s.mean)),
                opt(p.nepe.map(|s| s.se)),
                opt(a.nepe.map(|s| s.mean)),
                opt(a.nepe.map(|s| s.se)),
                opt(r.delta_nepe.map(|s| s.mean)),
                opt(r.delta_nepe.map(|s| s.se)),
                opt(p.nepe.map(|s| 1.0 - s.mean)),
                opt(r.benefit),
                num(p.state.mean),
                num(a.state.mean),
                opt(r.top_q_mass.map(|s| s.mean)),
                num(r.pathwise_win.rate),
                num(r.pathwise_win.se),
            ]);
        }
        w.finish()
    }

    pub fn frontier_csv(&self) -> Result<String> {
        let mut w = Table::new(&[
            "domain",
            "budget_fraction",
            "budget",
            "schedule",
            "nepe",
            "nepe_se",
            "e_path",
            "e_path_se",
            "e_state",
            "e_state_se",
            "endpoint",
            "endpoint_se",
            "n",
            "n_degenerate",
        ]);
        for r in &self.rows {
            for a in &r.arms {
                w.row(vec![
                    r.domain.to_string(),
                    num(r.fraction),
                    r.budget.to_string(),
                    a.schedule.to_string(),
                    opt(a.nepe.map(|s| s.mean)),
                    opt(a.nepe.map(|s| s.se)),
                    num(a.path.mean),
                    num(a.path.se),
                    num(a.state.mean),
                    num(a.state.se),
                    num(a.endpoint.mean),
                    num(a.endpoint.se),
                    r.n.to_string(),
                    r.n_degenerate.to_string(),
                ]);
            }
        }
        w.finish()
    }

    pub fn winrates_csv(&self) -> Result<String> {
        let mut w = Table::new(&[
            "domain",
            "endpoint_win",
            "endpoint_win_se",
            "pathwise_win",
            "pathwise_win_se",
            "median_delta_nepe",
            "n",
        ]);
        for r in &self.wins {
            w.row(vec![
                r.domain.to_string(),
                num(r.endpoint.rate),
                num(r.endpoint.se),
                num(r.pathwise.rate),
                num(r.pathwise.se),
                opt(r.median_delta_nepe),
                r.pathwise.n.to_string(),
            ]);
        }
        w.finish()
    }

    pub fn budget_usage_csv(&self) -> Result<String> {
        let mut w = Table::new(&[
            "domain",
            "budget_fraction",
            "budget",
            "schedule",
            "target",
            "achieved_mean",
            "achieved_se",
            "achieved_min",
            "achieved_max",
            "projection_calls",
            "final_projection_rate",
            "n",
        ]);
        for r in &self.rows {
            for a in r.arms.iter().filter(|a| a.schedule.is_budgeted()) {
                w.row(vec![
                    r.domain.to_string(),
                    num(r.fraction),
                    r.budget.to_string(),
                    a.schedule.to_string(),
                    num(r.budget as f64 / r.horizon as f64),
                    num(a.achieved_budget.mean),
                    num(a.achieved_budget.se),
                    num(a.achieved_min),
                    num(a.achieved_max),
                    num(a.projection_calls.mean),
                    num(a.final_projection_rate),
                    r.n.to_string(),
                ]);
            }
        }
        w.finish()
    }

    pub fn degenerate_csv(&self) -> Result<String> {
        let mut w = Table::new(&["domain", "budget_fraction", "n", "n_degenerate"]);
        for r in &self.rows {
            w.row(vec![r.domain.to_string(), num(r.fraction), r.n.to_string(), r.n_degenerate.to_string()]);
        }
        w.finish()
    }

    pub fn frontier_svg(&self, domain: DomainId) -> String {
        let rows: Vec<&AggregateRow> = self.rows.iter().filter(|r| r.domain == domain).collect();
        let series = |k: ScheduleKind| -> Vec<(f64, Stat)> {
            rows.iter()
                .filter_map(|r| r.arm(k).nepe.map(|s| (r.fraction, s)))
                .collect()
        };
        svg::frontier(
            &format!("{domain}: NEPE vs budget"),
            &[
                ("terminal", "#888888", series(ScheduleKind::Terminal)),
                ("stepwise", "#444444", series(ScheduleKind::Stepwise)),
                ("periodic", "#1f77b4", series(ScheduleKind::Periodic)),
                ("adaptive", "#d62728", series(ScheduleKind::Adaptive)),
            ],
        )
    }

    /// Writes every table and frontier plot into `dir`; returns the paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut files = vec![
            ("summary.csv".to_string(), self.summary_csv()?),
            ("frontier.csv".to_string(), self.frontier_csv()?),
            ("winrates.csv".to_string(), self.winrates_csv()?),
            ("budget_usage.csv".to_string(), self.budget_usage_csv()?),
            ("degenerate.csv".to_string(), self.degenerate_csv()?),
        ];
        for d in self.domains() {
            files.push((format!("frontier_{d}.svg"), self.frontier_svg(d)));
        }
        let mut out = Vec::new();
        for (name, body) in files {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
            out.push(p);
        }
        Ok(out)
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

struct Table {
    w: csv::Writer<Vec<u8>>,
    err: Option<csv::Error>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = w.write_record(header).err();
        Table { w, err }
    }

    fn row(&mut self, cells: Vec<String>) {
        if self.err.is_none() {
            self.err = self.w.write_record(&cells).err();
        }
    }

    fn finish(self) -> Result<String> {
        if let Some(e) = self.err {
            return Err(Error::Metric(format!("csv: {e}")));
        }
        let bytes = self.w.into_inner().map_err(|e| Error::Metric(format!("csv: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Error::Metric(e.to_string()))
    }
}
