//! Experiment driver: calibration, grid runs, reports and the pdm-lite study.

pub mod config;
pub mod grid;
pub mod report;
pub mod selftest;
pub mod svg;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use sha2::{Digest, Sha256};

use crate::domain::{Domain, DomainId};
use crate::error::{Error, Result};
use crate::geometry::State;
use crate::metrics::CellMetrics;
use crate::rollout::run_paired_cell;
use crate::schedule::{budget_for, ScheduleKind, ThresholdSurface};

pub use config::ExperimentConfig;
pub use grid::{CellFailure, CellOutcome};
pub use report::Report;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Runs `f` on a pool of `jobs` threads, or the global pool when `None`.
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

pub fn surface_path(out: &Path, domain: DomainId, budget: usize) -> PathBuf {
    out.join("surfaces").join(format!("{domain}_b{budget}.txt"))
}

fn create_dir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

fn write_file(p: &Path, body: &str) -> Result<()> {
    std::fs::write(p, body).map_err(|e| Error::io(p, e))
}

fn budgets_of(cfg: &ExperimentConfig, d: &Domain) -> Result<Vec<usize>> {
    let mut b = cfg
        .budgets
        .iter()
        .map(|&f| budget_for(f, d.horizon()))
        .collect::<Result<Vec<_>>>()?;
    b.sort_unstable();
    b.dedup();
    Ok(b)
}

/// Calibrates every configured domain and writes one surface artifact per
/// (domain, budget).
pub fn calibrate(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    create_dir(&out.join("surfaces"))?;
    let seeds = cfg.calibration_seeds.seeds();
    let mut files = Vec::new();
    for d in &cfg.domains {
        let full = grid::calibrate_full(d, &seeds)?;
        for b in budgets_of(cfg, d)? {
            let p = surface_path(out, d.id(), b);
            full.truncate(b)?.save(&p)?;
            files.push(p);
        }
    }
    Ok(files)
}

/// Loads the surfaces written by [`calibrate`] for one domain.
pub fn load_surfaces(cfg: &ExperimentConfig, d: &Domain, out: &Path) -> Result<BTreeMap<usize, Arc<ThresholdSurface>>> {
    let mut m = BTreeMap::new();
    for b in budgets_of(cfg, d)? {
        let s = ThresholdSurface::load(&surface_path(out, d.id(), b))?;
        if s.horizon() != d.horizon() || s.budget() != b {
            return Err(Error::Artifact {
                path: surface_path(out, d.id(), b).display().to_string(),
                reason: format!("surface is for T = {}, B = {}", s.horizon(), s.budget()),
            });
        }
        if s.info.domain != d.id().name() {
            return Err(Error::Artifact {
                path: surface_path(out, d.id(), b).display().to_string(),
                reason: format!("surface was calibrated for `{}`", s.info.domain),
            });
        }
        m.insert(b, Arc::new(s));
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub cells: usize,
    pub failures: Vec<CellFailure>,
    pub files: Vec<PathBuf>,
}

fn jsonl_line<T: serde::Serialize>(w: &mut impl Write, v: &T, path: &Path) -> Result<()> {
    let line = serde_json::to_string(v).map_err(|e| Error::Metric(format!("serialize: {e}")))?;
    writeln!(w, "{line}").map_err(|e| Error::io(path, e))
}

/// Evaluates the grid against stored surfaces. Writes `cells.jsonl`,
/// `traces.jsonl`, `failures.jsonl` and `manifest.txt`. Failed cells are
/// listed, not fatal.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<RunOutcome> {
    let started = Instant::now();
    let surfaces = cfg
        .domains
        .iter()
        .map(|d| load_surfaces(cfg, d, out))
        .collect::<Result<Vec<_>>>()?;
    let cells_path = out.join("cells.jsonl");
    let traces_path = out.join("traces.jsonl");
    let failures_path = out.join("failures.jsonl");
    let open = |p: &Path| File::create(p).map(BufWriter::new).map_err(|e| Error::io(p, e));
    let (mut cw, mut tw, mut fw) = (open(&cells_path)?, open(&traces_path)?, open(&failures_path)?);
    let mut n = 0;
    let mut failures = Vec::new();
    grid::run_grid_with(
        &cfg.domains,
        &surfaces,
        &cfg.budgets,
        &cfg.evaluation_seeds.seeds(),
        cfg.eps,
        cfg.q,
        cfg.compact_traces,
        |o| {
            match o {
                CellOutcome::Done { metrics, traces } => {
                    n += 1;
                    jsonl_line(&mut cw, &metrics, &cells_path)?;
                    for t in &traces {
                        jsonl_line(&mut tw, t, &traces_path)?;
                    }
                }
                CellOutcome::Failed(f) => {
                    jsonl_line(&mut fw, &f, &failures_path)?;
                    failures.push(f);
                }
            }
            Ok(())
        },
    )?;
    for (w, p) in [(&mut cw, &cells_path), (&mut tw, &traces_path), (&mut fw, &failures_path)] {
        w.flush().map_err(|e| Error::io(p, e))?;
    }
    let files = vec![cells_path, traces_path, failures_path];
    let mut notes = vec![format!("cells {n}"), format!("failed_cells {}", failures.len())];
    notes.extend(failures.iter().map(|f| format!("failed {} seed {} fraction {}: {}", f.domain, f.seed, f.fraction, f.error)));
    let manifest = write_manifest(cfg, out, "run", started, &files, &notes)?;
    let mut all = files;
    all.push(manifest);
    Ok(RunOutcome {
        cells: n,
        failures,
        files: all,
    })
}

pub fn read_cells(path: &Path) -> Result<Vec<CellMetrics>> {
    let f = File::open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingArtifact(path.display().to_string())
        } else {
            Error::io(path, e)
        }
    })?;
    let mut cells = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        cells.push(serde_json::from_str(&line).map_err(|e| Error::Artifact {
            path: path.display().to_string(),
            reason: format!("line {}: {e}", i + 1),
        })?);
    }
    Ok(cells)
}

/// Builds every table and plot from `cells.jsonl` alone.
pub fn report(cfg: &ExperimentConfig, out: &Path) -> Result<(Report, Vec<PathBuf>)> {
    let cells = read_cells(&out.join("cells.jsonl"))?;
    let r = Report::build(&cells, cfg.summary_budget)?;
    let files = r.write(out)?;
    Ok((r, files))
}

/// pdm-lite study: calibrate, run, report, plus scenes and trajectory CSVs,
/// all under `out`.
pub fn pdm(cfg: &ExperimentConfig, out: &Path) -> Result<(RunOutcome, Vec<PathBuf>)> {
    let domain = cfg
        .domain(DomainId::PdmLite)
        .cloned()
        .unwrap_or_else(|| Domain::default_for(DomainId::PdmLite));
    let sub = ExperimentConfig {
        domains: vec![domain],
        ..cfg.clone()
    };
    create_dir(out)?;
    calibrate(&sub, out)?;
    let run_out = run(&sub, out)?;
    let (_, mut files) = report(&sub, out)?;
    files.extend(pdm_scenes(&sub, out)?);
    Ok((run_out, files))
}

/// Scene plot and trajectory CSV per scene seed at the summary budget.
pub fn pdm_scenes(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let d = &cfg.domains[0];
    let obstacles = d
        .spec
        .obstacles
        .as_ref()
        .ok_or_else(|| Error::Config("pdm-lite requires obstacles".into()))?;
    let b = budget_for(cfg.summary_budget, d.horizon())?;
    let surface = ThresholdSurface::load(&surface_path(out, d.id(), b))?;
    let surface = Arc::new(surface);
    let mut files = Vec::new();
    for &seed in &cfg.scene_seeds {
        let cell = run_paired_cell(d, cfg.summary_budget, seed, Some(surface.clone()))?;
        let waypoints = |s: &State| -> Result<Vec<[f64; 2]>> {
            match s {
                State::Trajectory(t) => Ok(t.waypoints().to_vec()),
                _ => Err(Error::StateMismatch("pdm-lite".into())),
            }
        };
        let term = cell.arm(ScheduleKind::Terminal);
        // worst intermediate state of the uncorrected sampler
        let peak = term
            .post_defects
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc })
            .0
            + 1;
        let mut rows: Vec<(String, usize, Vec<[f64; 2]>)> = vec![(
            "terminal".into(),
            peak,
            waypoints(&term.states()?[peak])?,
        )];
        for k in [ScheduleKind::Periodic, ScheduleKind::Adaptive] {
            let t = cell.arm(k);
            rows.push((k.to_string(), t.horizon, waypoints(&t.states()?[t.horizon])?));
        }
        let colors = ["#888888", "#1f77b4", "#d62728"];
        let paths: Vec<svg::ScenePath> = rows
            .iter()
            .zip(colors)
            .map(|((name, step, w), c)| svg::ScenePath {
                label: format!("{name} (step {step})"),
                color: c,
                dashed: name == "terminal",
                waypoints: w.clone(),
            })
            .collect();
        let rugs: Vec<svg::Rug> = [ScheduleKind::Periodic, ScheduleKind::Adaptive]
            .iter()
            .zip(&colors[1..])
            .map(|(&k, &c)| svg::Rug {
                label: k.to_string(),
                color: c,
                events: cell.arm(k).correction_events.clone(),
            })
            .collect();
        let title = format!("pdm-lite seed {seed}, B = {b} of T = {}", d.horizon());
        let p = out.join(format!("pdm_scene_{seed}.svg"));
        write_file(&p, &svg::scene(&title, obstacles, &paths, &rugs, d.horizon()))?;
        files.push(p);

        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Metric(format!("csv: {e}"));
        w.write_record(["schedule", "step", "waypoint", "u", "v"]).map_err(csv_err)?;
        for (name, step, pts) in &rows {
            for (i, x) in pts.iter().enumerate() {
                w.write_record([name.clone(), step.to_string(), i.to_string(), x[0].to_string(), x[1].to_string()])
                    .map_err(csv_err)?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Metric(format!("csv: {e}")))?;
        let p = out.join(format!("trajectory_{seed}.csv"));
        std::fs::write(&p, bytes).map_err(|e| Error::io(&p, e))?;
        files.push(p);
    }
    Ok(files)
}

fn file_digest(p: &Path) -> Result<String> {
    let bytes = std::fs::read(p).map_err(|e| Error::io(p, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Writes `manifest.txt`: config hash, code version, grid, wall time and a
/// digest of every listed output.
pub fn write_manifest(
    cfg: &ExperimentConfig,
    out: &Path,
    command: &str,
    started: Instant,
    files: &[PathBuf],
    notes: &[String],
) -> Result<PathBuf> {
    let mut m = String::new();
    let _ = writeln!(m, "corrsched {VERSION}");
    let _ = writeln!(m, "command {command}");
    let _ = writeln!(m, "config_sha256 {}", cfg.hash);
    let names: Vec<&str> = cfg.domains.iter().map(|d| d.id().name()).collect();
    let _ = writeln!(m, "domains {}", names.join(","));
    let horizons: Vec<String> = cfg.domains.iter().map(|d| d.horizon().to_string()).collect();
    let _ = writeln!(m, "horizons {}", horizons.join(","));
    let fr: Vec<String> = cfg.budgets.iter().map(|f| f.to_string()).collect();
    let _ = writeln!(m, "budget_fractions {}", fr.join(","));
    let (c, e) = (&cfg.calibration_seeds, &cfg.evaluation_seeds);
    let _ = writeln!(m, "calibration_seeds {}..{}", c.start, c.start + c.count);
    let _ = writeln!(m, "evaluation_seeds {}..{}", e.start, e.start + e.count);
    let _ = writeln!(m, "q {}", cfg.q);
    let _ = writeln!(m, "eps {}", cfg.eps);
    let _ = writeln!(m, "compact_traces {}", cfg.compact_traces);
    for n in notes {
        let _ = writeln!(m, "{n}");
    }
    let _ = writeln!(m, "wall_time_s {:.3}", started.elapsed().as_secs_f64());
    for f in files {
        let rel = f.strip_prefix(out).unwrap_or(f);
        let _ = writeln!(m, "sha256 {} {}", file_digest(f)?, rel.display());
    }
    let p = out.join("manifest.txt");
    write_file(&p, &m)?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn surface_paths_are_per_domain_and_budget() {
        let p = surface_path(Path::new("out"), DomainId::TerrainRidge, 50);
        assert_eq!(p, Path::new("out/surfaces/terrain-ridge_b50.txt"));
    }

    #[test]
    fn duplicate_budgets_collapse() {
        let mut cfg = ExperimentConfig::default_synthetic();
        cfg.budgets = vec![0.25, 0.0, 0.2501, 1.0];
        let d = &cfg.domains[0];
        assert_eq!(budgets_of(&cfg, d).unwrap(), vec![0, 50, 200]);
    }

    #[test]
    fn job_pool_width() {
        let n = with_jobs(Some(3), rayon::current_num_threads).unwrap();
        assert_eq!(n, 3);
        assert!(with_jobs(None, || 1).is_ok());
    }

    #[test]
    fn cell_records_reject_garbage() {
        let dir = std::env::temp_dir().join(format!("corrsched-cells-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("cells.jsonl");
        std::fs::write(&p, "\n{not json}\n").unwrap();
        assert!(matches!(read_cells(&p), Err(Error::Artifact { .. })));
        std::fs::remove_dir_all(&dir).unwrap();
        assert!(matches!(read_cells(&p), Err(Error::MissingArtifact(_))));
    }
}
