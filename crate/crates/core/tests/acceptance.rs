//! Acceptance run. Prints one PASS/FAIL line per criterion and exits nonzero
//! if any fails.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use corrsched::domain::{Domain, DomainId};
use corrsched::experiment::config::ExperimentConfig;
use corrsched::experiment::grid::{self, CellOutcome};
use corrsched::experiment::{self, Report};
use corrsched::geometry::{project_so3, State};
use corrsched::metrics::{cell_metrics, CellMetrics};
use corrsched::rollout::{noise_for, run_paired_cell, run_rollout, RolloutTrace};
use corrsched::schedule::{budget_for, Adaptive, ScheduleKind, SchedulePolicy, ScheduleRegistry, ScheduleContext, ThresholdSurface};
use nalgebra::{Matrix3, Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn secs(d: Duration) -> String {
    format!("{:.1}s", d.as_secs_f64())
}

// 1 -------------------------------------------------------------------------

fn projection_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mats: Vec<Matrix3<f64>> = (0..100)
        .map(|_| Matrix3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal)))
        .collect();
    let h = 0.05;
    let n = (std::f64::consts::PI / h).ceil() as i64 + 1;
    let mut best = vec![f64::NEG_INFINITY; mats.len()];
    for i in -n..=n {
        for j in -n..=n {
            for k in -n..=n {
                let w = Vector3::new(i as f64, j as f64, k as f64) * h;
                if w.norm() > std::f64::consts::PI + h {
                    continue;
                }
                let r = Rotation3::new(w).into_inner();
                for (b, m) in best.iter_mut().zip(&mats) {
                    let tr = m.component_mul(&r).sum();
                    if tr > *b {
                        *b = tr;
                    }
                }
            }
        }
    }
    // nearest grid point is within √3·h/2 in the exponential chart, and the
    // chart is 1-Lipschitz into the geodesic metric
    let bound = std::f64::consts::SQRT_2 * 3f64.sqrt() * h / 2.0;
    let mut worst_gap: f64 = 0.0;
    let mut beaten = 0;
    for (m, b) in mats.iter().zip(&best) {
        let p = match project_so3(m) {
            Ok(p) => p.into_inner(),
            Err(e) => return outcome(false, format!("projection failed: {e}")),
        };
        let f_proj = (m - p).norm();
        let f_grid = (m.norm_squared() + 3.0 - 2.0 * b).max(0.0).sqrt();
        if f_proj > f_grid + 1e-9 {
            beaten += 1;
        }
        worst_gap = worst_gap.max(f_grid - f_proj);
    }
    let t = start.elapsed();
    outcome(
        beaten == 0 && worst_gap <= bound && t < Duration::from_secs(30),
        format!(
            "100 matrices, grid beats projection on {beaten}; max gap {worst_gap:.4} <= bound {bound:.4}; {}",
            secs(t)
        ),
    )
}

// 2 -------------------------------------------------------------------------

fn same_path(a: &RolloutTrace, b: &RolloutTrace) -> bool {
    a.states == b.states
        && a.proposal_defects == b.proposal_defects
        && a.post_defects == b.post_defects
        && a.correction_events == b.correction_events
        && a.projection_calls == b.projection_calls
        && a.final_projection == b.final_projection
}

fn schedule_limits() -> Outcome {
    let start = Instant::now();
    let reg = ScheduleRegistry::default();
    let mut checked = 0;
    let mut mismatched = Vec::new();
    for id in [DomainId::So3Impulse, DomainId::Se3Lever, DomainId::TerrainRidge] {
        let d = Domain::default_for(id);
        let t = d.horizon();
        let ctx = |b| ScheduleContext {
            horizon: t,
            budget: b,
            surface: None,
        };
        let terminal = reg.create("terminal", &ctx(0)).unwrap();
        let stepwise = reg.create("stepwise", &ctx(0)).unwrap();
        let never = Adaptive::new(Arc::new(ThresholdSurface::filled(t, t / 4, f64::INFINITY)));
        let always = Adaptive::new(Arc::new(ThresholdSurface::filled(t, t, f64::NEG_INFINITY)));
        for seed in 0..20 {
            let noise = noise_for(&d, seed);
            let run = |p: &dyn SchedulePolicy| run_rollout(&d, p, &noise).unwrap();
            if !same_path(&run(&never), &run(terminal.as_ref())) {
                mismatched.push(format!("{id} seed {seed} (+inf)"));
            }
            if !same_path(&run(&always), &run(stepwise.as_ref())) {
                mismatched.push(format!("{id} seed {seed} (-inf)"));
            }
            checked += 2;
        }
    }
    let t = start.elapsed();
    outcome(
        mismatched.is_empty() && t < Duration::from_secs(60),
        format!("{checked} paired traces, {} mismatched {:?}; {}", mismatched.len(), mismatched, secs(t)),
    )
}

// 3 -------------------------------------------------------------------------

fn calibration_hand_example() -> Outcome {
    let s = match ThresholdSurface::calibrate(&[vec![1.0, 2.0, 3.0, 4.0]], 4, 1) {
        Ok(s) => s,
        Err(e) => return outcome(false, e.to_string()),
    };
    let inf = f64::INFINITY;
    let expected = [[inf, 3.0], [inf, 3.0], [inf, 3.0], [inf, f64::NEG_INFINITY]];
    let got: Vec<[f64; 2]> = (0..4).map(|t| [s.get(t, 0), s.get(t, 1)]).collect();
    outcome(got == expected, format!("lambda = {got:?}"))
}

// shared grids ---------------------------------------------------------------

fn calibrated(cfg: &ExperimentConfig) -> Vec<BTreeMap<usize, Arc<ThresholdSurface>>> {
    cfg.domains
        .iter()
        .map(|d| {
            let full = grid::calibrate_full(d, &cfg.calibration_seeds.seeds()).unwrap();
            grid::surfaces_for(&full, &cfg.budgets).unwrap()
        })
        .collect()
}

fn grid_cells(cfg: &ExperimentConfig) -> (Vec<CellMetrics>, usize) {
    let surfaces = calibrated(cfg);
    let out = grid::run_grid(
        &cfg.domains,
        &surfaces,
        &cfg.budgets,
        &cfg.evaluation_seeds.seeds(),
        cfg.eps,
        cfg.q,
        true,
    )
    .unwrap();
    let mut failed = 0;
    let mut cells = Vec::new();
    for o in out {
        match o {
            CellOutcome::Done { metrics, .. } => cells.push(metrics),
            CellOutcome::Failed(_) => failed += 1,
        }
    }
    (cells, failed)
}

const SMOKE: &str = r#"
domains = ["so3", "se3-lever", "terrain", "terrain-ridge", "pdm-lite"]
horizon = 60
budgets = [0.0, 0.25, 0.5, 1.0]
calibration_seeds = { start = 5000, count = 32 }
evaluation_seeds = { start = 0, count = 25 }
"#;

// 4 -------------------------------------------------------------------------

fn nepe_endpoints(cells: &[CellMetrics], failed: usize) -> Outcome {
    let mut bad = 0;
    let mut live = 0;
    for c in cells.iter().filter(|c| !c.degenerate) {
        live += 1;
        let s = c.arm(ScheduleKind::Stepwise).nepe;
        let t = c.arm(ScheduleKind::Terminal).nepe;
        let ok = matches!((s, t), (Some(s), Some(t)) if s.abs() <= 1e-12 && (t - 1.0).abs() <= 1e-12);
        bad += usize::from(!ok);
    }
    outcome(
        bad == 0 && failed == 0 && cells.len() + failed == 500,
        format!("{} cells ({live} non-degenerate, {failed} failed), {bad} off", cells.len()),
    )
}

// 5 -------------------------------------------------------------------------

fn budget_compliance(cells: &[CellMetrics]) -> Outcome {
    let mut bad = 0;
    let mut worst: f64 = f64::NEG_INFINITY;
    for c in cells {
        let t = c.horizon as f64;
        for k in [ScheduleKind::Periodic, ScheduleKind::Adaptive] {
            let a = c.arm(k);
            let events = (a.achieved_budget * t).round() as usize;
            let intermediate = a.projection_calls - usize::from(a.final_projection);
            let excess = a.achieved_budget - c.fraction;
            worst = worst.max(excess);
            if events > c.budget || intermediate > c.budget || excess > 1.0 / (2.0 * t) + 1e-12 {
                bad += 1;
            }
        }
    }
    outcome(
        bad == 0,
        format!("{} budgeted arms, {bad} over budget; max achieved - target = {worst:.4}", 2 * cells.len()),
    )
}

// 6 -------------------------------------------------------------------------

fn brute_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut d = Matrix3::identity();
    if (u * vt).determinant() < 0.0 {
        // singular values come sorted descending
        d[(2, 2)] = -1.0;
    }
    u * d * vt
}

fn brute_angle(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    2.0 * ((a - b).norm() / (2.0 * std::f64::consts::SQRT_2)).min(1.0).asin()
}

fn brute_defect(x: &State, d: &Domain) -> f64 {
    let rot_defect = |m: &Matrix3<f64>| (m.transpose() * m - Matrix3::identity()).norm() + (m.determinant() - 1.0).abs();
    match x {
        State::Matrix(m) => rot_defect(m),
        State::Pose(p) => {
            let trans = match &d.spec.lever {
                Some(arm) => {
                    let r = brute_rotation(&p.rot);
                    (Vector3::from(arm.anchor) + r.column(0) * arm.length - p.trans).norm()
                }
                None => 0.0,
            };
            rot_defect(&p.rot) + d.spec.alpha * trans
        }
        State::Terrain(p) => {
            let f = d.spec.field.as_ref().unwrap();
            (p.z - f.height(p.u, p.v)).abs()
        }
        State::Trajectory(t) => {
            let obs = d.spec.obstacles.as_ref().unwrap();
            let w = t.waypoints();
            let mut sq = 0.0;
            for p in &w[1..w.len() - 1] {
                let mut q = *p;
                for c in &obs.circles {
                    let r = (q[0] - c.center[0]).hypot(q[1] - c.center[1]);
                    if r < c.radius {
                        let s = c.radius * (1.0 + obs.margin) / r;
                        q = [c.center[0] + (q[0] - c.center[0]) * s, c.center[1] + (q[1] - c.center[1]) * s];
                    }
                }
                sq += (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2);
            }
            sq.sqrt()
        }
    }
}

fn brute_rho(a: &State, b: &State, d: &Domain) -> f64 {
    let snap = |x: &State| -> State {
        if brute_defect(x, d) <= 1e-9 {
            return x.clone();
        }
        corrsched::geometry::project(x, &d.spec).unwrap()
    };
    match (snap(a), snap(b)) {
        (State::Matrix(m1), State::Matrix(m2)) => brute_angle(&brute_rotation(&m1), &brute_rotation(&m2)),
        (State::Pose(p1), State::Pose(p2)) => {
            brute_angle(&brute_rotation(&p1.rot), &brute_rotation(&p2.rot)) + d.spec.alpha * (p1.trans - p2.trans).norm()
        }
        (State::Terrain(p1), State::Terrain(p2)) => {
            ((p1.u - p2.u).powi(2) + (p1.v - p2.v).powi(2) + (p1.z - p2.z).powi(2)).sqrt()
        }
        (State::Trajectory(t1), State::Trajectory(t2)) => t1
            .waypoints()
            .iter()
            .zip(t2.waypoints())
            .map(|(p, q)| (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2))
            .sum::<f64>()
            .sqrt(),
        _ => f64::NAN,
    }
}

fn brute_top_mass(s: &[f64], q: f64) -> Option<f64> {
    let total: f64 = s.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let k = (q * s.len() as f64).ceil() as usize;
    let mut best: f64 = 0.0;
    for mask in 0u32..(1 << s.len()) {
        if mask.count_ones() as usize == k {
            best = best.max((0..s.len()).filter(|i| mask >> i & 1 == 1).map(|i| s[i]).sum());
        }
    }
    Some(best / total)
}

const TINY: &str = r#"
domains = ["so3", "se3-lever", "terrain-ridge", "so3-impulse", "pdm-lite"]
horizon = 6
budgets = [0.5]
calibration_seeds = { start = 900, count = 16 }
evaluation_seeds = { start = 0, count = 10 }

[domain.pdm-lite.dynamics.pdm]
levels = 2
inner_steps = 3
"#;

fn metrics_oracle() -> Outcome {
    let cfg = ExperimentConfig::from_toml(TINY).unwrap();
    let surfaces = calibrated(&cfg);
    let tol = 1e-10;
    let mut worst: f64 = 0.0;
    let mut cells = 0;
    let mut problems = Vec::new();
    for (d, s) in cfg.domains.iter().zip(&surfaces) {
        assert_eq!(d.horizon(), 6);
        let b = budget_for(0.5, 6).unwrap();
        for seed in cfg.evaluation_seeds.seeds() {
            let mut cell = run_paired_cell(d, 0.5, seed, Some(s[&b].clone())).unwrap();
            let m = cell_metrics(&mut cell, &d.spec, cfg.eps, cfg.q).unwrap();
            cells += 1;
            let states = |k| cell.arm(k).states.clone().unwrap();
            let step_states = states(ScheduleKind::Stepwise);
            let e_path = |k| -> f64 { states(k)[1..].iter().map(|x| brute_defect(x, d)).sum() };
            let (e_step, e_term) = (e_path(ScheduleKind::Stepwise), e_path(ScheduleKind::Terminal));
            let mut diff = |name: &str, a: f64, b: f64| {
                let e = (a - b).abs();
                worst = worst.max(e);
                if !(e <= tol) {
                    problems.push(format!("{} seed {seed} {name}: {a} vs {b}", d.id()));
                }
            };
            for k in ScheduleKind::ALL {
                let a = m.arm(k);
                let xs = states(k);
                let e = e_path(k);
                diff("E_path", a.path, e);
                let e_state: f64 = xs[1..].iter().zip(&step_states[1..]).map(|(x, y)| brute_rho(x, y, d)).sum();
                diff("E_state", a.state, e_state);
                diff("E_end", a.endpoint, brute_rho(&xs[6], &step_states[6], d));
                let nepe = (e_term - e_step >= cfg.eps).then(|| (e - e_step) / (e_term - e_step));
                match (a.nepe, nepe) {
                    (Some(x), Some(y)) => diff("NEPE", x, y),
                    (None, None) => {}
                    _ => diff("NEPE degeneracy", 0.0, f64::INFINITY),
                }
                let events = cell.arm(k).correction_events.len();
                diff("achieved", a.achieved_budget, events as f64 / 6.0);
            }
            match (m.top_q_mass, brute_top_mass(&cell.arm(ScheduleKind::Terminal).proposal_defects, cfg.q)) {
                (Some(x), Some(y)) => diff("C_q", x, y),
                (None, None) => {}
                _ => diff("C_q presence", 0.0, f64::INFINITY),
            }
        }
    }
    outcome(
        problems.is_empty() && cells == 50,
        format!("{cells} cells at T = 6, max |diff| = {worst:.2e}; {} problems {:?}", problems.len(), problems.iter().take(3).collect::<Vec<_>>()),
    )
}

// 7, 8, 9, 11, 12 -------------------------------------------------------------

struct FullRun {
    cells: Vec<CellMetrics>,
    failures: usize,
    report: Report,
    summary: Vec<u8>,
    elapsed: Duration,
}

fn full_run(dir: &std::path::Path) -> FullRun {
    let start = Instant::now();
    let mut cfg = ExperimentConfig::default_synthetic();
    cfg.compact_traces = true;
    experiment::calibrate(&cfg, dir).unwrap();
    let run = experiment::run(&cfg, dir).unwrap();
    let (report, _) = experiment::report(&cfg, dir).unwrap();
    FullRun {
        cells: experiment::read_cells(&dir.join("cells.jsonl")).unwrap(),
        failures: run.failures.len(),
        report,
        summary: std::fs::read(dir.join("summary.csv")).unwrap(),
        elapsed: start.elapsed(),
    }
}

const PAIRS: [(DomainId, DomainId); 3] = [
    (DomainId::So3, DomainId::So3Impulse),
    (DomainId::Se3, DomainId::Se3Lever),
    (DomainId::Terrain, DomainId::TerrainRidge),
];

fn nepe_at(r: &Report, d: DomainId, k: ScheduleKind) -> f64 {
    r.row(d, 0.25).and_then(|row| row.arm(k).nepe).map_or(f64::NAN, |s| s.mean)
}

fn frontier_shape(run: &FullRun) -> Outcome {
    let mut ok = run.failures == 0;
    let mut parts = Vec::new();
    for d in DomainId::SYNTHETIC {
        let (p, a) = (nepe_at(&run.report, d, ScheduleKind::Periodic), nepe_at(&run.report, d, ScheduleKind::Adaptive));
        let n = run.report.row(d, 0.25).map_or(0, |r| r.n - r.n_degenerate);
        let concentrated = PAIRS.iter().any(|&(_, v)| v == d);
        let pass = a < p && (!concentrated || p - a >= 0.10) && n >= 50;
        ok &= pass;
        parts.push(format!("{d} {p:.3}->{a:.3} (gap {:.3}, n {n})", p - a));
    }
    ok &= run.elapsed < Duration::from_secs(600);
    outcome(ok, format!("B/T = 0.25: {}; grid {}", parts.join(", "), secs(run.elapsed)))
}

fn win_rates(run: &FullRun) -> Outcome {
    let mut ok = run.report.wins.len() == 6;
    let mut parts = Vec::new();
    for w in &run.report.wins {
        ok &= w.pathwise.rate >= 0.70;
        parts.push(format!("{} {:.3}±{:.3} (N {})", w.domain, w.pathwise.rate, w.pathwise.se, w.pathwise.n));
    }
    outcome(ok, format!("pathwise win over 0 < B < T: {}", parts.join(", ")))
}

fn concentration_split(run: &FullRun) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (base, var) in PAIRS {
        let c = |d| run.report.row(d, 0.25).and_then(|r| r.top_q_mass).map_or(f64::NAN, |s| s.mean);
        let gap = |d| nepe_at(&run.report, d, ScheduleKind::Periodic) - nepe_at(&run.report, d, ScheduleKind::Adaptive);
        let pass = c(var) > c(base) && gap(var) > gap(base);
        ok &= pass;
        parts.push(format!(
            "{base}/{var}: C0.2 {:.3}/{:.3}, gap {:.3}/{:.3}",
            c(base),
            c(var),
            gap(base),
            gap(var)
        ));
    }
    outcome(ok, parts.join("; "))
}

fn zero_full_budget(cells: &[CellMetrics], label: &str) -> Outcome {
    let mut bad = 0;
    let mut seen = 0;
    for c in cells.iter().filter(|c| c.budget == 0 || c.budget == c.horizon) {
        seen += 1;
        let want = if c.budget == 0 { 1.0 } else { 0.0 };
        for k in [ScheduleKind::Periodic, ScheduleKind::Adaptive] {
            if c.arm(k).nepe != Some(want) {
                bad += 1;
            }
        }
    }
    outcome(bad == 0 && seen > 0, format!("{label}: {seen} cells at B = 0 or B = T, {bad} arms off"))
}

// 10 ------------------------------------------------------------------------

fn pdm_lite() -> Outcome {
    let start = Instant::now();
    let cfg = ExperimentConfig::from_toml(
        r#"
domains = ["pdm-lite"]
budgets = [0.25]
"#,
    )
    .unwrap();
    let (cells, failed) = grid_cells(&cfg);
    let r = Report::build(&cells, 0.25).unwrap();
    let row = r.row(DomainId::PdmLite, 0.25).unwrap();
    let p = row.arm(ScheduleKind::Periodic).nepe.map_or(f64::NAN, |s| s.mean);
    let a = row.arm(ScheduleKind::Adaptive).nepe.map_or(f64::NAN, |s| s.mean);
    let benefit = row.benefit.unwrap_or(f64::NAN);
    let t = start.elapsed();
    outcome(
        failed == 0 && row.n - row.n_degenerate >= 50 && a < p && row.pathwise_win.rate >= 0.70 && benefit >= 0.60 && t < Duration::from_secs(300),
        format!(
            "n {}, NEPE periodic {p:.3} adaptive {a:.3}, win {:.3}±{:.3}, benefit {benefit:.3}; {}",
            row.n - row.n_degenerate,
            row.pathwise_win.rate,
            row.pathwise_win.se,
            secs(t)
        ),
    )
}

fn main() {
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut record = |id, name, o: Outcome| {
        println!("{} {id:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((id, name, o));
    };
    record(1, "projection oracle", projection_oracle());
    record(2, "schedule limits", schedule_limits());
    record(3, "threshold calibration", calibration_hand_example());

    let smoke = ExperimentConfig::from_toml(SMOKE).unwrap();
    let (smoke_cells, smoke_failed) = grid_cells(&smoke);
    record(4, "NEPE endpoints", nepe_endpoints(&smoke_cells, smoke_failed));

    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = full_run(a.path());
    let mut all = smoke_cells.clone();
    all.extend(first.cells.iter().cloned());
    record(5, "budget compliance", budget_compliance(&all));
    record(6, "metrics oracle", metrics_oracle());
    record(7, "frontier shape", frontier_shape(&first));
    record(8, "win rates", win_rates(&first));
    record(9, "concentration split", concentration_split(&first));
    record(10, "pdm-lite", pdm_lite());
    let z = zero_full_budget(&all, &format!("{} cells", all.len()));
    record(11, "zero/full budget", z);
    let second = full_run(b.path());
    record(
        12,
        "determinism",
        outcome(
            first.summary == second.summary && first.cells == second.cells && !first.summary.is_empty(),
            format!("summary.csv {} bytes, {} cell records identical across two default-grid runs", first.summary.len(), first.cells.len()),
        ),
    );

    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!("{} of {} criteria pass", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        eprintln!("failing criteria: {failed:?}");
        std::process::exit(1);
    }
}
