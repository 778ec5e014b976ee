use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use corrsched::experiment::{self, selftest, ExperimentConfig};
use corrsched::Error;

/// Budgeted correction scheduling experiments.
#[derive(Parser)]
#[command(name = "corrsched", version)]
struct Cli {
    /// TOML experiment config; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Drop per-step states from trace records.
    #[arg(long, global = true)]
    compact_traces: bool,
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Calibrate threshold surfaces for every configured domain.
    Calibrate,
    /// Evaluate all schedules on the grid using stored surfaces.
    Run,
    /// Rebuild tables and plots from cells.jsonl.
    Report,
    /// Calibrate, run and report the pdm-lite sampler into <out>/pdm.
    Pdm,
    /// Quick consistency checks on a reduced grid.
    Selftest,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::UnknownDomain(_) | Error::UnknownSchedule(_) => 2,
        Error::MissingArtifact(_) | Error::Artifact { .. } => 3,
        Error::NonFinite { .. } | Error::NonFiniteStep { .. } => 4,
        _ => 1,
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default_synthetic(),
    };
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if cli.jobs.is_some() {
        cfg.jobs = cli.jobs;
    }
    if cfg.jobs == Some(0) {
        return Err(Error::Config("--jobs must be positive".into()));
    }
    cfg.compact_traces |= cli.compact_traces;
    Ok(cfg)
}

fn report_failures(run: &experiment::RunOutcome) -> u8 {
    if run.failures.is_empty() {
        return 0;
    }
    eprintln!("{} cell(s) failed:", run.failures.len());
    for f in &run.failures {
        eprintln!("  {} seed {} fraction {}: {}", f.domain, f.seed, f.fraction, f.error);
    }
    4
}

fn execute(cli: &Cli) -> Result<u8, Error> {
    if let Verb::Selftest = cli.verb {
        let checks = experiment::with_jobs(cli.jobs, selftest::run)??;
        let mut failed = 0;
        for c in &checks {
            println!("{} {} ({})", if c.ok { "ok  " } else { "FAIL" }, c.name, c.detail);
            failed += usize::from(!c.ok);
        }
        return Ok(if failed == 0 { 0 } else { 1 });
    }
    let cfg = load(cli)?;
    let out = cfg.out.clone();
    experiment::with_jobs(cfg.jobs, || -> Result<u8, Error> {
        match cli.verb {
            Verb::Calibrate => {
                let files = experiment::calibrate(&cfg, &out)?;
                println!("wrote {} surface artifacts under {}", files.len(), out.join("surfaces").display());
                Ok(0)
            }
            Verb::Run => {
                let run = experiment::run(&cfg, &out)?;
                println!("{} cells written to {}", run.cells, out.join("cells.jsonl").display());
                Ok(report_failures(&run))
            }
            Verb::Report => {
                let (r, files) = experiment::report(&cfg, &out)?;
                for w in &r.warnings {
                    eprintln!("warning: {w}");
                }
                println!("wrote {} report files to {}", files.len(), out.display());
                Ok(0)
            }
            Verb::Pdm => {
                let dir = out.join("pdm");
                let (run, files) = experiment::pdm(&cfg, &dir)?;
                println!("pdm-lite: {} cells, {} report files in {}", run.cells, files.len(), dir.display());
                Ok(report_failures(&run))
            }
            Verb::Selftest => unreachable!(),
        }
    })?
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
