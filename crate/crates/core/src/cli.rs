//! Batch command line: `run`, `convergence` and `validate` on a JSON config.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::{load_config, write_csv, write_frame, write_json, CsvWriter, FrameFile};
use crate::sim::convergence::{convergence_study, ConvergenceStudy};
use crate::sim::{DiagnosticsRow, SceneConfig, Simulation};

/// Environment variable read when `--threads` is absent.
pub const THREADS_ENV: &str = "BSLQB_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "bslqb",
    version,
    about = "Collocated B-spline incompressible flow solver"
)]
struct Cli {
    /// Worker threads (falls back to BSLQB_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the config's random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the config's output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a scene, writing frames and diagnostics.csv.
    Run { config: PathBuf },
    /// Run the refinement study, writing errors.csv.
    Convergence { config: PathBuf },
    /// Parse and validate a config, printing OK.
    Validate { config: PathBuf },
}

/// Summary of a `run`, also written as `summary.json`.
#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub scene: String,
    pub steps: usize,
    pub time: f64,
    pub frames: usize,
    pub max_divergence: f64,
    pub mean_newton_iters: f64,
    pub max_fallback_fraction: f64,
    pub final_kinetic_energy: f64,
}

/// Runs the command line and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// `--threads`, else `BSLQB_THREADS`, else `None` for the rayon default.
pub fn thread_count(flag: Option<usize>, env: Option<&str>) -> Result<Option<usize>> {
    if let Some(n) = flag {
        return positive_threads(n).map(Some);
    }
    match env {
        None => Ok(None),
        Some(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| {
                Error::Validation(format!(
                    "{THREADS_ENV} must be a positive integer, got '{v}'"
                ))
            })
            .and_then(positive_threads)
            .map(Some),
    }
}

fn positive_threads(n: usize) -> Result<usize> {
    if n == 0 {
        return Err(Error::Validation("thread count must be positive".into()));
    }
    Ok(n)
}

fn execute(cli: Cli) -> Result<()> {
    let env = std::env::var(THREADS_ENV).ok();
    if let Some(n) = thread_count(cli.threads, env.as_deref())? {
        // a second initialisation in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let load = |path: &Path| -> Result<SceneConfig> {
        let mut cfg = load_config(path)?;
        if let Some(seed) = cli.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &cli.out {
            cfg.output.dir = out.clone();
        }
        Ok(cfg)
    };
    match &cli.command {
        Command::Validate { config } => {
            load(config)?;
            println!("OK");
        }
        Command::Run { config } => {
            let cfg = load(config)?;
            let s = run_scene(&cfg, &cfg.output.dir)?;
            println!(
                "{}: {} steps to t = {:.6}, {} frames, max divergence {:.3e}, mean Newton iterations {:.3}",
                s.scene, s.steps, s.time, s.frames, s.max_divergence, s.mean_newton_iters
            );
        }
        Command::Convergence { config } => {
            let cfg = load(config)?;
            let study = run_convergence(&cfg, &cfg.output.dir)?;
            println!(
                "slopes: explicit SL {:.4}, BSLQB lambda=1 {:.4}, BSLQB lambda=1-{}dx {:.4}",
                study.slope_sl,
                study.slope_bslqb_l1,
                cfg.convergence.lambda_c,
                study.slope_bslqb_lc
            );
        }
    }
    Ok(())
}

fn frame_path(out: &Path, field: &str, frame: usize) -> PathBuf {
    out.join(format!("{field}_{frame:05}.bin"))
}

/// Simulates `cfg`, writing `diagnostics.csv`, frames and `summary.json`
/// under `out`. Frames are written at step 0 and every `frame_every` steps;
/// with `frame_every = 0` only the final state is dumped.
pub fn run_scene(cfg: &SceneConfig, out: &Path) -> Result<RunSummary> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut sim = Simulation::new(cfg.clone())?;
    let csv_path = out.join("diagnostics.csv");
    let mut csv = CsvWriter::create::<DiagnosticsRow>(&csv_path)?;
    let mut frames = 0;
    let dump = |sim: &Simulation, frames: &mut usize| -> Result<()> {
        for field in &cfg.output.fields {
            if let Some(f) = FrameFile::from_state(&sim.state, field) {
                write_frame(&f, frame_path(out, field, *frames))?;
            }
        }
        *frames += 1;
        Ok(())
    };
    let every = cfg.output.frame_every;
    if every > 0 {
        dump(&sim, &mut frames)?;
    }
    let rows = sim.run(|sim, row| {
        csv.write(row).map_err(|e| Error::io(&csv_path, e))?;
        if every > 0 && row.step % every == 0 {
            csv.flush().map_err(|e| Error::io(&csv_path, e))?;
            dump(sim, &mut frames)?;
        }
        Ok(())
    })?;
    csv.flush().map_err(|e| Error::io(&csv_path, e))?;
    if every == 0 || rows.last().is_some_and(|r| r.step % every != 0) {
        dump(&sim, &mut frames)?;
    }
    let n = rows.len().max(1) as f64;
    let summary = RunSummary {
        scene: cfg.scene.clone(),
        steps: rows.len(),
        time: sim.state.time,
        frames,
        max_divergence: rows.iter().map(|r| r.divergence).fold(0.0, f64::max),
        mean_newton_iters: rows.iter().map(|r| r.newton_mean_iters).sum::<f64>() / n,
        max_fallback_fraction: rows
            .iter()
            .map(|r| r.newton_fallback_fraction)
            .fold(0.0, f64::max),
        final_kinetic_energy: rows.last().map_or(0.0, |r| r.kinetic_energy),
    };
    write_json(out.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Runs the refinement study of `cfg` and writes `errors.csv` under `out`.
pub fn run_convergence(cfg: &SceneConfig, out: &Path) -> Result<ConvergenceStudy> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let study = convergence_study(
        &cfg.convergence.levels,
        cfg.end_time,
        cfg.convergence.lambda_c,
        &cfg.advection_params(),
    )?;
    write_csv(out.join("errors.csv"), &study.rows)?;
    Ok(study)
}
