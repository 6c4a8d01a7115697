//! `sqgo`: run, study and inspect SQG simulations outside a moving disk.
//!
//! Exit codes: 0 success, 2 invalid input, 3 blow-up suspected, 1 anything
//! else (including a failed validation check).

use clap::{Parser, Subcommand};
use sqgo_core::checkpoint::{Checkpoint, CheckpointError};
use sqgo_core::config::{load_config, ConfigError, OutputSection};
use sqgo_core::diagnostics::{lp_triplet, plateau_radius, Verdict};
use sqgo_core::field::{read_snapshot, sobolev_norms, write_snapshot, write_snapshot_csv, ScalarField, SnapshotError};
use sqgo_core::green::oracle::{brute_force_green_oracle, compare_with_closed_form};
use sqgo_core::green::ObstacleGeometry;
use sqgo_core::scheme::{
    default_perturbation, delta_continuation_study, stability_study, RunOutput, SchemeError, SimConfig, Simulation,
};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;
use thiserror::Error;

#[derive(Parser, Debug)]
#[command(name = "sqgo", version, about = "Critical SQG transport outside a moving rigid disk")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one simulation.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `[output] dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Steps between stored fields; overrides `[output] snapshot_every`.
        #[arg(long)]
        snapshot_every: Option<usize>,
        /// Continue from a checkpoint written by an earlier run.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Compare the exterior Green function with a lattice oracle.
    GreensValidate {
        /// Lattice nodes per side.
        #[arg(long, default_value_t = 64)]
        n: usize,
        /// Minimum pair distance in lattice spacings.
        #[arg(long, default_value_t = 4.0)]
        min_cells: f64,
        #[arg(long, default_value_t = 24)]
        sources: usize,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        /// Largest accepted relative error.
        #[arg(long, default_value_t = 0.05)]
        tolerance: f64,
    },
    /// End-state distances across regularization radii.
    DeltaStudy {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.4, 0.2, 0.1])]
        deltas: Vec<f64>,
    },
    /// Growth of perturbations of the configured datum.
    StabilityStudy {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_values_t = [1e-3, 5e-4])]
        epsilon: Vec<f64>,
    },
    /// Diagnostics of a stored field.
    Diagnose {
        /// Binary field written by `simulate`.
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        grad_threshold: f64,
    },
}

#[derive(Debug, Error)]
enum AppError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error("{}: {1}", .0.display())]
    Io(PathBuf, std::io::Error),
    #[error("{0}")]
    Check(String),
}

impl AppError {
    fn exit_code(&self) -> u8 {
        match self {
            AppError::Config(_) => 2,
            AppError::Scheme(SchemeError::Config(_)) => 2,
            AppError::Checkpoint(CheckpointError::ConfigMismatch(_) | CheckpointError::Version { .. }) => 2,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> AppError + '_ {
    move |e| AppError::Io(path.to_path_buf(), e)
}

fn create(path: &Path) -> Result<BufWriter<File>, AppError> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn write_field(dir: &Path, name: &str, f: &ScalarField, csv: bool) -> Result<(), AppError> {
    let bin = dir.join(format!("{name}.bin"));
    let mut w = create(&bin)?;
    write_snapshot(&mut w, f)?;
    w.flush().map_err(io_err(&bin))?;
    if csv {
        let path = dir.join(format!("{name}.csv"));
        let mut w = create(&path)?;
        write_snapshot_csv(&mut w, f)?;
        w.flush().map_err(io_err(&path))?;
    }
    Ok(())
}

fn prepare_dir(dir: &Path) -> Result<(), AppError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

fn write_run(dir: &Path, cfg: &SimConfig, output: &OutputSection, out: &RunOutput) -> Result<(), AppError> {
    prepare_dir(dir)?;
    let echo = sqgo_core::config::ConfigFile::from_sim(cfg, output).to_toml();
    let cfg_path = dir.join("config.toml");
    std::fs::write(&cfg_path, echo).map_err(io_err(&cfg_path))?;
    let csv = dir.join("diagnostics.csv");
    let mut w = create(&csv)?;
    out.state.diagnostics.write_csv(&mut w).map_err(io_err(&csv))?;
    w.flush().map_err(io_err(&csv))?;
    let fields = dir.join("fields");
    prepare_dir(&fields)?;
    for f in &out.trajectory {
        let step = (f.time() / cfg.dt).round() as usize;
        write_field(&fields, &format!("omega_{step:07}"), f, output.csv_snapshots)?;
    }
    Checkpoint::capture(&out.state, cfg, output).save(&dir.join("checkpoint.json"))?;
    Ok(())
}

fn summary(out: &RunOutput, wall: f64) -> String {
    let last = out.state.diagnostics.last().expect("initial record");
    let max_iters = out.state.picard_history.iter().map(|r| r.iterations).max().unwrap_or(0);
    let status = match out.verdict {
        Verdict::Continue => "ok",
        Verdict::BlowupSuspected => "BLOWUP_SUSPECTED",
    };
    format!(
        "status={status} steps={} t={:.6} R={:.6e} osgood={:.6e} L2={:.6e} H2_integral={:.6e} max_picard={max_iters} wall_s={wall:.1}",
        out.state.step, out.state.t, last.plateau_radius, last.osgood_bound, last.l2, last.blowup_integral
    )
}

fn simulate(
    config: &Path,
    out: Option<PathBuf>,
    snapshot_every: Option<usize>,
    resume: Option<PathBuf>,
) -> Result<ExitCode, AppError> {
    let (mut cfg, mut output) = load_config(config)?;
    if let Some(n) = snapshot_every {
        cfg.snapshot_every = n;
        output.snapshot_every = n;
    }
    if let Some(dir) = out {
        output.dir = dir;
    }
    let start = Instant::now();
    let sim = Simulation::new(cfg.clone())?;
    let state = match resume {
        Some(path) => Checkpoint::load(&path)?.restore(&cfg)?,
        None => sim.initial_state()?,
    };
    let result = run_with_checkpoints(&sim, state, &output)?;
    for w in &result.warnings {
        log::warn!("{w}");
    }
    write_run(&output.dir, &cfg, &output, &result)?;
    println!("{}", summary(&result, start.elapsed().as_secs_f64()));
    Ok(match result.verdict {
        Verdict::Continue => ExitCode::SUCCESS,
        Verdict::BlowupSuspected => ExitCode::from(3),
    })
}

/// Runs to the end, writing intermediate checkpoints at the configured
/// cadence.
fn run_with_checkpoints(
    sim: &Simulation,
    mut state: sqgo_core::scheme::SimState,
    output: &OutputSection,
) -> Result<RunOutput, AppError> {
    let every = output.checkpoint_every;
    if every == 0 {
        return Ok(sim.run_from(state)?);
    }
    prepare_dir(&output.dir)?;
    let path = output.dir.join("checkpoint.json");
    let mut trajectory = vec![state.omega.clone()];
    let n = sim.config().step_count();
    let mut verdict = Verdict::Continue;
    while state.step < n && verdict == Verdict::Continue {
        verdict = sim.advance(&mut state)?;
        let snap = sim.config().snapshot_every;
        if (snap > 0 && state.step % snap == 0) || state.step == n || verdict != Verdict::Continue {
            trajectory.push(state.omega.clone());
        }
        if state.step % every == 0 {
            Checkpoint::capture(&state, sim.config(), output).save(&path)?;
        }
    }
    let warnings = sim.assembler().operator().resolution_warning().map(str::to_string).into_iter().collect();
    Ok(RunOutput { state, trajectory, verdict, warnings })
}

fn greens_validate(n: usize, min_cells: f64, sources: usize, radius: f64, tolerance: f64) -> Result<ExitCode, AppError> {
    let geom = ObstacleGeometry::new(radius).map_err(|e| AppError::Check(e.to_string()))?;
    let start = Instant::now();
    let oracle = brute_force_green_oracle(n, geom).map_err(|e| AppError::Check(e.to_string()))?;
    let rep = compare_with_closed_form(&oracle, sources, min_cells).map_err(|e| AppError::Check(e.to_string()))?;
    let ok = rep.max_relative <= tolerance;
    println!(
        "status={} pairs={} max_relative={:.4e} mean_relative={:.4e} symmetry={:.3e} wall_s={:.1}",
        if ok { "ok" } else { "FAILED" },
        rep.pairs,
        rep.max_relative,
        rep.mean_relative,
        rep.symmetry,
        start.elapsed().as_secs_f64()
    );
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn delta_study(config: &Path, out: Option<PathBuf>, deltas: &[f64]) -> Result<ExitCode, AppError> {
    let (cfg, output) = load_config(config)?;
    let dir = out.unwrap_or(output.dir);
    let table = delta_continuation_study(&cfg, deltas)?;
    prepare_dir(&dir)?;
    let path = dir.join("delta_study.csv");
    let mut w = create(&path)?;
    let body = (|| -> std::io::Result<()> {
        writeln!(w, "delta_a,delta_b,l2_distance,h1_distance")?;
        for (a, b, l2, h1) in &table.distances {
            writeln!(w, "{a:.16e},{b:.16e},{l2:.16e},{h1:.16e}")?;
        }
        w.flush()
    })();
    body.map_err(io_err(&path))?;
    println!("status={} pairs={} decreasing={}", if table.cauchy { "ok" } else { "NOT_DECREASING" }, table.distances.len(), table.cauchy);
    Ok(ExitCode::SUCCESS)
}

fn stab_study(config: &Path, out: Option<PathBuf>, eps: &[f64]) -> Result<ExitCode, AppError> {
    let (mut cfg, output) = load_config(config)?;
    if cfg.snapshot_every == 0 {
        cfg.snapshot_every = (cfg.step_count() / 20).max(1);
    }
    let dir = out.unwrap_or(output.dir);
    let study = stability_study(&cfg, &default_perturbation(&cfg), eps, None)?;
    prepare_dir(&dir)?;
    let path = dir.join("stability_study.csv");
    let mut w = create(&path)?;
    let body = (|| -> std::io::Result<()> {
        writeln!(w, "epsilon,t,distance")?;
        for (e, r) in study.epsilons.iter().zip(&study.reports) {
            for (t, d) in r.times.iter().zip(&r.distances) {
                writeln!(w, "{e:.16e},{t:.16e},{d:.16e}")?;
            }
        }
        w.flush()
    })();
    body.map_err(io_err(&path))?;
    let rates: Vec<String> = study.reports.iter().map(|r| format!("{:.4e}", r.growth_rate)).collect();
    println!("status=ok runs={} growth_rates={}", study.reports.len(), rates.join(","));
    Ok(ExitCode::SUCCESS)
}

fn diagnose(snapshot: &Path, threshold: f64) -> Result<ExitCode, AppError> {
    let f = read_snapshot(File::open(snapshot).map_err(io_err(snapshot))?)?;
    let geom = ObstacleGeometry::new(f.grid().r_min()).map_err(|e| AppError::Check(e.to_string()))?;
    let (l1, l2, linf) = lp_triplet(&f);
    let h = sobolev_norms(&f, 4);
    println!(
        "t={:.6} R={:.6e} L1={l1:.6e} L2={l2:.6e} Linf={linf:.6e} H1={:.6e} H2={:.6e} H3={:.6e} H4={:.6e}",
        f.time(),
        plateau_radius(&f, &geom, threshold),
        h[1],
        h[2],
        h[3],
        h[4]
    );
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Some(n) = std::env::var("SQGO_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config, out, snapshot_every, resume } => simulate(&config, out, snapshot_every, resume),
        Command::GreensValidate { n, min_cells, sources, radius, tolerance } => {
            greens_validate(n, min_cells, sources, radius, tolerance)
        }
        Command::DeltaStudy { config, out, deltas } => delta_study(&config, out, &deltas),
        Command::StabilityStudy { config, out, epsilon } => stab_study(&config, out, &epsilon),
        Command::Diagnose { snapshot, grad_threshold } => diagnose(&snapshot, grad_threshold),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
