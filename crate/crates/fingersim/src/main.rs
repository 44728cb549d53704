//! Command-line driver: single runs, parameter sweeps, mesh-convergence
//! studies, and decay-rate fits on existing time-series CSVs.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fingersim::config::parse_config;
use fingersim::convergence::{run_convergence, ConvergenceSpec};
use fingersim::diagnostics::{fit_decay_rate, theoretical_decay_rate, DecayNorm};
use fingersim::error::{Result, SimError};
use fingersim::output::{write_snapshot, write_timeseries};
use fingersim::simulation::run_with;
use fingersim::sweep::{run_sweep, write_sweep_outputs, SweepSpec};
use fingersim::RunConfig;

#[derive(Parser)]
#[command(
    name = "fingersim",
    about = "Density/viscosity-contrast fingering in porous media with adsorption and reaction",
    long_about = "Simulates miscible displacement driven by density and viscosity contrast in a \
2D porous medium, with linear adsorption (retardation 1 + k) and a first-order reaction. \
Configs are TOML; an empty file selects the reference setup (100x200 domain, 96x192 cells, \
D = 0.005, step initial profile with a seeded interface perturbation). Thread count follows \
RAYON_NUM_THREADS."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single simulation and write its time series (and snapshots).
    Run(RunArgs),
    /// Run the Cartesian product of parameter axes over a base config.
    Sweep(SweepArgs),
    /// Mesh-refinement study against a finer reference grid.
    Converge(ConvergeArgs),
    /// Fit an exponential decay rate to a column of a time-series CSV.
    Fitdecay(FitArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration file.
    config: PathBuf,
    /// Override the perturbation seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// TOML configuration file used as the base of every case.
    config: PathBuf,
    /// Axis as name=v1,v2,... (repeatable; names: alpha, r, k, kappa, d,
    /// permeability).
    #[arg(long = "axis", required = true)]
    axes: Vec<String>,
    /// Maximum concurrent runs (0 = one per thread).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConvergeArgs {
    /// TOML configuration file shared by every mesh.
    config: PathBuf,
    /// Coarse-to-fine ladder as NXxNY pairs, e.g. 24x48,32x64,48x96.
    #[arg(long, value_delimiter = ',', required = true)]
    meshes: Vec<String>,
    /// Reference mesh as NXxNY, strictly finer than the ladder.
    #[arg(long)]
    reference: String,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct FitArgs {
    /// Time-series CSV produced by `run` or `sweep`.
    csv: PathBuf,
    /// Column to fit (energy, mean, variance, l1, l2, linf).
    #[arg(long, default_value = "l2")]
    column: String,
    /// Fit window as t1:t2; defaults to the last half of the samples.
    #[arg(long)]
    window: Option<String>,
    /// Norm convention for the reported theoretical rate; `l2_squared`
    /// squares the column before fitting.
    #[arg(long, default_value = "lp")]
    norm: String,
    /// Reaction rate kappa for the theoretical comparison.
    #[arg(long)]
    kappa: Option<f64>,
    /// Adsorption coefficient k for the theoretical comparison.
    #[arg(long, default_value_t = 0.0)]
    adsorption: f64,
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| SimError::io(path.display().to_string(), e))?;
    let mut cfg = parse_config(&text)?;
    if let Some(seed) = seed {
        cfg.initial.seed = seed;
    }
    Ok(cfg)
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let mut cfg = load_config(&args.config, args.seed)?;
    if let Some(out) = &args.out {
        cfg.output.dir = out.display().to_string();
    }
    let dir = PathBuf::from(&cfg.output.dir);
    std::fs::create_dir_all(&dir).map_err(|e| SimError::io(dir.display().to_string(), e))?;

    let snap_every = cfg.output.snapshot_interval;
    let gzip = cfg.output.gzip_snapshots;
    let snap_dir = dir.clone();
    let mut next_snap = 0.0_f64;
    let (state, series) = run_with(&cfg, |state| {
        if snap_every > 0.0 && state.t >= next_snap - 1e-12 {
            let ext = if gzip { "txt.gz" } else { "txt" };
            let path = snap_dir.join(format!("c_t{:.6}.{ext}", state.t));
            write_snapshot(&state.c, state.t, &path, gzip)?;
            next_snap = state.t + snap_every;
        }
        Ok(())
    })?;

    let ts_path = dir.join(&cfg.output.timeseries);
    write_timeseries(&series, &ts_path)?;
    println!(
        "run complete: t = {}, steps = {}, samples = {}, worst div ratio = {:.3}",
        state.t,
        state.stats.steps,
        series.len(),
        state.stats.worst_div_ratio
    );
    println!("time series written to {}", ts_path.display());
    Ok(())
}

fn parse_axis(s: &str) -> Result<(String, Vec<f64>)> {
    let bad = || SimError::Parse(format!("axis `{s}` must look like name=v1,v2,..."));
    let (name, values) = s.split_once('=').ok_or_else(bad)?;
    let values: Vec<f64> = values
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| bad())?;
    if name.is_empty() || values.is_empty() {
        return Err(bad());
    }
    Ok((name.to_string(), values))
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let mut base = load_config(&args.config, args.seed)?;
    if let Some(out) = &args.out {
        base.output.dir = out.display().to_string();
    }
    let axes = args
        .axes
        .iter()
        .map(|s| parse_axis(s))
        .collect::<Result<Vec<_>>>()?;
    let spec = SweepSpec {
        base: base.clone(),
        axes,
        jobs: args.jobs,
    };
    println!("sweep: {} cases", spec.len());
    let results = run_sweep(&spec)?;
    let dir = PathBuf::from(&base.output.dir);
    let paths = write_sweep_outputs(&results, &dir)?;
    println!("sweep complete: {} runs, {} files under {}", results.len(), paths.len(), dir.display());
    Ok(())
}

fn parse_mesh(s: &str) -> Result<(usize, usize)> {
    let bad = || SimError::Parse(format!("mesh `{s}` must look like NXxNY, e.g. 32x64"));
    let (nx, ny) = s.split_once('x').ok_or_else(bad)?;
    Ok((
        nx.trim().parse().map_err(|_| bad())?,
        ny.trim().parse().map_err(|_| bad())?,
    ))
}

fn cmd_converge(args: &ConvergeArgs) -> Result<()> {
    let base = load_config(&args.config, args.seed)?;
    let ladder = args
        .meshes
        .iter()
        .map(|s| parse_mesh(s))
        .collect::<Result<Vec<_>>>()?;
    let spec = ConvergenceSpec {
        base,
        ladder,
        reference: parse_mesh(&args.reference)?,
    };
    let table = run_convergence(&spec)?;
    println!("mesh,energy_l2,energy_linf,variance_l2,variance_linf");
    for r in &table.rows {
        println!(
            "{}x{},{:.6e},{:.6e},{:.6e},{:.6e}",
            r.nx, r.ny, r.energy_l2, r.energy_linf, r.variance_l2, r.variance_linf
        );
    }
    if table.monotone {
        println!("errors decrease monotonically coarse-to-fine");
        Ok(())
    } else {
        Err(SimError::InvalidConfig(vec![
            "convergence errors are not monotone coarse-to-fine".into(),
        ]))
    }
}

fn read_csv_column(path: &Path, column: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| SimError::io(path.display().to_string(), e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| SimError::Parse("empty CSV".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    let t_idx = cols
        .iter()
        .position(|&c| c == "t")
        .ok_or_else(|| SimError::Parse("CSV has no `t` column".into()))?;
    let v_idx = cols
        .iter()
        .position(|&c| c == column)
        .ok_or_else(|| SimError::Parse(format!("CSV has no `{column}` column")))?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let parse = |i: usize| -> Result<f64> {
            fields
                .get(i)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| {
                    SimError::Parse(format!("row {}: bad value in column {i}", lineno + 2))
                })
        };
        times.push(parse(t_idx)?);
        values.push(parse(v_idx)?);
    }
    Ok((times, values))
}

fn cmd_fitdecay(args: &FitArgs) -> Result<()> {
    let (times, mut values) = read_csv_column(&args.csv, &args.column)?;
    let norm = match args.norm.to_lowercase().as_str() {
        "l1" => DecayNorm::L1,
        "lp" => DecayNorm::Lp,
        "l2_squared" => DecayNorm::L2Squared,
        other => {
            return Err(SimError::Parse(format!(
                "unknown norm `{other}` (expected l1, lp, l2_squared)"
            )))
        }
    };
    if norm == DecayNorm::L2Squared {
        values.iter_mut().for_each(|v| *v *= *v);
    }
    let window = match &args.window {
        Some(w) => {
            let bad = || SimError::Parse(format!("window `{w}` must look like t1:t2"));
            let (a, b) = w.split_once(':').ok_or_else(bad)?;
            (
                a.trim().parse().map_err(|_| bad())?,
                b.trim().parse().map_err(|_| bad())?,
            )
        }
        None => fingersim::diagnostics::late_time_window(&times)
            .ok_or_else(|| SimError::DecayFit("series too short for a default window".into()))?,
    };
    let fit = fit_decay_rate(&times, &values, window)?;
    println!(
        "fitted rate = {:.6e} (window {}..{}, log-RMS residual {:.3e})",
        fit.rate, fit.window.0, fit.window.1, fit.residual
    );
    if let Some(kappa) = args.kappa {
        let params = fingersim::PhysicalParams {
            reaction_rate: kappa,
            adsorption: args.adsorption,
            ..Default::default()
        };
        let theory = theoretical_decay_rate(&params, norm);
        println!(
            "theoretical rate = {:.6e}, relative deviation = {:.3e}",
            theory,
            (fit.rate - theory).abs() / theory.max(f64::MIN_POSITIVE)
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Converge(args) => cmd_converge(args),
        Command::Fitdecay(args) => cmd_fitdecay(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
