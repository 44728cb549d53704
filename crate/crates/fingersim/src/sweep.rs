//! Parameter sweeps: Cartesian products of named parameter axes, executed in
//! a bounded worker pool, with path-namespaced per-run outputs and a single
//! aggregate summary.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::diagnostics::TimeSeries;
use crate::error::{Result, SimError};
use crate::output::write_timeseries;
use crate::simulation::{run, RunStats};

/// Parameter names accepted as sweep axes.
pub const AXIS_NAMES: &[&str] = &["alpha", "r", "k", "kappa", "d", "permeability"];

fn apply_axis(cfg: &mut RunConfig, name: &str, value: f64) -> Result<()> {
    match name {
        "alpha" => cfg.params.density_contrast = value,
        "r" => cfg.params.viscosity_contrast = value,
        "k" => cfg.params.adsorption = value,
        "kappa" => cfg.params.reaction_rate = value,
        "d" => cfg.params.diffusion = value,
        "permeability" => cfg.params.permeability = value,
        other => {
            return Err(SimError::InvalidConfig(vec![format!(
                "sweep: unknown axis `{other}` (expected one of {})",
                AXIS_NAMES.join(", ")
            )]))
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSpec {
    pub base: RunConfig,
    /// Named axes, e.g. ("alpha", [1, 2, 3, 4]); the sweep runs their
    /// Cartesian product.
    pub axes: Vec<(String, Vec<f64>)>,
    /// Maximum concurrent runs; 0 means one per available thread.
    pub jobs: usize,
}

impl SweepSpec {
    pub fn validation_errors(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.axes.is_empty() {
            errs.push("sweep: at least one axis is required".into());
        }
        for (name, values) in &self.axes {
            if !AXIS_NAMES.contains(&name.as_str()) {
                errs.push(format!("sweep: unknown axis `{name}`"));
            }
            if values.is_empty() {
                errs.push(format!("sweep: axis `{name}` has no values"));
            }
        }
        errs
    }

    /// All axis assignments, in row-major order of the axis lists.
    pub fn cases(&self) -> Vec<Vec<(String, f64)>> {
        let mut cases: Vec<Vec<(String, f64)>> = vec![Vec::new()];
        for (name, values) in &self.axes {
            let mut next = Vec::with_capacity(cases.len() * values.len());
            for case in &cases {
                for &v in values {
                    let mut c = case.clone();
                    c.push((name.clone(), v));
                    next.push(c);
                }
            }
            cases = next;
        }
        cases
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|(_, v)| v.len().max(1)).product()
    }

    pub fn is_empty(&self) -> bool {
        self.axes.is_empty()
    }
}

/// One completed sweep run with its parameter assignment.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub assignment: Vec<(String, f64)>,
    pub series: TimeSeries,
    pub stats: RunStats,
}

impl SweepResult {
    /// Filesystem-safe label, e.g. `alpha2_k0.5`.
    pub fn label(&self) -> String {
        self.assignment
            .iter()
            .map(|(n, v)| format!("{n}{v}"))
            .collect::<Vec<_>>()
            .join("_")
    }
}

/// Run every case of the sweep. Results come back in case order regardless of
/// scheduling; a base config error or any failing run aborts the sweep.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepResult>> {
    let errs = spec.validation_errors();
    if !errs.is_empty() {
        return Err(SimError::InvalidConfig(errs));
    }
    let cases = spec.cases();
    let mut configs = Vec::with_capacity(cases.len());
    for case in &cases {
        let mut cfg = spec.base.clone();
        for (name, value) in case {
            apply_axis(&mut cfg, name, *value)?;
        }
        configs.push(cfg.validated()?);
    }

    let worker = |(case, cfg): (&Vec<(String, f64)>, &RunConfig)| -> Result<SweepResult> {
        let (state, series) = run(cfg)?;
        Ok(SweepResult {
            assignment: case.clone(),
            series,
            stats: state.stats,
        })
    };
    let pairs: Vec<_> = cases.iter().zip(&configs).collect();
    let results: Vec<Result<SweepResult>> = if spec.jobs == 1 {
        pairs.into_iter().map(worker).collect()
    } else if spec.jobs == 0 {
        pairs.into_par_iter().map(worker).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(spec.jobs)
            .build()
            .map_err(|e| SimError::Parse(format!("sweep: thread pool: {e}")))?;
        pool.install(|| pairs.into_par_iter().map(worker).collect())
    };
    results.into_iter().collect()
}

/// Write each run's time series under `dir/<label>/timeseries.csv` plus a
/// `summary.csv` with final-sample observables, one row per case.
pub fn write_sweep_outputs(results: &[SweepResult], dir: &Path) -> Result<Vec<PathBuf>> {
    let mkerr = |p: &Path, e: std::io::Error| SimError::io(p.display().to_string(), e);
    std::fs::create_dir_all(dir).map_err(|e| mkerr(dir, e))?;
    let mut paths = Vec::new();
    let mut summary = String::from("label,t,energy,mean,variance,mixing,l1,l2,linf\n");
    for res in results {
        let run_dir = dir.join(res.label());
        std::fs::create_dir_all(&run_dir).map_err(|e| mkerr(&run_dir, e))?;
        let ts_path = run_dir.join("timeseries.csv");
        write_timeseries(&res.series, &ts_path)?;
        paths.push(ts_path);
        let s = &res.series;
        if let Some(i) = s.len().checked_sub(1) {
            let mixing = s.mixing[i].map(|v| v.to_string()).unwrap_or_default();
            summary.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                res.label(),
                s.times[i],
                s.energy[i],
                s.mean[i],
                s.variance[i],
                mixing,
                s.l1[i],
                s.l2[i],
                s.linf[i]
            ));
        }
    }
    let summary_path = dir.join("summary.csv");
    std::fs::write(&summary_path, summary).map_err(|e| mkerr(&summary_path, e))?;
    paths.push(summary_path);
    Ok(paths)
}
