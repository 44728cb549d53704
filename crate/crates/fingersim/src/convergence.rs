//! Mesh-refinement study: run a ladder of grids plus a finer reference on the
//! same configuration and report time-series errors in energy and variance.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::diagnostics::TimeSeries;
use crate::error::{Result, SimError};
use crate::simulation::run;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceSpec {
    pub base: RunConfig,
    /// Coarse-to-fine mesh ladder as (nx, ny) pairs.
    pub ladder: Vec<(usize, usize)>,
    /// Reference mesh, strictly finer than every ladder entry.
    pub reference: (usize, usize),
}

impl ConvergenceSpec {
    pub fn validation_errors(&self) -> Vec<String> {
        let mut errs = self.base.validation_errors();
        if self.ladder.is_empty() {
            errs.push("convergence: ladder must be nonempty".into());
        }
        for w in self.ladder.windows(2) {
            if !(w[1].0 > w[0].0 && w[1].1 > w[0].1) {
                errs.push(format!(
                    "convergence: ladder not sorted coarse-to-fine at {:?} -> {:?}",
                    w[0], w[1]
                ));
            }
        }
        let (rx, ry) = self.reference;
        for &(nx, ny) in &self.ladder {
            if !(rx > nx && ry > ny) {
                errs.push(format!(
                    "convergence: reference {:?} not strictly finer than ladder mesh ({nx}, {ny})",
                    self.reference
                ));
            }
        }
        errs
    }
}

/// Per-mesh time-series errors against the reference run. Energy errors are
/// absolute; variance errors are relative to the reference.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub nx: usize,
    pub ny: usize,
    pub energy_l2: f64,
    pub energy_linf: f64,
    pub variance_l2: f64,
    pub variance_linf: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// True when every error column strictly decreases coarse-to-fine.
    pub monotone: bool,
}

fn with_mesh(base: &RunConfig, nx: usize, ny: usize) -> RunConfig {
    let mut cfg = base.clone();
    cfg.grid.nx = nx;
    cfg.grid.ny = ny;
    cfg
}

fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, &x| m.max(x.abs()))
}

fn series_errors(coarse: &TimeSeries, reference: &TimeSeries) -> Result<ConvergenceRow> {
    if coarse.len() != reference.len() {
        return Err(SimError::InvalidConfig(vec![format!(
            "convergence: sample counts differ ({} vs {})",
            coarse.len(),
            reference.len()
        )]));
    }
    let e_err: Vec<f64> = coarse
        .energy
        .iter()
        .zip(&reference.energy)
        .map(|(a, b)| a - b)
        .collect();
    let v_err: Vec<f64> = coarse
        .variance
        .iter()
        .zip(&reference.variance)
        .map(|(a, b)| if *b != 0.0 { (a - b) / b } else { a - b })
        .collect();
    Ok(ConvergenceRow {
        nx: 0,
        ny: 0,
        energy_l2: rms(&e_err),
        energy_linf: max_abs(&e_err),
        variance_l2: rms(&v_err),
        variance_linf: max_abs(&v_err),
    })
}

/// Run the ladder and the reference (in parallel) and tabulate the errors.
/// Samples land on the same time lattice on every mesh, so the series align
/// index-by-index without interpolation.
pub fn run_convergence(spec: &ConvergenceSpec) -> Result<ConvergenceTable> {
    let errs = spec.validation_errors();
    if !errs.is_empty() {
        return Err(SimError::InvalidConfig(errs));
    }

    let mut meshes = spec.ladder.clone();
    meshes.push(spec.reference);
    let results: Vec<Result<TimeSeries>> = meshes
        .par_iter()
        .map(|&(nx, ny)| run(&with_mesh(&spec.base, nx, ny)).map(|(_, s)| s))
        .collect();
    let mut series = Vec::with_capacity(results.len());
    for r in results {
        series.push(r?);
    }
    let reference = series.pop().expect("reference series");

    let mut rows = Vec::with_capacity(spec.ladder.len());
    for (&(nx, ny), s) in spec.ladder.iter().zip(&series) {
        let mut row = series_errors(s, &reference)?;
        row.nx = nx;
        row.ny = ny;
        rows.push(row);
    }

    let dec = |f: fn(&ConvergenceRow) -> f64| rows.windows(2).all(|w| f(&w[1]) < f(&w[0]));
    let monotone = dec(|r| r.energy_l2)
        && dec(|r| r.energy_linf)
        && dec(|r| r.variance_l2)
        && dec(|r| r.variance_linf);

    Ok(ConvergenceTable { rows, monotone })
}
