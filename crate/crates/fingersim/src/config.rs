//! Run configuration: TOML ingestion with defaults matching the reference
//! density-driven fingering setup, and exhaustive validation.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::grid::StructuredGrid;
use crate::model::PhysicalParams;
use crate::pressure::PreconditionerKind;
use crate::transport::InitialCondition;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            lx: 100.0,
            ly: 200.0,
            nx: 96,
            ny: 192,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeConfig {
    pub t_end: f64,
    /// Diagnostic sampling cadence in simulated time; steps snap to it.
    pub sample_interval: f64,
    pub dt_max: f64,
    /// Fraction of the advective stability limit actually taken.
    pub safety: f64,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            t_end: 150.0,
            sample_interval: 1.0,
            dt_max: 0.5,
            safety: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub pressure_tol: f64,
    pub transport_tol: f64,
    pub preconditioner: PreconditionerKind,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            pressure_tol: 1e-10,
            transport_tol: 1e-12,
            preconditioner: PreconditionerKind::Multigrid,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Directory for run artifacts; created on demand.
    pub dir: String,
    /// Time-series CSV filename inside `dir`.
    pub timeseries: String,
    /// Snapshot cadence in simulated time; 0 disables snapshots.
    pub snapshot_interval: f64,
    /// Gzip-compress snapshot files.
    pub gzip_snapshots: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: "out".to_string(),
            timeseries: "timeseries.csv".to_string(),
            snapshot_interval: 0.0,
            gzip_snapshots: false,
        }
    }
}

/// Complete description of one simulation run. An empty document deserializes
/// to the reference setup (100 x 200 domain at 96 x 192 cells, D = 0.005,
/// step initial profile with a seeded 1e-3 interface perturbation).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub params: PhysicalParams,
    pub initial: InitialCondition,
    pub time: TimeConfig,
    pub solver: SolverConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn grid(&self) -> Result<StructuredGrid> {
        StructuredGrid::new(self.grid.lx, self.grid.ly, self.grid.nx, self.grid.ny)
    }

    /// Every constraint violation, not just the first.
    pub fn validation_errors(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let grid = match self.grid() {
            Ok(g) => Some(g),
            Err(SimError::InvalidConfig(mut ge)) => {
                errs.append(&mut ge);
                None
            }
            Err(e) => {
                errs.push(e.to_string());
                None
            }
        };
        errs.extend(self.params.validation_errors());
        errs.extend(self.initial.validation_errors(grid.as_ref()));
        if !(self.time.t_end > 0.0) {
            errs.push(format!("time: t_end must be > 0 (got {})", self.time.t_end));
        }
        if !(self.time.sample_interval > 0.0) {
            errs.push(format!(
                "time: sample_interval must be > 0 (got {})",
                self.time.sample_interval
            ));
        }
        if !(self.time.dt_max > 0.0) {
            errs.push(format!("time: dt_max must be > 0 (got {})", self.time.dt_max));
        }
        if !(self.time.safety > 0.0 && self.time.safety <= 1.0) {
            errs.push(format!(
                "time: safety must be in (0, 1] (got {})",
                self.time.safety
            ));
        }
        if !(self.solver.pressure_tol > 0.0 && self.solver.pressure_tol < 1.0) {
            errs.push(format!(
                "solver: pressure_tol must be in (0, 1) (got {})",
                self.solver.pressure_tol
            ));
        }
        if !(self.solver.transport_tol > 0.0 && self.solver.transport_tol < 1.0) {
            errs.push(format!(
                "solver: transport_tol must be in (0, 1) (got {})",
                self.solver.transport_tol
            ));
        }
        if !(self.output.snapshot_interval >= 0.0) {
            errs.push(format!(
                "output: snapshot_interval must be >= 0 (got {})",
                self.output.snapshot_interval
            ));
        }
        // An implicit reaction half-step must leave the diagonal positive.
        if self.params.reaction_rate > 0.0
            && self.params.retardation() / self.time.dt_max <= 0.5 * self.params.reaction_rate
        {
            errs.push(format!(
                "time: dt_max = {} too large for reaction_rate = {} (need dt < {})",
                self.time.dt_max,
                self.params.reaction_rate,
                2.0 * self.params.retardation() / self.params.reaction_rate
            ));
        }
        errs
    }

    pub fn validated(self) -> Result<Self> {
        let errs = self.validation_errors();
        if errs.is_empty() {
            Ok(self)
        } else {
            Err(SimError::InvalidConfig(errs))
        }
    }
}

/// Parse a TOML document into a validated [`RunConfig`]. Unknown and duplicate
/// keys are rejected; constraint violations are listed exhaustively.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| SimError::Parse(e.to_string()))?;
    cfg.validated()
}
