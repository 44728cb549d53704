//! Simulator for density- and viscosity-contrast driven fingering of a
//! miscible solute in a 2D porous medium with linear adsorption and a
//! first-order reaction.
//!
//! Darcy flow with concentration-dependent viscosity and density is coupled
//! to a retarded convection-diffusion-reaction equation on a staggered
//! finite-volume grid. The crate exposes the building blocks (grid calculus,
//! elliptic solvers, transport step), a run loop with invariant enforcement,
//! diagnostics with their analytic bounds, and batch drivers for parameter
//! sweeps and mesh-convergence studies.

pub mod config;
pub mod convergence;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod model;
pub mod multigrid;
pub mod output;
pub mod pressure;
pub mod simulation;
pub mod sweep;
pub mod transport;

pub use config::{parse_config, RunConfig};
pub use error::{Result, SimError};
pub use grid::{CellField, FaceField, StructuredGrid};
pub use model::PhysicalParams;
pub use simulation::{run, run_with, SimState};
