//! Coupled run loop: pressure solve, velocity recovery, stability-limited
//! transport steps, diagnostics sampled on an exact time lattice, and runtime
//! enforcement of the scheme's invariants.

use crate::config::RunConfig;
use crate::diagnostics::{kinetic_energy, TimeSeries};
use crate::error::{Result, SimError};
use crate::grid::{reduce, CellField, FaceField, Reduction};
use crate::pressure::PressureSolver;
use crate::transport::{advance, initial_condition, stable_dt};

/// Aggregate statistics accumulated over a run.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunStats {
    pub steps: usize,
    pub pressure_iterations: usize,
    pub transport_iterations: usize,
    /// Worst ratio ||div u||_inf / (tol * ||rhs||_inf) over all pressure solves.
    pub worst_div_ratio: f64,
    pub c_min: f64,
    pub c_max: f64,
    /// Largest deviation of the mean concentration from the exact discrete
    /// mass law, over all steps.
    pub max_mass_drift: f64,
}

/// Full simulator state at one instant; `u` and `p` come from the most recent
/// pressure solve against `c`.
#[derive(Debug, Clone)]
pub struct SimState {
    pub t: f64,
    pub c: CellField,
    pub u: FaceField,
    pub p: CellField,
    pub step_count: usize,
    pub stats: RunStats,
}

/// Run to `t_end`, sampling diagnostics every `sample_interval` of simulated
/// time (time steps snap so samples land exactly). The observer is called at
/// every sample, including t = 0.
pub fn run_with(
    config: &RunConfig,
    mut observer: impl FnMut(&SimState) -> Result<()>,
) -> Result<(SimState, TimeSeries)> {
    let config = config.clone().validated()?;
    let grid = config.grid()?;
    let params = &config.params;

    let c0 = initial_condition(grid, &config.initial)?;
    // Rounding can make a uniform field's variance tiny-positive; treat it as
    // zero so the mixing index is reported absent instead of as noise ratios.
    let sigma0_sq = match reduce(&c0, Reduction::Variance) {
        v if v > 1e-20 => v,
        _ => 0.0,
    };
    let (c_lo, c_hi) = (config.initial.c_lower, config.initial.c_upper);

    let mut solver = PressureSolver::new(config.solver.pressure_tol, config.solver.preconditioner);
    let (p, u, report) = solver.solve(&c0, params)?;

    let mut state = SimState {
        t: 0.0,
        c: c0,
        u,
        p,
        step_count: 0,
        stats: RunStats {
            c_min: f64::INFINITY,
            c_max: f64::NEG_INFINITY,
            ..Default::default()
        },
    };
    state.stats.pressure_iterations = report.iterations;
    track_divergence(&mut state.stats, &config, report.rhs_inf, &state.u)?;

    let mut series = TimeSeries::default();
    series.push_sample(0.0, kinetic_energy(&state.u), &state.c, sigma0_sq);
    observer(&state)?;

    // Exact mean of c under the discrete mass law, updated per step.
    let mut expected_mean = reduce(&state.c, Reduction::Mean);

    let interval = config.time.sample_interval;
    let t_end = config.time.t_end;
    let mut sample_idx = 1usize;

    while state.t < t_end {
        let target = (sample_idx as f64 * interval).min(t_end);
        // Split the interval into equal stability-respecting substeps so the
        // sample time is hit exactly without a tiny trailing step.
        let remaining = target - state.t;
        let limit = stable_dt(&state.u, params, config.time.safety, config.time.dt_max);
        let substeps = (remaining / limit).ceil().max(1.0) as usize;
        let dt = remaining / substeps as f64;

        let (c_next, step) = advance(&state.c, &state.u, dt, params, config.solver.transport_tol)?;
        state.c = c_next;
        state.step_count += 1;
        state.stats.steps += 1;
        state.stats.transport_iterations += step.iterations;
        state.stats.c_min = state.stats.c_min.min(step.c_min);
        state.stats.c_max = state.stats.c_max.max(step.c_max);
        state.t = if substeps == 1 {
            target
        } else {
            let t = state.t + dt;
            // Absorb accumulated rounding once the lattice point is reached.
            if target - t <= 1e-9 * dt {
                target
            } else {
                t
            }
        };

        // Runtime invariants: plateau bounds without reaction, positivity and
        // the exact mass law always.
        let a = params.retardation() / dt;
        expected_mean *=
            (a - 0.5 * params.reaction_rate) / (a + 0.5 * params.reaction_rate);
        let mean = reduce(&state.c, Reduction::Mean);
        let drift = (mean - expected_mean).abs();
        state.stats.max_mass_drift = state.stats.max_mass_drift.max(drift);
        if drift > 1e-11 * expected_mean.abs().max(1.0) {
            return Err(invariant(&state, format!(
                "mass law violated: mean = {mean}, expected {expected_mean}"
            )));
        }
        if params.reaction_rate == 0.0 {
            if step.c_min < c_lo - 1e-8 || step.c_max > c_hi + 1e-8 {
                return Err(invariant(&state, format!(
                    "maximum principle violated: c in [{}, {}] vs [{c_lo}, {c_hi}]",
                    step.c_min, step.c_max
                )));
            }
        } else if step.c_min < -1e-8 {
            return Err(invariant(&state, format!(
                "negative concentration {} under reaction",
                step.c_min
            )));
        }

        let (p, u, report) = solver.solve(&state.c, params)?;
        state.p = p;
        state.u = u;
        state.stats.pressure_iterations += report.iterations;
        track_divergence(&mut state.stats, &config, report.rhs_inf, &state.u)?;

        if state.t >= target {
            series.push_sample(state.t, kinetic_energy(&state.u), &state.c, sigma0_sq);
            observer(&state)?;
            if target >= t_end {
                break;
            }
            sample_idx += 1;
        }
    }

    let errs = series.validation_errors();
    if !errs.is_empty() {
        return Err(SimError::InvalidConfig(errs));
    }
    Ok((state, series))
}

/// Run without an observer.
pub fn run(config: &RunConfig) -> Result<(SimState, TimeSeries)> {
    run_with(config, |_| Ok(()))
}

fn invariant(state: &SimState, what: String) -> SimError {
    SimError::InvariantViolation {
        step: state.step_count,
        t: state.t,
        what,
    }
}

/// Enforce the discrete-incompressibility contract of the pressure solve and
/// remember the worst margin.
fn track_divergence(
    stats: &mut RunStats,
    config: &RunConfig,
    rhs_inf: f64,
    u: &FaceField,
) -> Result<()> {
    let div_inf = reduce(&crate::grid::divergence(u), Reduction::Linf);
    let budget = 10.0 * config.solver.pressure_tol * rhs_inf;
    if rhs_inf > 0.0 {
        let ratio = div_inf / (config.solver.pressure_tol * rhs_inf);
        stats.worst_div_ratio = stats.worst_div_ratio.max(ratio);
        if div_inf > budget {
            return Err(SimError::InvariantViolation {
                step: stats.steps,
                t: f64::NAN,
                what: format!("divergence {div_inf} exceeds budget {budget}"),
            });
        }
    } else {
        // Quiescent state: the velocity must vanish identically.
        stats.worst_div_ratio = stats.worst_div_ratio.max(0.0);
        if u.max_abs() > 1e-10 {
            return Err(SimError::InvariantViolation {
                step: stats.steps,
                t: f64::NAN,
                what: format!("nonzero velocity {} with zero forcing", u.max_abs()),
            });
        }
    }
    Ok(())
}
