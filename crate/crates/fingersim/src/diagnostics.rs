//! Scalar observables (kinetic energy, moments, mixing index, norms), the
//! analytic bounds they are checked against, and exponential decay-rate fits.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::grid::{reduce, CellField, FaceField, Reduction, StructuredGrid};
use crate::model::PhysicalParams;

/// Sampled scalar observables of a run. `mixing` is `None` when the initial
/// variance is zero (the index would be 0/0).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub mixing: Vec<Option<f64>>,
    pub l1: Vec<f64>,
    pub l2: Vec<f64>,
    pub linf: Vec<f64>,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push_sample(
        &mut self,
        t: f64,
        energy: f64,
        c: &CellField,
        sigma0_sq: f64,
    ) {
        let (mean, variance, chi) = mixing_stats(c, sigma0_sq);
        self.times.push(t);
        self.energy.push(energy);
        self.mean.push(mean);
        self.variance.push(variance);
        self.mixing.push(chi);
        self.l1.push(reduce(c, Reduction::L1));
        self.l2.push(reduce(c, Reduction::L2));
        self.linf.push(reduce(c, Reduction::Linf));
    }

    /// Strictly increasing times, finite entries, mixing within [-eps, 1+eps].
    pub fn validation_errors(&self) -> Vec<String> {
        let mut errs = Vec::new();
        for w in self.times.windows(2) {
            if !(w[1] > w[0]) {
                errs.push(format!("times not strictly increasing at {} -> {}", w[0], w[1]));
            }
        }
        let finite = |name: &str, v: &[f64], errs: &mut Vec<String>| {
            if v.iter().any(|x| !x.is_finite()) {
                errs.push(format!("non-finite entry in {name}"));
            }
        };
        finite("energy", &self.energy, &mut errs);
        finite("mean", &self.mean, &mut errs);
        finite("variance", &self.variance, &mut errs);
        finite("l1", &self.l1, &mut errs);
        finite("l2", &self.l2, &mut errs);
        finite("linf", &self.linf, &mut errs);
        for chi in self.mixing.iter().flatten() {
            if !(*chi >= -1e-9 && *chi <= 1.0 + 1e-9) {
                errs.push(format!("mixing index {chi} outside [0, 1]"));
            }
        }
        errs
    }
}

/// Kinetic energy E = sum over cells of (ubar^2 + vbar^2) dx dy, with the
/// cell velocity averaged from the two adjacent faces. Boundary-normal faces
/// are zero, so a uniform interior flow loses an O(1/n) boundary share
/// relative to the continuum integral.
pub fn kinetic_energy(u: &FaceField) -> f64 {
    let g = *u.grid();
    let da = g.cell_area();
    let mut e = 0.0;
    for j in 0..g.ny {
        for i in 0..g.nx {
            let ub = 0.5 * (u.x[u.xi(i, j)] + u.x[u.xi(i + 1, j)]);
            let vb = 0.5 * (u.y[u.yi(i, j)] + u.y[u.yi(i, j + 1)]);
            e += ub * ub + vb * vb;
        }
    }
    e * da
}

/// Mean, variance and mixing index chi = 1 - sigma^2(t)/sigma^2(0). A
/// non-positive initial variance makes chi undefined; it is reported as
/// `None`, never as 0/0.
pub fn mixing_stats(c: &CellField, sigma0_sq: f64) -> (f64, f64, Option<f64>) {
    let mean = reduce(c, Reduction::Mean);
    let variance = reduce(c, Reduction::Variance);
    let chi = if sigma0_sq > 0.0 {
        Some(1.0 - variance / sigma0_sq)
    } else {
        None
    };
    (mean, variance, chi)
}

/// Which norm of the concentration an exponential decay rate refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecayNorm {
    /// L1 norm of c.
    L1,
    /// Any single Lp norm of c; same rate as L1.
    Lp,
    /// The squared L2 norm, which decays twice as fast.
    L2Squared,
}

/// Exponential decay rate of the chosen observable for a first-order reaction
/// retarded by adsorption: kappa/(1+k) per norm, doubled for the squared norm.
pub fn theoretical_decay_rate(params: &PhysicalParams, norm: DecayNorm) -> f64 {
    let base = params.reaction_rate / params.retardation();
    match norm {
        DecayNorm::L1 | DecayNorm::Lp => base,
        DecayNorm::L2Squared => 2.0 * base,
    }
}

/// Energy bound value plus whether its hypotheses actually hold for the given
/// data (c0 >= 1 everywhere and unit permeability).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBound {
    pub value: f64,
    pub valid_bound: bool,
}

/// Upper bound on the kinetic energy for all time:
/// e^{-2R} (|Omega| + 2 alpha Int c0 + alpha^2 ||c0||^2).
///
/// The derivation uses mu(c) >= e^R, which needs c0 >= 1 everywhere and K = 1;
/// outside that regime the value is still returned but flagged.
pub fn energy_upper_bound(params: &PhysicalParams, c0: &CellField) -> EnergyBound {
    let g = c0.grid();
    let area = g.domain_area();
    let integral = reduce(c0, Reduction::Integral);
    let l2 = reduce(c0, Reduction::L2);
    let alpha = params.density_contrast;
    let value = (-2.0 * params.viscosity_contrast).exp()
        * (area + 2.0 * alpha * integral + alpha * alpha * l2 * l2);
    let valid_bound = c0.min() >= 1.0 && params.permeability == 1.0;
    EnergyBound { value, valid_bound }
}

/// The two published forms of the Poincaré mixing bound exponent. `Paper`
/// uses 2Dt/(M(1+k)) verbatim; `Dimensional` uses 2Dt/(M^2(1+k)), the form
/// consistent with the underlying inequality ||c - cbar|| <= M ||grad c||.
/// Only the dimensional variant is asserted against runs; the other is
/// reported for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundVariant {
    Paper,
    Dimensional,
}

/// Optimal Poincaré constant M = max(Lx, Ly)/pi for the no-flux rectangle.
pub fn poincare_constant(grid: &StructuredGrid) -> f64 {
    grid.lx.max(grid.ly) / std::f64::consts::PI
}

/// Lower bound on the mixing index: 1 - exp(-2 D t / (M^s (1+k))) with s = 1
/// (`Paper`) or s = 2 (`Dimensional`).
pub fn mixing_lower_bound(
    t: f64,
    params: &PhysicalParams,
    grid: &StructuredGrid,
    variant: BoundVariant,
) -> f64 {
    let m = poincare_constant(grid);
    let denom = match variant {
        BoundVariant::Paper => m,
        BoundVariant::Dimensional => m * m,
    };
    1.0 - (-2.0 * params.diffusion * t / (denom * params.retardation())).exp()
}

/// Exponential fit lambda-hat = -slope of an OLS line through log(values).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub rate: f64,
    pub intercept: f64,
    pub window: (f64, f64),
    /// RMS of the log-residuals over the window.
    pub residual: f64,
}

/// Least-squares exponential decay rate of `values` over the time window
/// [t1, t2] (inclusive). Requires at least 3 strictly positive samples inside
/// the window.
pub fn fit_decay_rate(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<DecayFit> {
    let (t1, t2) = window;
    if !(t1 < t2) {
        return Err(SimError::DecayFit(format!(
            "window must satisfy t1 < t2 (got {t1}..{t2})"
        )));
    }
    if times.len() != values.len() {
        return Err(SimError::DecayFit(format!(
            "times ({}) and values ({}) differ in length",
            times.len(),
            values.len()
        )));
    }
    let mut ts = Vec::new();
    let mut logs = Vec::new();
    for (&t, &v) in times.iter().zip(values) {
        if t >= t1 && t <= t2 {
            if !(v > 0.0) {
                return Err(SimError::DecayFit(format!(
                    "non-positive value {v} at t = {t} inside the fit window"
                )));
            }
            ts.push(t);
            logs.push(v.ln());
        }
    }
    let n = ts.len();
    if n < 3 {
        return Err(SimError::DecayFit(format!(
            "need at least 3 samples in the window, found {n}"
        )));
    }
    let nf = n as f64;
    let tm = ts.iter().sum::<f64>() / nf;
    let lm = logs.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&t, &l) in ts.iter().zip(&logs) {
        sxx += (t - tm) * (t - tm);
        sxy += (t - tm) * (l - lm);
    }
    if sxx == 0.0 {
        return Err(SimError::DecayFit("degenerate window: all times equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = lm - slope * tm;
    let mut ss = 0.0;
    for (&t, &l) in ts.iter().zip(&logs) {
        let r = l - (intercept + slope * t);
        ss += r * r;
    }
    let fit = DecayFit {
        rate: -slope,
        intercept,
        window,
        residual: (ss / nf).sqrt(),
    };
    if !fit.rate.is_finite() {
        return Err(SimError::DecayFit("fitted rate is not finite".into()));
    }
    Ok(fit)
}

/// Default fit window: the last half of the sampled interval.
pub fn late_time_window(times: &[f64]) -> Option<(f64, f64)> {
    let (first, last) = (*times.first()?, *times.last()?);
    if !(last > first) {
        return None;
    }
    Some((0.5 * (first + last), last))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_velocity_has_zero_energy() {
        let g = StructuredGrid::new(1.0, 1.0, 8, 8).unwrap();
        assert_eq!(kinetic_energy(&FaceField::zeros(g)), 0.0);
    }

    #[test]
    fn uniform_interior_flow_energy_near_area() {
        // u_x = 1 on interior vertical faces of a unit-area grid: cells next
        // to the left/right walls average to 1/2, costing O(1/n) of the area.
        let n = 64;
        let g = StructuredGrid::new(1.0, 1.0, n, n).unwrap();
        let mut u = FaceField::zeros(g);
        for j in 0..n {
            for i in 1..n {
                let k = u.xi(i, j);
                u.x[k] = 1.0;
            }
        }
        let e = kinetic_energy(&u);
        // Direct summation oracle: (n - 2) full cells + 2 quarter cells per row.
        let per_row = (n - 2) as f64 + 2.0 * 0.25;
        let exact = per_row / (n * n) as f64 * n as f64;
        assert!((e - exact).abs() < 1e-12);
        assert!((e - 1.0).abs() < 2.0 / n as f64);
    }

    #[test]
    fn mixing_stats_examples() {
        let g = StructuredGrid::new(100.0, 200.0, 16, 32).unwrap();
        let c0 = CellField::from_fn(g, |_, y| if y >= 100.0 { 2.0 } else { 1.0 });
        let s0 = reduce(&c0, Reduction::Variance);
        assert!((s0 - 0.25).abs() < 1e-13);

        let (_, _, chi) = mixing_stats(&c0, s0);
        assert!(chi.unwrap().abs() < 1e-12);

        let uniform = CellField::constant(g, 1.5);
        let (_, _, chi) = mixing_stats(&uniform, s0);
        assert!((chi.unwrap() - 1.0).abs() < 1e-12);

        // Half the initial variance -> chi = 0.5; scale deviations by 1/sqrt 2.
        let mid = c0.map(|v| 1.5 + (v - 1.5) / 2f64.sqrt());
        let (_, var, chi) = mixing_stats(&mid, s0);
        assert!((var - 0.125).abs() < 1e-13);
        assert!((chi.unwrap() - 0.5).abs() < 1e-12);

        // Zero initial variance guards the index.
        let (_, _, chi) = mixing_stats(&uniform, 0.0);
        assert!(chi.is_none());
    }

    #[test]
    fn theoretical_rates() {
        let mk = |kappa, k| PhysicalParams {
            reaction_rate: kappa,
            adsorption: k,
            ..Default::default()
        };
        assert_eq!(theoretical_decay_rate(&mk(0.1, 0.0), DecayNorm::L1), 0.1);
        assert!(
            (theoretical_decay_rate(&mk(0.1, 3.0), DecayNorm::L2Squared) - 0.05).abs() < 1e-15
        );
        assert_eq!(theoretical_decay_rate(&mk(0.0, 2.0), DecayNorm::Lp), 0.0);
    }

    #[test]
    fn energy_bound_on_step_profile() {
        let g = StructuredGrid::new(100.0, 200.0, 32, 64).unwrap();
        let c0 = CellField::from_fn(g, |_, y| if y >= 100.0 { 2.0 } else { 1.0 });

        let at = |alpha: f64, r: f64| {
            energy_upper_bound(
                &PhysicalParams {
                    density_contrast: alpha,
                    viscosity_contrast: r,
                    ..Default::default()
                },
                &c0,
            )
        };
        let b = at(1.0, 0.0);
        assert!(b.valid_bound);
        assert!((b.value - 130_000.0).abs() < 1e-6);

        // No density contrast leaves only the domain-area term.
        assert!((at(0.0, 0.0).value - 20_000.0).abs() < 1e-6);

        // Successive alpha ratios shrink: 2.615, 1.912, 1.631.
        let v: Vec<f64> = (1..=4).map(|a| at(a as f64, 0.0).value).collect();
        assert!((v[1] / v[0] - 6.8 / 2.6).abs() < 1e-12);
        assert!((v[1] / v[0] - 2.615).abs() < 5e-3);
        assert!((v[2] / v[1] - 1.912).abs() < 5e-3);
        assert!((v[3] / v[2] - 1.631).abs() < 5e-3);

        // Viscosity contrast damps the bound by e^{-2R}.
        assert!((at(1.0, 1.0).value - 130_000.0 * (-2.0_f64).exp()).abs() < 1e-6);

        // Flagged when the concentration dips below 1.
        let low = c0.map(|v| v - 0.5);
        let b = energy_upper_bound(&PhysicalParams::default(), &low);
        assert!(!b.valid_bound);
    }

    #[test]
    fn mixing_bound_values() {
        let g = StructuredGrid::new(100.0, 200.0, 8, 16).unwrap();
        let m = poincare_constant(&g);
        assert!((m - 200.0 / std::f64::consts::PI).abs() < 1e-12);
        assert!((m - 63.662).abs() < 1e-3);

        let params = PhysicalParams {
            adsorption: 1.0,
            ..Default::default()
        }; // D = 0.005
        assert_eq!(mixing_lower_bound(0.0, &params, &g, BoundVariant::Paper), 0.0);
        assert_eq!(
            mixing_lower_bound(0.0, &params, &g, BoundVariant::Dimensional),
            0.0
        );
        let v = mixing_lower_bound(1000.0, &params, &g, BoundVariant::Dimensional);
        assert!((v - 0.001233).abs() < 1e-6, "v={v}");

        // Both variants approach 1.
        let far = mixing_lower_bound(1e9, &params, &g, BoundVariant::Paper);
        assert!((far - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fit_recovers_exact_exponential() {
        let times: Vec<f64> = (0..=10).map(|i| i as f64).collect();
        let values: Vec<f64> = times.iter().map(|&t| (-0.1 * t).exp()).collect();
        let fit = fit_decay_rate(&times, &values, (0.0, 10.0)).unwrap();
        assert!((fit.rate - 0.1).abs() < 1e-12, "rate={}", fit.rate);
        assert!(fit.residual < 1e-12);
    }

    #[test]
    fn fit_tolerates_small_multiplicative_ripple() {
        let times: Vec<f64> = (0..=100).map(|i| 0.2 * i as f64).collect();
        let values: Vec<f64> = times
            .iter()
            .map(|&t| 3.0 * (-0.05 * t).exp() * (1.0 + 0.001 * t.sin()))
            .collect();
        let fit = fit_decay_rate(&times, &values, (0.0, 20.0)).unwrap();
        assert!((fit.rate - 0.05).abs() <= 0.001, "rate={}", fit.rate);
    }

    #[test]
    fn fit_of_constant_series_is_zero() {
        let times: Vec<f64> = (0..5).map(|i| i as f64).collect();
        let values = vec![2.5; 5];
        let fit = fit_decay_rate(&times, &values, (0.0, 4.0)).unwrap();
        assert_eq!(fit.rate, 0.0);
    }

    #[test]
    fn fit_rejects_bad_input() {
        let times = vec![0.0, 1.0, 2.0];
        assert!(fit_decay_rate(&times, &[1.0, 0.0, 1.0], (0.0, 2.0)).is_err());
        assert!(fit_decay_rate(&times, &[1.0, 1.0, 1.0], (0.0, 0.5)).is_err());
        assert!(fit_decay_rate(&times, &[1.0, 1.0, 1.0], (2.0, 1.0)).is_err());
    }

    #[test]
    fn timeseries_validation_catches_disorder() {
        let mut s = TimeSeries::default();
        let g = StructuredGrid::new(1.0, 1.0, 4, 4).unwrap();
        let c = CellField::constant(g, 1.0);
        s.push_sample(0.0, 0.0, &c, 0.25);
        s.push_sample(0.0, 0.0, &c, 0.25);
        assert!(!s.validation_errors().is_empty());
    }
}
