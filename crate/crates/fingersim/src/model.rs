//! Physical parameters and the constitutive laws tying viscosity and density
//! to the solute concentration.

use serde::{Deserialize, Serialize};

/// All model coefficients in one immutable record. Dimensionless throughout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicalParams {
    /// Permeability K (> 0).
    pub permeability: f64,
    /// Viscosity contrast R in mu(c) = exp(R c) (>= 0).
    pub viscosity_contrast: f64,
    /// Density contrast alpha in rho(c) = 1 + alpha c (>= 0).
    pub density_contrast: f64,
    /// Linear adsorption coefficient k; the retardation factor is 1 + k.
    pub adsorption: f64,
    /// First-order reaction rate kappa (constant in space, >= 0).
    pub reaction_rate: f64,
    /// Diffusion coefficient D (> 0).
    pub diffusion: f64,
    /// Vector g in the Darcy force term u = -(K/mu)(grad p + rho g). In this
    /// sign convention g is the *upward* unit vector for physical gravity
    /// (hydrostatic balance is grad p = -rho g), so the default (0, 1) makes
    /// the denser fluid initialized in the upper half sink and drive the
    /// instability; (0, -1) would stably stratify it.
    pub gravity: [f64; 2],
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self {
            permeability: 1.0,
            viscosity_contrast: 1.0,
            density_contrast: 1.0,
            adsorption: 1.0,
            reaction_rate: 0.0,
            diffusion: 0.005,
            gravity: [0.0, 1.0],
        }
    }
}

impl PhysicalParams {
    /// Collects every constraint violation; empty means valid.
    pub fn validation_errors(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.permeability > 0.0) {
            errs.push(format!(
                "params: permeability must be > 0 (got {})",
                self.permeability
            ));
        }
        if !(self.diffusion > 0.0) {
            errs.push(format!(
                "params: diffusion must be > 0 (got {})",
                self.diffusion
            ));
        }
        if !(self.viscosity_contrast >= 0.0) {
            errs.push(format!(
                "params: viscosity_contrast must be >= 0 (got {})",
                self.viscosity_contrast
            ));
        }
        if !(self.density_contrast >= 0.0) {
            errs.push(format!(
                "params: density_contrast must be >= 0 (got {})",
                self.density_contrast
            ));
        }
        if !(self.adsorption >= 0.0) {
            errs.push(format!(
                "params: adsorption must be >= 0 (got {})",
                self.adsorption
            ));
        }
        if !(self.reaction_rate >= 0.0) {
            errs.push(format!(
                "params: reaction_rate must be >= 0 (got {})",
                self.reaction_rate
            ));
        }
        if !self.gravity.iter().all(|g| g.is_finite()) {
            errs.push(format!("params: gravity must be finite (got {:?})", self.gravity));
        }
        errs
    }

    /// Retardation factor 1 + k (>= 1).
    #[inline]
    pub fn retardation(&self) -> f64 {
        1.0 + self.adsorption
    }

    /// mu(c) = exp(R c); strictly positive, equals 1 when R = 0 or c = 0.
    #[inline]
    pub fn viscosity(&self, c: f64) -> f64 {
        (self.viscosity_contrast * c).exp()
    }

    /// rho(c) = 1 + alpha c.
    #[inline]
    pub fn density(&self, c: f64) -> f64 {
        1.0 + self.density_contrast * c
    }

    /// Mobility K / mu(c) = K exp(-R c), the variable coefficient of the
    /// pressure equation.
    #[inline]
    pub fn mobility(&self, c: f64) -> f64 {
        self.permeability * (-self.viscosity_contrast * c).exp()
    }
}
