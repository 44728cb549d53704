//! Variable-mobility pressure Poisson solve and divergence-free velocity
//! recovery.
//!
//! Taking the divergence of Darcy's law u = -K/mu(c) (grad p + rho(c) g) and
//! using incompressibility gives an elliptic equation for the pressure with
//! face mobility as the variable coefficient. The buoyancy source is built
//! from the density *deviation* rho(c) - rho(mean c); this shifts the solved
//! pressure by a hydrostatic linear profile (the velocity is unchanged) and
//! makes the quiescent uniform-concentration state balance to machine zero
//! instead of to solver tolerance.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{
    divergence, face_arithmetic_mean, face_harmonic_mean, gradient_at_faces, reduce, CellField,
    FaceField, Reduction,
};
use crate::linalg::{pcg, Precond, StencilOp};
use crate::model::PhysicalParams;
use crate::multigrid::VCycle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PreconditionerKind {
    Jacobi,
    Multigrid,
}

#[derive(Debug, Clone, Copy)]
pub struct EllipticSolveReport {
    pub iterations: usize,
    /// Final residual 2-norm relative to the RHS 2-norm.
    pub residual: f64,
    /// Magnitude of the RHS mean removed, relative to the RHS L1 norm.
    pub compatibility_defect: f64,
    /// Max-norm of the assembled RHS, for incompressibility bookkeeping.
    pub rhs_inf: f64,
    /// Final residual max-norm; equals the max-norm of div u by construction.
    pub residual_inf: f64,
}

/// Face mobility (harmonic mean, boundary faces zeroed for the operator) and
/// buoyancy face flux m * (rho - rho_ref) * g with zero boundary normals.
fn assemble(c: &CellField, params: &PhysicalParams) -> Result<(StencilOp, FaceField)> {
    let g = *c.grid();
    let mobility = c.map(|v| params.mobility(v));
    let mut m_face = face_harmonic_mean(&mobility)?;
    m_face.zero_boundary_normals();

    let c_mean = reduce(c, Reduction::Mean);
    let rho_dev = c.map(|v| params.density_contrast * (v - c_mean));
    let rho_face = face_arithmetic_mean(&rho_dev);

    let mut buoyancy = FaceField::zeros(g);
    let (gx, gy) = (params.gravity[0], params.gravity[1]);
    for (b, (m, r)) in buoyancy
        .x
        .iter_mut()
        .zip(m_face.x.iter().zip(rho_face.x.iter()))
    {
        *b = m * r * gx;
    }
    for (b, (m, r)) in buoyancy
        .y
        .iter_mut()
        .zip(m_face.y.iter().zip(rho_face.y.iter()))
    {
        *b = m * r * gy;
    }
    buoyancy.zero_boundary_normals();

    let op = StencilOp {
        nx: g.nx,
        ny: g.ny,
        dx: g.dx(),
        dy: g.dy(),
        shift: 0.0,
        scale: 1.0,
        mx: m_face.x,
        my: m_face.y,
    };
    Ok((op, buoyancy))
}

/// Warm-started pressure solver; owns the previous solution and the
/// preconditioner choice.
pub struct PressureSolver {
    pub tol: f64,
    pub preconditioner: PreconditionerKind,
    p_prev: Option<Vec<f64>>,
}

impl PressureSolver {
    pub fn new(tol: f64, preconditioner: PreconditionerKind) -> Self {
        Self {
            tol,
            preconditioner,
            p_prev: None,
        }
    }

    /// Solve for the pressure and recover the discretely divergence-free face
    /// velocity in one assembly.
    pub fn solve(
        &mut self,
        c: &CellField,
        params: &PhysicalParams,
    ) -> Result<(CellField, FaceField, EllipticSolveReport)> {
        let g = *c.grid();
        let (op, buoyancy) = assemble(c, params)?;

        // -div(m grad p) = div(b): the RHS integral telescopes to zero, so the
        // Neumann compatibility defect is rounding-level by construction.
        let rhs_field = divergence(&buoyancy);
        let rhs_integral = reduce(&rhs_field, Reduction::Integral);
        let rhs_l1 = reduce(&rhs_field, Reduction::L1);
        let defect = if rhs_l1 > 0.0 {
            rhs_integral.abs() / rhs_l1
        } else {
            0.0
        };

        let n = g.cell_count();
        let mut rhs = rhs_field.values().to_vec();
        let mean = rhs.iter().sum::<f64>() / n as f64;
        rhs.iter_mut().for_each(|v| *v -= mean);
        let rhs_inf = rhs.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));

        let mut x = match self.p_prev.take() {
            Some(p) if p.len() == n => p,
            _ => vec![0.0; n],
        };

        let mut pre = match self.preconditioner {
            PreconditionerKind::Jacobi => Precond::jacobi(&op),
            PreconditionerKind::Multigrid => Precond::Multigrid(VCycle::new(&op)),
        };
        let max_iter = 50 * g.nx.max(g.ny);
        let stats = pcg(
            &op, &mut pre, &rhs, &mut x, self.tol, max_iter, true, true, "pressure",
        )?;

        let p = CellField::from_values(g, x.clone())?;
        self.p_prev = Some(x);

        let u = recover_velocity_from(&p, &op, &buoyancy);
        let report = EllipticSolveReport {
            iterations: stats.iterations,
            residual: stats.rel_residual,
            compatibility_defect: defect,
            rhs_inf,
            residual_inf: stats.residual_inf,
        };
        Ok((p, u, report))
    }
}

fn recover_velocity_from(p: &CellField, op: &StencilOp, buoyancy: &FaceField) -> FaceField {
    let mut u = gradient_at_faces(p);
    for (u, (m, b)) in u.x.iter_mut().zip(op.mx.iter().zip(buoyancy.x.iter())) {
        *u = -(m * *u + b);
    }
    for (u, (m, b)) in u.y.iter_mut().zip(op.my.iter().zip(buoyancy.y.iter())) {
        *u = -(m * *u + b);
    }
    u.zero_boundary_normals();
    u
}

/// One-shot pressure solve (cold start, multigrid preconditioner).
pub fn solve_pressure(
    c: &CellField,
    params: &PhysicalParams,
    tol: f64,
) -> Result<(CellField, EllipticSolveReport)> {
    let mut solver = PressureSolver::new(tol, PreconditionerKind::Multigrid);
    let (p, _, report) = solver.solve(c, params)?;
    Ok((p, report))
}

/// Face velocity u = -m (grad p + rho_dev g) for a pressure obtained from
/// [`solve_pressure`] with the same concentration field.
pub fn recover_velocity(p: &CellField, c: &CellField, params: &PhysicalParams) -> Result<FaceField> {
    let (op, buoyancy) = assemble(c, params)?;
    Ok(recover_velocity_from(p, &op, &buoyancy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::StructuredGrid;

    #[test]
    fn uniform_concentration_is_hydrostatic() {
        let g = StructuredGrid::new(100.0, 200.0, 24, 48).unwrap();
        let c = CellField::constant(g, 1.5);
        for (alpha, r) in [(0.0, 0.0), (4.0, 0.0), (1.0, 2.0), (3.0, 1.0)] {
            let params = PhysicalParams {
                density_contrast: alpha,
                viscosity_contrast: r,
                ..Default::default()
            };
            let (p, report) = solve_pressure(&c, &params, 1e-10).unwrap();
            let u = recover_velocity(&p, &c, &params).unwrap();
            assert!(u.max_abs() <= 1e-10, "alpha={alpha} r={r} |u|={}", u.max_abs());
            assert!(report.compatibility_defect <= 1e-10);
        }
    }

    #[test]
    fn paper_ic_solve_converges_with_small_defect() {
        let g = StructuredGrid::new(100.0, 200.0, 32, 64).unwrap();
        let c = CellField::from_fn(g, |_, y| if y >= 100.0 { 2.0 } else { 1.0 });
        let params = PhysicalParams::default();
        let (p, report) = solve_pressure(&c, &params, 1e-10).unwrap();
        assert!(report.residual <= 1e-10);
        assert!(report.compatibility_defect <= 1e-10);

        // Discrete incompressibility of the recovered velocity.
        let u = recover_velocity(&p, &c, &params).unwrap();
        let div = divergence(&u);
        let div_inf = reduce(&div, Reduction::Linf);
        assert!(div_inf <= 10.0 * 1e-10 * report.rhs_inf, "div_inf={div_inf}");
    }

    #[test]
    fn velocity_respects_mobility_bound() {
        let g = StructuredGrid::new(100.0, 200.0, 24, 48).unwrap();
        let c = CellField::from_fn(g, |_, y| if y >= 100.0 { 2.0 } else { 1.0 });
        let params = PhysicalParams {
            viscosity_contrast: 1.5,
            ..Default::default()
        };
        let (p, _) = solve_pressure(&c, &params, 1e-10).unwrap();
        let u = recover_velocity(&p, &c, &params).unwrap();

        // ||u|| <= K e^{-R c_min} ||grad p + rho_dev g|| on the faces.
        let c_min = c.min();
        let mobility_max = params.permeability * (-params.viscosity_contrast * c_min).exp();
        let grad_p = gradient_at_faces(&p);
        let c_mean = reduce(&c, Reduction::Mean);
        let rho_dev = c.map(|v| params.density_contrast * (v - c_mean));
        let rho_face = face_arithmetic_mean(&rho_dev);
        let mut force = grad_p.clone();
        for (f, r) in force.x.iter_mut().zip(rho_face.x.iter()) {
            *f += r * params.gravity[0];
        }
        for (f, r) in force.y.iter_mut().zip(rho_face.y.iter()) {
            *f += r * params.gravity[1];
        }
        force.zero_boundary_normals();
        let unorm = crate::grid::face_inner(&u, &u).sqrt();
        let fnorm = crate::grid::face_inner(&force, &force).sqrt();
        assert!(unorm <= mobility_max * fnorm * (1.0 + 1e-12));
    }

    #[test]
    fn assembled_operator_is_symmetric() {
        let g = StructuredGrid::new(3.0, 2.0, 9, 7).unwrap();
        let c = CellField::from_fn(g, |x, y| 1.0 + 0.4 * (x + y * y * 0.1));
        let params = PhysicalParams::default();
        let (op, _) = assemble(&c, &params).unwrap();
        let n = op.len();
        let mut seed = 17u64;
        let mut rnd = move || {
            seed = seed
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let f: Vec<f64> = (0..n).map(|_| rnd()).collect();
        let q: Vec<f64> = (0..n).map(|_| rnd()).collect();
        let mut af = vec![0.0; n];
        let mut aq = vec![0.0; n];
        op.apply(&f, &mut af);
        op.apply(&q, &mut aq);
        let lhs: f64 = af.iter().zip(&q).map(|(a, b)| a * b).sum();
        let rhs: f64 = f.iter().zip(&aq).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
    }
}
