//! Matrix-free stencil operator and preconditioned conjugate gradients.
//!
//! Both elliptic solves in the simulator (pressure and implicit
//! diffusion-reaction) share the same operator shape
//!
//!   y = shift * x + scale * (-div(m grad x))
//!
//! on the staggered grid with zero boundary-face gradients (homogeneous
//! Neumann). With shift = 0 the operator is symmetric positive semidefinite
//! with the constants as null space; with shift > 0 it is SPD.

use crate::error::{Result, SimError};
use crate::multigrid::VCycle;

/// Five-point variable-coefficient stencil. `mx`/`my` are face coefficients
/// ((nx+1) x ny and nx x (ny+1), boundary faces zero).
#[derive(Debug, Clone)]
pub struct StencilOp {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub shift: f64,
    pub scale: f64,
    pub mx: Vec<f64>,
    pub my: Vec<f64>,
}

impl StencilOp {
    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    fn xi(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    #[inline]
    fn yi(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// y = shift x + scale (-div(m grad x)).
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let (nx, ny) = (self.nx, self.ny);
        let idx2 = 1.0 / (self.dx * self.dx);
        let idy2 = 1.0 / (self.dy * self.dy);
        for j in 0..ny {
            for i in 0..nx {
                let c = j * nx + i;
                let xc = x[c];
                let mut acc = 0.0;
                let mw = self.mx[self.xi(i, j)];
                if mw != 0.0 {
                    acc += mw * (xc - x[c - 1]) * idx2;
                }
                let me = self.mx[self.xi(i + 1, j)];
                if me != 0.0 {
                    acc += me * (xc - x[c + 1]) * idx2;
                }
                let ms = self.my[self.yi(i, j)];
                if ms != 0.0 {
                    acc += ms * (xc - x[c - nx]) * idy2;
                }
                let mn = self.my[self.yi(i, j + 1)];
                if mn != 0.0 {
                    acc += mn * (xc - x[c + nx]) * idy2;
                }
                y[c] = self.shift * xc + self.scale * acc;
            }
        }
    }

    /// Diagonal of the operator (for Jacobi smoothing/preconditioning).
    pub fn diagonal(&self) -> Vec<f64> {
        let (nx, ny) = (self.nx, self.ny);
        let idx2 = 1.0 / (self.dx * self.dx);
        let idy2 = 1.0 / (self.dy * self.dy);
        let mut d = vec![0.0; self.len()];
        for j in 0..ny {
            for i in 0..nx {
                let c = j * nx + i;
                let sum = (self.mx[self.xi(i, j)] + self.mx[self.xi(i + 1, j)]) * idx2
                    + (self.my[self.yi(i, j)] + self.my[self.yi(i, j + 1)]) * idy2;
                d[c] = self.shift + self.scale * sum;
            }
        }
        d
    }

    /// Constant-coefficient Laplacian-style operator (m = 1 on interior faces).
    pub fn unit_coefficients(nx: usize, ny: usize, dx: f64, dy: f64, shift: f64, scale: f64) -> Self {
        let mut mx = vec![0.0; (nx + 1) * ny];
        let mut my = vec![0.0; nx * (ny + 1)];
        for j in 0..ny {
            for i in 1..nx {
                mx[j * (nx + 1) + i] = 1.0;
            }
        }
        for j in 1..ny {
            for i in 0..nx {
                my[j * nx + i] = 1.0;
            }
        }
        Self {
            nx,
            ny,
            dx,
            dy,
            shift,
            scale,
            mx,
            my,
        }
    }
}

/// Preconditioner choices for the CG solves.
pub enum Precond {
    Identity,
    Jacobi(Vec<f64>),
    Multigrid(VCycle),
}

impl Precond {
    pub fn jacobi(op: &StencilOp) -> Self {
        let inv = op
            .diagonal()
            .into_iter()
            .map(|d| if d != 0.0 { 1.0 / d } else { 0.0 })
            .collect();
        Precond::Jacobi(inv)
    }

    fn apply(&mut self, r: &[f64], z: &mut [f64]) {
        match self {
            Precond::Identity => z.copy_from_slice(r),
            Precond::Jacobi(inv) => {
                for ((z, r), d) in z.iter_mut().zip(r).zip(inv.iter()) {
                    *z = r * d;
                }
            }
            Precond::Multigrid(v) => v.apply(r, z),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CgStats {
    pub iterations: usize,
    /// Final residual 2-norm relative to the RHS 2-norm.
    pub rel_residual: f64,
    /// Final residual max-norm (absolute).
    pub residual_inf: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, &v| m.max(v.abs()))
}

fn subtract_mean(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

/// Preconditioned CG for `op * x = b`, warm-started from the incoming `x`.
///
/// Stops when ||r||_2 <= tol ||b||_2 and, if `enforce_inf` is set, also
/// ||r||_inf <= tol ||b||_inf. With `project_mean` the iterates and residuals
/// are kept orthogonal to the constants, which handles the pure-Neumann null
/// space without pinning a cell.
pub fn pcg(
    op: &StencilOp,
    pre: &mut Precond,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
    enforce_inf: bool,
    project_mean: bool,
    context: &'static str,
) -> Result<CgStats> {
    let n = op.len();
    assert_eq!(b.len(), n);
    assert_eq!(x.len(), n);

    let bnorm = dot(b, b).sqrt();
    let binf = max_abs(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgStats {
            iterations: 0,
            rel_residual: 0.0,
            residual_inf: 0.0,
        });
    }

    if project_mean {
        subtract_mean(x);
    }

    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ap = vec![0.0; n];

    op.apply(x, &mut r);
    for (r, b) in r.iter_mut().zip(b) {
        *r = b - *r;
    }
    if project_mean {
        subtract_mean(&mut r);
    }

    let converged = |rn: f64, ri: f64| rn <= tol * bnorm && (!enforce_inf || ri <= tol * binf);

    let mut rnorm = dot(&r, &r).sqrt();
    let mut rinf = max_abs(&r);
    if converged(rnorm, rinf) {
        return Ok(CgStats {
            iterations: 0,
            rel_residual: rnorm / bnorm,
            residual_inf: rinf,
        });
    }

    pre.apply(&r, &mut z);
    if project_mean {
        subtract_mean(&mut z);
    }
    p.copy_from_slice(&z);
    let mut rz = dot(&r, &z);

    for it in 1..=max_iter {
        op.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            // Indefinite preconditioned direction; bail out as non-convergence.
            return Err(SimError::NonConvergence {
                context,
                iterations: it,
                residual: rnorm / bnorm,
            });
        }
        let alpha = rz / pap;
        for ((x, r), (p, ap)) in x.iter_mut().zip(r.iter_mut()).zip(p.iter().zip(&ap)) {
            *x += alpha * p;
            *r -= alpha * ap;
        }
        if project_mean && it % 32 == 0 {
            subtract_mean(&mut r);
        }
        rnorm = dot(&r, &r).sqrt();
        rinf = max_abs(&r);
        if converged(rnorm, rinf) {
            if project_mean {
                subtract_mean(x);
            }
            return Ok(CgStats {
                iterations: it,
                rel_residual: rnorm / bnorm,
                residual_inf: rinf,
            });
        }
        pre.apply(&r, &mut z);
        if project_mean {
            subtract_mean(&mut z);
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (p, z) in p.iter_mut().zip(&z) {
            *p = z + beta * *p;
        }
    }

    Err(SimError::NonConvergence {
        context,
        iterations: max_iter,
        residual: rnorm / bnorm,
    })
}
