//! Geometric multigrid V-cycle used as a CG preconditioner for the pressure
//! solve.
//!
//! Cell-centered coarsening by a factor of 2 in each direction: residuals are
//! restricted by 4-cell averaging, corrections prolonged by piecewise-constant
//! injection (the transpose up to a scalar, so the cycle stays symmetric), and
//! the coarse operator is re-discretized from face coefficients averaged over
//! the two fine faces making up each coarse face. Smoothing is damped Jacobi
//! with equal pre/post sweeps, which keeps the preconditioner symmetric and
//! positive definite for CG.

use crate::linalg::StencilOp;

const COARSEST_MIN: usize = 8;
const COARSE_SWEEPS: usize = 60;

struct Level {
    op: StencilOp,
    inv_diag: Vec<f64>,
    // Work vectors for the cycle.
    r: Vec<f64>,
    z: Vec<f64>,
    tmp: Vec<f64>,
}

pub struct VCycle {
    levels: Vec<Level>,
    sweeps: usize,
    omega: f64,
}

fn can_coarsen(op: &StencilOp) -> bool {
    op.nx % 2 == 0 && op.ny % 2 == 0 && op.nx.min(op.ny) > COARSEST_MIN
}

fn coarsen(fine: &StencilOp) -> StencilOp {
    let (nx, ny) = (fine.nx / 2, fine.ny / 2);
    let mut mx = vec![0.0; (nx + 1) * ny];
    let mut my = vec![0.0; nx * (ny + 1)];
    // Coarse x-face (I, J) covers fine x-faces (2I, 2J) and (2I, 2J+1).
    for jj in 0..ny {
        for ii in 0..=nx {
            let a = fine.mx[(2 * jj) * (fine.nx + 1) + 2 * ii];
            let b = fine.mx[(2 * jj + 1) * (fine.nx + 1) + 2 * ii];
            mx[jj * (nx + 1) + ii] = 0.5 * (a + b);
        }
    }
    for jj in 0..=ny {
        for ii in 0..nx {
            let a = fine.my[(2 * jj) * fine.nx + 2 * ii];
            let b = fine.my[(2 * jj) * fine.nx + 2 * ii + 1];
            my[jj * nx + ii] = 0.5 * (a + b);
        }
    }
    StencilOp {
        nx,
        ny,
        dx: fine.dx * 2.0,
        dy: fine.dy * 2.0,
        shift: fine.shift,
        scale: fine.scale,
        mx,
        my,
    }
}

fn make_level(op: StencilOp) -> Level {
    let inv_diag = op
        .diagonal()
        .into_iter()
        .map(|d| if d != 0.0 { 1.0 / d } else { 0.0 })
        .collect();
    let n = op.len();
    Level {
        op,
        inv_diag,
        r: vec![0.0; n],
        z: vec![0.0; n],
        tmp: vec![0.0; n],
    }
}

impl VCycle {
    pub fn new(fine: &StencilOp) -> Self {
        let mut levels = vec![make_level(fine.clone())];
        while can_coarsen(&levels.last().unwrap().op) {
            let next = coarsen(&levels.last().unwrap().op);
            levels.push(make_level(next));
        }
        Self {
            levels,
            sweeps: 2,
            omega: 0.8,
        }
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// One V-cycle applied to `A z = r`, starting from z = 0.
    pub fn apply(&mut self, r: &[f64], z: &mut [f64]) {
        self.levels[0].r.copy_from_slice(r);
        let last = self.levels.len() - 1;

        // Descent: smooth from zero, restrict the residual.
        for l in 0..last {
            {
                let lev = &mut self.levels[l];
                lev.z.iter_mut().for_each(|v| *v = 0.0);
                smooth(lev, self.sweeps, self.omega);
                residual(lev);
            }
            let (fine, coarse) = self.levels.split_at_mut(l + 1);
            restrict(&fine[l].tmp, fine[l].op.nx, &mut coarse[0].r, coarse[0].op.nx);
        }

        // Coarsest level: damped Jacobi sweeps stand in for a direct solve.
        {
            let lev = &mut self.levels[last];
            lev.z.iter_mut().for_each(|v| *v = 0.0);
            smooth(lev, COARSE_SWEEPS, self.omega);
        }

        // Ascent: prolong the correction, post-smooth.
        for l in (0..last).rev() {
            let (fine, coarse) = self.levels.split_at_mut(l + 1);
            prolong_add(&coarse[0].z, coarse[0].op.nx, &mut fine[l].z, fine[l].op.nx);
            smooth(&mut self.levels[l], self.sweeps, self.omega);
        }

        z.copy_from_slice(&self.levels[0].z);
    }
}

/// z += omega * D^{-1} (r - A z), repeated.
fn smooth(lev: &mut Level, sweeps: usize, omega: f64) {
    for _ in 0..sweeps {
        lev.op.apply(&lev.z, &mut lev.tmp);
        for ((z, &r), (&az, &d)) in lev
            .z
            .iter_mut()
            .zip(lev.r.iter())
            .zip(lev.tmp.iter().zip(lev.inv_diag.iter()))
        {
            *z += omega * d * (r - az);
        }
    }
}

/// tmp = r - A z.
fn residual(lev: &mut Level) {
    lev.op.apply(&lev.z, &mut lev.tmp);
    for (t, &r) in lev.tmp.iter_mut().zip(lev.r.iter()) {
        *t = r - *t;
    }
}

fn restrict(fine: &[f64], fine_nx: usize, coarse: &mut [f64], coarse_nx: usize) {
    let coarse_ny = coarse.len() / coarse_nx;
    for jj in 0..coarse_ny {
        for ii in 0..coarse_nx {
            let f00 = fine[(2 * jj) * fine_nx + 2 * ii];
            let f10 = fine[(2 * jj) * fine_nx + 2 * ii + 1];
            let f01 = fine[(2 * jj + 1) * fine_nx + 2 * ii];
            let f11 = fine[(2 * jj + 1) * fine_nx + 2 * ii + 1];
            coarse[jj * coarse_nx + ii] = 0.25 * (f00 + f10 + f01 + f11);
        }
    }
}

fn prolong_add(coarse: &[f64], coarse_nx: usize, fine: &mut [f64], fine_nx: usize) {
    let coarse_ny = coarse.len() / coarse_nx;
    for jj in 0..coarse_ny {
        for ii in 0..coarse_nx {
            let v = coarse[jj * coarse_nx + ii];
            fine[(2 * jj) * fine_nx + 2 * ii] += v;
            fine[(2 * jj) * fine_nx + 2 * ii + 1] += v;
            fine[(2 * jj + 1) * fine_nx + 2 * ii] += v;
            fine[(2 * jj + 1) * fine_nx + 2 * ii + 1] += v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{pcg, Precond};

    #[test]
    fn builds_expected_hierarchy() {
        let op = StencilOp::unit_coefficients(96, 192, 1.0, 1.0, 0.0, 1.0);
        let v = VCycle::new(&op);
        assert_eq!(v.depth(), 5); // 96x192 -> 48x96 -> 24x48 -> 12x24 -> 6x12
    }

    #[test]
    fn vcycle_preconditioner_is_symmetric() {
        let op = StencilOp::unit_coefficients(16, 16, 1.0 / 16.0, 1.0 / 16.0, 0.0, 1.0);
        let mut v = VCycle::new(&op);
        let n = op.len();
        let mut seed = 5u64;
        let mut rnd = move || {
            seed = seed
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let a: Vec<f64> = (0..n).map(|_| rnd()).collect();
        let b: Vec<f64> = (0..n).map(|_| rnd()).collect();
        let mut ma = vec![0.0; n];
        let mut mb = vec![0.0; n];
        v.apply(&a, &mut ma);
        v.apply(&b, &mut mb);
        let lhs: f64 = ma.iter().zip(&b).map(|(x, y)| x * y).sum();
        let rhs: f64 = a.iter().zip(&mb).map(|(x, y)| x * y).sum();
        assert!(
            (lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0),
            "lhs={lhs} rhs={rhs}"
        );
    }

    #[test]
    fn mg_pcg_beats_jacobi_on_poisson() {
        let n = 64;
        let op = StencilOp::unit_coefficients(n, n, 1.0 / n as f64, 1.0 / n as f64, 0.0, 1.0);
        let len = op.len();
        // Zero-mean RHS.
        let mut b: Vec<f64> = (0..len)
            .map(|k| ((k % 17) as f64 - 8.0) + ((k / 7) % 5) as f64 * 0.3)
            .collect();
        let mean = b.iter().sum::<f64>() / len as f64;
        b.iter_mut().for_each(|v| *v -= mean);

        let mut x_mg = vec![0.0; len];
        let mut pre_mg = Precond::Multigrid(VCycle::new(&op));
        let s_mg = pcg(&op, &mut pre_mg, &b, &mut x_mg, 1e-10, 10000, false, true, "mg").unwrap();

        let mut x_j = vec![0.0; len];
        let mut pre_j = Precond::jacobi(&op);
        let s_j = pcg(&op, &mut pre_j, &b, &mut x_j, 1e-10, 10000, false, true, "jacobi").unwrap();

        assert!(s_mg.iterations < s_j.iterations / 3, "mg={} jacobi={}", s_mg.iterations, s_j.iterations);
        // Both reach the same solution up to tolerance.
        let diff = x_mg
            .iter()
            .zip(&x_j)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        assert!(diff < 1e-6, "diff={diff}");
    }
}
