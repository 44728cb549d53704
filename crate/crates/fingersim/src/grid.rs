//! Structured 2D rectangular grid with cell-centered scalars, face-staggered
//! vectors and the discrete calculus connecting them.
//!
//! Scalars (concentration, pressure) live at cell centers; vector quantities
//! (velocity, fluxes, face mobilities) live on the MAC-staggered faces. The
//! discrete gradient and divergence defined here are adjoint up to sign under
//! the cell inner product, which is what lets conservation and maximum
//! principle arguments carry over to the discrete level.

use crate::error::{Result, SimError};

/// 2D rectangular cell-centered grid. Cell (i, j) has its center at
/// ((i + 1/2) dx, (j + 1/2) dy) with 0 <= i < nx, 0 <= j < ny.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructuredGrid {
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
}

impl StructuredGrid {
    pub fn new(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Self> {
        let mut errs = Vec::new();
        if !(lx > 0.0) || !lx.is_finite() {
            errs.push(format!("grid: lx must be finite and > 0 (got {lx})"));
        }
        if !(ly > 0.0) || !ly.is_finite() {
            errs.push(format!("grid: ly must be finite and > 0 (got {ly})"));
        }
        if nx < 2 {
            errs.push(format!("grid: nx must be >= 2 (got {nx})"));
        }
        if ny < 2 {
            errs.push(format!("grid: ny must be >= 2 (got {ny})"));
        }
        if errs.is_empty() {
            Ok(Self { lx, ly, nx, ny })
        } else {
            Err(SimError::InvalidConfig(errs))
        }
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    #[inline]
    pub fn dy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    #[inline]
    pub fn cell_count(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    #[inline]
    pub fn domain_area(&self) -> f64 {
        self.lx * self.ly
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx && j < self.ny);
        j * self.nx + i
    }

    #[inline]
    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.dx(), (j as f64 + 0.5) * self.dy())
    }
}

/// Scalar field sampled at cell centers.
#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    grid: StructuredGrid,
    values: Vec<f64>,
}

impl CellField {
    pub fn constant(grid: StructuredGrid, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.cell_count()],
        }
    }

    pub fn zeros(grid: StructuredGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Sample a function of the cell-center coordinates.
    pub fn from_fn(grid: StructuredGrid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.cell_count());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let (x, y) = grid.cell_center(i, j);
                values.push(f(x, y));
            }
        }
        Self { grid, values }
    }

    pub fn from_values(grid: StructuredGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cell_count() {
            return Err(SimError::GridMismatch {
                expected_nx: grid.nx,
                expected_ny: grid.ny,
                got_nx: values.len(),
                got_ny: 1,
            });
        }
        Ok(Self { grid, values })
    }

    #[inline]
    pub fn grid(&self) -> &StructuredGrid {
        &self.grid
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.grid.idx(i, j);
        self.values[k] = v;
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Vector quantity on the staggered faces: `x` holds (nx+1) x ny values on
/// vertical faces, `y` holds nx x (ny+1) values on horizontal faces. When the
/// field represents a velocity, the boundary-normal entries are zero (no-flux).
#[derive(Debug, Clone, PartialEq)]
pub struct FaceField {
    grid: StructuredGrid,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl FaceField {
    pub fn zeros(grid: StructuredGrid) -> Self {
        Self {
            grid,
            x: vec![0.0; (grid.nx + 1) * grid.ny],
            y: vec![0.0; grid.nx * (grid.ny + 1)],
        }
    }

    #[inline]
    pub fn grid(&self) -> &StructuredGrid {
        &self.grid
    }

    /// Index of the vertical face left of cell (i, j); i ranges over 0..=nx.
    #[inline]
    pub fn xi(&self, i: usize, j: usize) -> usize {
        debug_assert!(i <= self.grid.nx && j < self.grid.ny);
        j * (self.grid.nx + 1) + i
    }

    /// Index of the horizontal face below cell (i, j); j ranges over 0..=ny.
    #[inline]
    pub fn yi(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.grid.nx && j <= self.grid.ny);
        j * self.grid.nx + i
    }

    pub fn zero_boundary_normals(&mut self) {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        for j in 0..ny {
            let l = self.xi(0, j);
            let r = self.xi(nx, j);
            self.x[l] = 0.0;
            self.x[r] = 0.0;
        }
        for i in 0..nx {
            let b = self.yi(i, 0);
            let t = self.yi(i, ny);
            self.y[b] = 0.0;
            self.y[t] = 0.0;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.x
            .iter()
            .chain(self.y.iter())
            .fold(0.0_f64, |m, &v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(self.y.iter()).all(|v| v.is_finite())
    }
}

/// Discrete gradient at faces: interior x-face value (f[i,j] - f[i-1,j]) / dx,
/// analogously in y. Boundary faces are zero (homogeneous Neumann, mirror cells).
pub fn gradient_at_faces(f: &CellField) -> FaceField {
    let g = *f.grid();
    let (nx, ny) = (g.nx, g.ny);
    let (dx, dy) = (g.dx(), g.dy());
    let mut out = FaceField::zeros(g);
    for j in 0..ny {
        for i in 1..nx {
            let k = out.xi(i, j);
            out.x[k] = (f.get(i, j) - f.get(i - 1, j)) / dx;
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            let k = out.yi(i, j);
            out.y[k] = (f.get(i, j) - f.get(i, j - 1)) / dy;
        }
    }
    out
}

/// Discrete divergence at cells: (Fx[i+1,j] - Fx[i,j])/dx + (Fy[i,j+1] - Fy[i,j])/dy.
/// Adjoint (up to sign) of [`gradient_at_faces`] under the cell inner product.
pub fn divergence(f: &FaceField) -> CellField {
    let g = *f.grid();
    let (nx, ny) = (g.nx, g.ny);
    let (dx, dy) = (g.dx(), g.dy());
    let mut out = CellField::zeros(g);
    for j in 0..ny {
        for i in 0..nx {
            let v = (f.x[f.xi(i + 1, j)] - f.x[f.xi(i, j)]) / dx
                + (f.y[f.yi(i, j + 1)] - f.y[f.yi(i, j)]) / dy;
            out.set(i, j, v);
        }
    }
    out
}

/// Harmonic mean of a strictly positive cell field on interior faces; boundary
/// faces copy the adjacent cell value. Preserves flux continuity across
/// discontinuous coefficients.
pub fn face_harmonic_mean(f: &CellField) -> Result<FaceField> {
    let min = f.min();
    if !(min > 0.0) {
        return Err(SimError::NonPositiveField { value: min });
    }
    let g = *f.grid();
    let (nx, ny) = (g.nx, g.ny);
    let mut out = FaceField::zeros(g);
    for j in 0..ny {
        let l = out.xi(0, j);
        out.x[l] = f.get(0, j);
        let r = out.xi(nx, j);
        out.x[r] = f.get(nx - 1, j);
        for i in 1..nx {
            let (a, b) = (f.get(i - 1, j), f.get(i, j));
            let k = out.xi(i, j);
            out.x[k] = 2.0 * a * b / (a + b);
        }
    }
    for i in 0..nx {
        let b = out.yi(i, 0);
        out.y[b] = f.get(i, 0);
        let t = out.yi(i, ny);
        out.y[t] = f.get(i, ny - 1);
    }
    for j in 1..ny {
        for i in 0..nx {
            let (a, b) = (f.get(i, j - 1), f.get(i, j));
            let k = out.yi(i, j);
            out.y[k] = 2.0 * a * b / (a + b);
        }
    }
    Ok(out)
}

/// Arithmetic mean at faces; boundary faces copy the adjacent cell value.
pub fn face_arithmetic_mean(f: &CellField) -> FaceField {
    let g = *f.grid();
    let (nx, ny) = (g.nx, g.ny);
    let mut out = FaceField::zeros(g);
    for j in 0..ny {
        let l = out.xi(0, j);
        out.x[l] = f.get(0, j);
        let r = out.xi(nx, j);
        out.x[r] = f.get(nx - 1, j);
        for i in 1..nx {
            let k = out.xi(i, j);
            out.x[k] = 0.5 * (f.get(i - 1, j) + f.get(i, j));
        }
    }
    for i in 0..nx {
        let b = out.yi(i, 0);
        out.y[b] = f.get(i, 0);
        let t = out.yi(i, ny);
        out.y[t] = f.get(i, ny - 1);
    }
    for j in 1..ny {
        for i in 0..nx {
            let k = out.yi(i, j);
            out.y[k] = 0.5 * (f.get(i, j - 1) + f.get(i, j));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    Integral,
    Mean,
    L1,
    L2,
    Linf,
    Variance,
}

/// Volume-weighted reductions over a cell field. `L2` is the norm (not its
/// square); `Variance` is the mean of (f - mean)^2.
pub fn reduce(f: &CellField, kind: Reduction) -> f64 {
    let da = f.grid().cell_area();
    let area = f.grid().domain_area();
    match kind {
        Reduction::Integral => f.values().iter().sum::<f64>() * da,
        Reduction::Mean => f.values().iter().sum::<f64>() * da / area,
        Reduction::L1 => f.values().iter().map(|v| v.abs()).sum::<f64>() * da,
        Reduction::L2 => (f.values().iter().map(|v| v * v).sum::<f64>() * da).sqrt(),
        Reduction::Linf => f.values().iter().fold(0.0_f64, |m, &v| m.max(v.abs())),
        Reduction::Variance => {
            let mean = reduce(f, Reduction::Mean);
            f.values()
                .iter()
                .map(|v| {
                    let d = v - mean;
                    d * d
                })
                .sum::<f64>()
                * da
                / area
        }
    }
}

/// Cell inner product sum_ij f g dx dy; used by the adjointness tests.
pub fn cell_inner(a: &CellField, b: &CellField) -> f64 {
    let da = a.grid().cell_area();
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| x * y)
        .sum::<f64>()
        * da
}

/// Face inner product with the same volume weight on both components.
pub fn face_inner(a: &FaceField, b: &FaceField) -> f64 {
    let da = a.grid().cell_area();
    let sx: f64 = a.x.iter().zip(&b.x).map(|(x, y)| x * y).sum();
    let sy: f64 = a.y.iter().zip(&b.y).map(|(x, y)| x * y).sum();
    (sx + sy) * da
}
