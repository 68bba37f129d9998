//! Periodic box discretization of R^n (n = 1, 2, 3) and the discrete
//! calculus every other module consumes.
//!
//! Cells are cubes of side `h = 2L/N`, centers at `-L + (i + 1/2) h` per
//! axis, row-major ordering (last axis fastest). Indices wrap periodically:
//! cell `i` and `i + N` address the same cell. The grid stores `(n, L, N)`
//! and derives `h`, so `h * N = 2L` holds by construction.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Spatial dimension, 1..=3.
    pub n: usize,
    /// Half-width of the box; the domain is [-L, L)^n.
    pub l: f64,
    /// Cells per axis (even, >= 8).
    pub cells: usize,
}

impl GridSpec {
    /// Builds a grid, rejecting odd N, N < 8, nonpositive L and n outside 1..=3.
    pub fn new(n: usize, l: f64, cells: usize) -> Result<Self> {
        if !(1..=3).contains(&n) {
            return Err(Error::InvalidGrid(format!("dimension n={n} not in 1..=3")));
        }
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::InvalidGrid(format!("half-width L={l} must be positive")));
        }
        if cells % 2 != 0 {
            return Err(Error::InvalidGrid(format!("N={cells} must be even")));
        }
        if cells < 8 {
            return Err(Error::InvalidGrid(format!("N={cells} must be >= 8")));
        }
        Ok(GridSpec { n, l, cells })
    }

    /// Cell spacing h = 2L/N.
    pub fn h(&self) -> f64 {
        2.0 * self.l / self.cells as f64
    }

    /// Total cell count N^n.
    pub fn cell_count(&self) -> usize {
        self.cells.pow(self.n as u32)
    }

    /// Cell volume h^n.
    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.n as i32)
    }

    /// Center coordinate of index i along one axis.
    pub fn coord(&self, i: usize) -> f64 {
        -self.l + (i as f64 + 0.5) * self.h()
    }

    /// Per-axis indices of a flat cell index (row-major, last axis fastest).
    pub fn unravel(&self, flat: usize) -> [usize; 3] {
        let n = self.cells;
        match self.n {
            1 => [flat, 0, 0],
            2 => [flat / n, flat % n, 0],
            _ => [flat / (n * n), (flat / n) % n, flat % n],
        }
    }

    /// Flat index from per-axis indices (unwrapped inputs allowed via modulo).
    pub fn ravel(&self, idx: [usize; 3]) -> usize {
        let n = self.cells;
        match self.n {
            1 => idx[0] % n,
            2 => (idx[0] % n) * n + idx[1] % n,
            _ => ((idx[0] % n) * n + idx[1] % n) * n + idx[2] % n,
        }
    }

    /// Flat index of the periodic neighbor one cell along `axis` (+1 or -1).
    pub fn neighbor(&self, flat: usize, axis: usize, dir: isize) -> usize {
        let n = self.cells;
        let mut idx = self.unravel(flat);
        idx[axis] = (idx[axis] + n).wrapping_add_signed(dir) % n;
        self.ravel(idx)
    }

    /// Cell-center position of a flat index.
    pub fn position(&self, flat: usize) -> [f64; 3] {
        let idx = self.unravel(flat);
        let mut x = [0.0; 3];
        for d in 0..self.n {
            x[d] = self.coord(idx[d]);
        }
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    /// One value per cell face (component d lives on the face between cell i
    /// and its +1 neighbor along axis d).
    Face,
    /// One vector sample per cell center.
    Center,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    /// Simulation time stamp of the sample.
    pub time: f64,
}

impl ScalarField {
    pub fn zeros(grid: GridSpec) -> Self {
        ScalarField {
            grid,
            values: vec![0.0; grid.cell_count()],
            time: 0.0,
        }
    }

    pub fn constant(grid: GridSpec, c: f64) -> Self {
        ScalarField {
            grid,
            values: vec![c; grid.cell_count()],
            time: 0.0,
        }
    }

    /// Samples f(x) at cell centers.
    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.cell_count())
            .map(|i| {
                let x = grid.position(i);
                f(&x[..grid.n])
            })
            .collect();
        ScalarField {
            grid,
            values,
            time: 0.0,
        }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |a, &v| a.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Pointwise map into a new field with the same binding and time.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
            time: self.time,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub grid: GridSpec,
    /// Component-major layout: components[d * N^n + cell].
    pub components: Vec<f64>,
    pub orientation: Orientation,
}

impl VectorField {
    pub fn zeros(grid: GridSpec, orientation: Orientation) -> Self {
        VectorField {
            grid,
            components: vec![0.0; grid.n * grid.cell_count()],
            orientation,
        }
    }

    pub fn component(&self, d: usize) -> &[f64] {
        let m = self.grid.cell_count();
        &self.components[d * m..(d + 1) * m]
    }

    pub fn component_mut(&mut self, d: usize) -> &mut [f64] {
        let m = self.grid.cell_count();
        &mut self.components[d * m..(d + 1) * m]
    }

    /// Max over cells of the Euclidean component magnitude.
    pub fn max_magnitude(&self) -> f64 {
        let m = self.grid.cell_count();
        let mut best = 0.0f64;
        for cell in 0..m {
            let mut s = 0.0;
            for d in 0..self.grid.n {
                let v = self.components[d * m + cell];
                s += v * v;
            }
            best = best.max(s);
        }
        best.sqrt()
    }
}

fn check_binding(a: &GridSpec, b: &GridSpec) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// Centered second-order periodic gradient, sampled at cell centers.
/// Exact on constants.
pub fn gradient(f: &ScalarField) -> VectorField {
    let grid = f.grid;
    let m = grid.cell_count();
    let inv2h = 1.0 / (2.0 * grid.h());
    let mut out = VectorField::zeros(grid, Orientation::Center);
    for d in 0..grid.n {
        let comp = out.component_mut(d);
        for cell in 0..m {
            let fp = f.values[grid.neighbor(cell, d, 1)];
            let fm = f.values[grid.neighbor(cell, d, -1)];
            comp[cell] = (fp - fm) * inv2h;
        }
    }
    out
}

/// Face-interpolated gradient: component d at cell i is
/// (f[i + e_d] - f[i]) / h, living on the face between them.
/// `divergence(face_gradient(f))` equals `laplacian(f)` to round-off.
pub fn face_gradient(f: &ScalarField) -> VectorField {
    let grid = f.grid;
    let m = grid.cell_count();
    let invh = 1.0 / grid.h();
    let mut out = VectorField::zeros(grid, Orientation::Face);
    for d in 0..grid.n {
        let comp = out.component_mut(d);
        for cell in 0..m {
            comp[cell] = (f.values[grid.neighbor(cell, d, 1)] - f.values[cell]) * invh;
        }
    }
    out
}

/// Divergence of a face-oriented field: (F_d[i] - F_d[i - e_d]) / h summed
/// over axes. Telescopes, so `integrate(divergence(F))` vanishes on the
/// periodic box.
pub fn divergence(field: &VectorField) -> Result<ScalarField> {
    if field.orientation != Orientation::Face {
        return Err(Error::OrientationMismatch);
    }
    let grid = field.grid;
    let m = grid.cell_count();
    let invh = 1.0 / grid.h();
    let mut out = ScalarField::zeros(grid);
    for d in 0..grid.n {
        let comp = field.component(d);
        for cell in 0..m {
            let prev = grid.neighbor(cell, d, -1);
            out.values[cell] += (comp[cell] - comp[prev]) * invh;
        }
    }
    Ok(out)
}

/// Standard 2n+1-point periodic Laplacian.
pub fn laplacian(f: &ScalarField) -> ScalarField {
    let grid = f.grid;
    let m = grid.cell_count();
    let invh2 = 1.0 / (grid.h() * grid.h());
    let mut out = ScalarField::zeros(grid);
    out.time = f.time;
    for d in 0..grid.n {
        for cell in 0..m {
            let fp = f.values[grid.neighbor(cell, d, 1)];
            let fm = f.values[grid.neighbor(cell, d, -1)];
            out.values[cell] += (fp - 2.0 * f.values[cell] + fm) * invh2;
        }
    }
    out
}

/// h^n-weighted cell sum.
pub fn integrate(f: &ScalarField) -> f64 {
    f.grid.cell_volume() * f.values.iter().sum::<f64>()
}

/// Binding check exposed for operations combining two fields.
pub fn same_grid(a: &ScalarField, b: &ScalarField) -> Result<()> {
    check_binding(&a.grid, &b.grid)
}
