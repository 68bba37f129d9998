//! FFT machinery for the periodic grid: n-dimensional transforms and the
//! discrete Laplacian symbol used by the elliptic and parabolic v-solvers.

use crate::grid::{GridSpec, ScalarField};
use rustfft::{num_complex::Complex64, Fft, FftPlanner};
use std::sync::Arc;

/// Per-grid FFT plans plus the discrete symbol of -laplacian:
/// sigma(k) = sum_d (2 - 2 cos(2 pi k_d / N)) / h^2.
pub struct SpectralGrid {
    pub grid: GridSpec,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    symbol: Vec<f64>,
    line: Vec<Complex64>,
}

impl SpectralGrid {
    pub fn new(grid: GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(grid.cells);
        let inv = planner.plan_fft_inverse(grid.cells);
        let n = grid.cells;
        let h = grid.h();
        let axis_symbol: Vec<f64> = (0..n)
            .map(|k| {
                let th = std::f64::consts::TAU * k as f64 / n as f64;
                (2.0 - 2.0 * th.cos()) / (h * h)
            })
            .collect();
        let mut symbol = vec![0.0; grid.cell_count()];
        for (flat, s) in symbol.iter_mut().enumerate() {
            let idx = grid.unravel(flat);
            for d in 0..grid.n {
                *s += axis_symbol[idx[d]];
            }
        }
        SpectralGrid {
            grid,
            fwd,
            inv,
            symbol,
            line: vec![Complex64::default(); n],
        }
    }

    /// Discrete symbol of -laplacian at each flat mode index.
    pub fn symbol(&self) -> &[f64] {
        &self.symbol
    }

    fn transform_axis(&mut self, data: &mut [Complex64], axis: usize, forward: bool) {
        let n = self.grid.cells;
        let dim = self.grid.n;
        let plan = if forward { &self.fwd } else { &self.inv };
        if axis == dim - 1 {
            for chunk in data.chunks_exact_mut(n) {
                plan.process(chunk);
            }
            return;
        }
        // stride walk: lines along `axis` with all other indices fixed
        let stride = n.pow((dim - 1 - axis) as u32);
        let blocks = data.len() / (n * stride);
        for b in 0..blocks {
            for off in 0..stride {
                let base = b * n * stride + off;
                for i in 0..n {
                    self.line[i] = data[base + i * stride];
                }
                plan.process(&mut self.line);
                for i in 0..n {
                    data[base + i * stride] = self.line[i];
                }
            }
        }
    }

    /// Forward DFT of a real field (unnormalized).
    pub fn forward(&mut self, f: &ScalarField) -> Vec<Complex64> {
        let mut data: Vec<Complex64> =
            f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        for axis in 0..self.grid.n {
            self.transform_axis(&mut data, axis, true);
        }
        data
    }

    /// Inverse DFT, normalized by N^n; returns the real parts.
    pub fn inverse(&mut self, mut data: Vec<Complex64>) -> Vec<f64> {
        for axis in 0..self.grid.n {
            self.transform_axis(&mut data, axis, false);
        }
        let scale = 1.0 / self.grid.cell_count() as f64;
        data.iter().map(|c| c.re * scale).collect()
    }
}
