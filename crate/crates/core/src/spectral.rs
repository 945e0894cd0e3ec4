//! Thin helpers over `rustfft` for row/column passes on row-major 2D arrays.
//!
//! All transforms are unnormalized; callers fold `1/len` into whatever
//! multiplier they apply between the forward and inverse pass.

use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
pub(crate) struct AxisFft {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    column: Vec<Complex64>,
}

impl AxisFft {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            len,
            forward,
            inverse,
            scratch: vec![Complex64::default(); scratch_len],
            column: vec![Complex64::default(); len],
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn forward(&mut self, data: &mut [Complex64]) {
        self.forward.process_with_scratch(data, &mut self.scratch);
    }

    pub fn inverse(&mut self, data: &mut [Complex64]) {
        self.inverse.process_with_scratch(data, &mut self.scratch);
    }

    /// Forward transform of every row, multiply row `r` element-wise by
    /// `factor(r, k)`, inverse transform. Rows must have length `len`.
    pub fn filter_rows<F>(&mut self, a: &mut Array2<Complex64>, mut factor: F)
    where
        F: FnMut(usize, usize) -> Complex64,
    {
        debug_assert_eq!(a.ncols(), self.len);
        let data = a.as_slice_mut().expect("standard layout");
        for (r, row) in data.chunks_exact_mut(self.len).enumerate() {
            self.forward.process_with_scratch(row, &mut self.scratch);
            for (k, z) in row.iter_mut().enumerate() {
                *z *= factor(r, k);
            }
            self.inverse.process_with_scratch(row, &mut self.scratch);
        }
    }

    /// Same as [`filter_rows`](Self::filter_rows) but along columns;
    /// `factor(c, k)` receives the column index and the mode index.
    pub fn filter_cols<F>(&mut self, a: &mut Array2<Complex64>, mut factor: F)
    where
        F: FnMut(usize, usize) -> Complex64,
    {
        debug_assert_eq!(a.nrows(), self.len);
        let ncols = a.ncols();
        let data = a.as_slice_mut().expect("standard layout");
        for c in 0..ncols {
            for (r, z) in self.column.iter_mut().enumerate() {
                *z = data[r * ncols + c];
            }
            self.forward
                .process_with_scratch(&mut self.column, &mut self.scratch);
            for (k, z) in self.column.iter_mut().enumerate() {
                *z *= factor(c, k);
            }
            self.inverse
                .process_with_scratch(&mut self.column, &mut self.scratch);
            for (r, z) in self.column.iter().enumerate() {
                data[r * ncols + c] = *z;
            }
        }
    }

    /// Plain transform of every row in place.
    pub fn rows(&mut self, a: &mut Array2<Complex64>, inverse: bool) {
        let plan = if inverse { &self.inverse } else { &self.forward };
        let data = a.as_slice_mut().expect("standard layout");
        plan.process_with_scratch(data, &mut self.scratch);
    }

    /// Plain transform of every column in place.
    pub fn cols(&mut self, a: &mut Array2<Complex64>, inverse: bool) {
        let ncols = a.ncols();
        let data = a.as_slice_mut().expect("standard layout");
        for c in 0..ncols {
            for (r, z) in self.column.iter_mut().enumerate() {
                *z = data[r * ncols + c];
            }
            if inverse {
                self.inverse
                    .process_with_scratch(&mut self.column, &mut self.scratch);
            } else {
                self.forward
                    .process_with_scratch(&mut self.column, &mut self.scratch);
            }
            for (r, z) in self.column.iter().enumerate() {
                data[r * ncols + c] = *z;
            }
        }
    }
}

/// Unnormalized 2D transform of a square array.
pub(crate) fn fft2(a: &mut Array2<Complex64>, fft: &mut AxisFft, inverse: bool) {
    fft.rows(a, inverse);
    fft.cols(a, inverse);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filter_with_unit_factor_scales_by_len() {
        let mut fft = AxisFft::new(8);
        let mut a = Array2::from_shape_fn((8, 8), |(i, j)| Complex64::new(i as f64, j as f64 * 0.5));
        let orig = a.clone();
        fft.filter_rows(&mut a, |_, _| Complex64::new(1.0 / 8.0, 0.0));
        fft.filter_cols(&mut a, |_, _| Complex64::new(1.0 / 8.0, 0.0));
        let err = (&a - &orig).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(err < 1e-13);
    }
}
