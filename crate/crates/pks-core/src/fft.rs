//! Minimal 2D complex FFT used for free-space convolution and the spectral
//! diffusion step. Row pass in place, column pass through a gather buffer.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

pub(crate) struct Fft2 {
    size: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(size: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            size,
            fwd: planner.plan_fft_forward(size),
            inv: planner.plan_fft_inverse(size),
        }
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }

    fn transform(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.size;
        debug_assert_eq!(data.len(), n * n);
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        for row in data.chunks_exact_mut(n) {
            fft.process_with_scratch(row, &mut scratch);
        }
        let mut col = vec![Complex64::default(); n];
        for i in 0..n {
            for j in 0..n {
                col[j] = data[j * n + i];
            }
            fft.process_with_scratch(&mut col, &mut scratch);
            for j in 0..n {
                data[j * n + i] = col[j];
            }
        }
    }

    /// Unnormalized forward transform.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.fwd.clone());
    }

    /// Inverse transform normalized by 1/size².
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inv.clone());
        let scale = 1.0 / (self.size * self.size) as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}
