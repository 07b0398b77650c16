use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Square 2-D FFT built from row transforms and transposes.
#[derive(Clone)]
pub(crate) struct Fft2 {
    side: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub(crate) fn new(side: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            side,
            forward: planner.plan_fft_forward(side),
            inverse: planner.plan_fft_inverse(side),
        }
    }

    pub(crate) fn forward_real(&self, data: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.apply(&mut buf, &self.forward);
        buf
    }

    /// Unnormalized inverse followed by `1/N²`, returning the real part.
    pub(crate) fn inverse_real(&self, mut buf: Vec<Complex64>) -> Vec<f64> {
        self.apply(&mut buf, &self.inverse);
        let norm = 1.0 / (self.side * self.side) as f64;
        buf.into_iter().map(|c| c.re * norm).collect()
    }

    fn apply(&self, buf: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        debug_assert_eq!(buf.len(), self.side * self.side);
        fft.process(buf);
        transpose_in_place(buf, self.side);
        fft.process(buf);
        transpose_in_place(buf, self.side);
    }
}

fn transpose_in_place(buf: &mut [Complex64], side: usize) {
    for r in 0..side {
        for c in (r + 1)..side {
            buf.swap(r * side + c, c * side + r);
        }
    }
}

/// Signed frequency of FFT index `k` on an `n`-point grid.
#[inline]
pub(crate) fn signed_frequency(k: usize, n: usize) -> f64 {
    if k < n.div_ceil(2) {
        k as f64
    } else {
        k as f64 - n as f64
    }
}
