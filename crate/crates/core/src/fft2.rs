//! Row-column 2-D FFT over row-major complex buffers.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub(crate) struct Fft2 {
    height: usize,
    width: usize,
    row: Arc<dyn Fft<f64>>,
    col: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn forward(height: usize, width: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            height,
            width,
            row: planner.plan_fft_forward(width),
            col: planner.plan_fft_forward(height),
        }
    }

    pub fn inverse(height: usize, width: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            height,
            width,
            row: planner.plan_fft_inverse(width),
            col: planner.plan_fft_inverse(height),
        }
    }

    /// Unnormalized in-place transform.
    pub fn process(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.height * self.width);
        self.row.process(buf);
        let mut column = vec![Complex64::new(0.0, 0.0); self.height];
        for j in 0..self.width {
            for (i, c) in column.iter_mut().enumerate() {
                *c = buf[i * self.width + j];
            }
            self.col.process(&mut column);
            for (i, c) in column.iter().enumerate() {
                buf[i * self.width + j] = *c;
            }
        }
    }
}

/// Signed integer frequency index of DFT bin `k` out of `n`.
#[inline]
pub(crate) fn signed_index(k: usize, n: usize) -> f64 {
    if k <= n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_inverse_round_trip() {
        let (h, w) = (6, 10);
        let orig: Vec<Complex64> = (0..h * w)
            .map(|k| Complex64::new((k as f64 * 0.37).sin(), 0.0))
            .collect();
        let mut buf = orig.clone();
        Fft2::forward(h, w).process(&mut buf);
        Fft2::inverse(h, w).process(&mut buf);
        for (a, b) in orig.iter().zip(&buf) {
            assert!((a - b / (h * w) as f64).norm() < 1e-12);
        }
    }

    #[test]
    fn dc_bin_is_sum() {
        let mut buf: Vec<Complex64> = (0..12).map(|k| Complex64::new(k as f64, 0.0)).collect();
        Fft2::forward(3, 4).process(&mut buf);
        assert!((buf[0].re - 66.0).abs() < 1e-12);
    }

    #[test]
    fn signed_indices() {
        let got: Vec<f64> = (0..6).map(|k| signed_index(k, 6)).collect();
        assert_eq!(got, vec![0.0, 1.0, 2.0, 3.0, -2.0, -1.0]);
        let got: Vec<f64> = (0..5).map(|k| signed_index(k, 5)).collect();
        assert_eq!(got, vec![0.0, 1.0, 2.0, -2.0, -1.0]);
    }
}
