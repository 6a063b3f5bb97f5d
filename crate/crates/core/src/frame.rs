//! Single-channel luminance frames.

use crate::error::{FedError, Result};

/// A row-major grid of real-valued luminance samples on the 0..=255 scale.
#[derive(Debug, Clone, PartialEq)]
pub struct LuminanceFrame {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl LuminanceFrame {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(FedError::InvalidParameter(format!(
                "frame dimensions must be positive, got {height}x{width}"
            )));
        }
        if data.len() != height * width {
            return Err(FedError::InvalidParameter(format!(
                "frame {height}x{width} needs {} samples, got {}",
                height * width,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(FedError::InvalidParameter(format!(
                "non-finite sample at index {bad}"
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0 && value.is_finite());
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    /// Builds a frame by evaluating `f(row, col)` at every sample.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(height > 0 && width > 0);
        let mut data = Vec::with_capacity(height * width);
        for i in 0..height {
            for j in 0..width {
                data.push(f(i, j));
            }
        }
        assert!(data.iter().all(|v| v.is_finite()), "non-finite sample");
        Self {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.width + col] = value;
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn rms(&self) -> f64 {
        (self.data.iter().map(|v| v * v).sum::<f64>() / self.data.len() as f64).sqrt()
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        Self::from_fn(self.height, self.width, |i, j| f(self.get(i, j)))
    }

    pub(crate) fn ensure_same_dims(&self, other: &Self) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(FedError::DimensionMismatch {
                left: self.dims(),
                right: other.dims(),
            });
        }
        Ok(())
    }
}
