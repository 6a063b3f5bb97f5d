//! Contrast threshold model and the foveation-based error sensitivity.
//!
//! The contrast threshold at spatial frequency `f` (cycles/degree) and
//! eccentricity `e` (degrees) is `CT = ct0 * exp(alpha * f * (e + e2) / e2)`.
//! Sensitivity is its reciprocal. Normalizing by foveal sensitivity gives
//! `exp(-(alpha / e2) * f * e)`, which is zeroed above the combined cutoff
//! `min(f_c(e), f_d)`.

use serde::{Deserialize, Serialize};

use crate::error::{FedError, Result};

/// Rounded decay constant for the normalized sensitivity exponent.
pub const STRICT_DECAY: f64 = 0.0461;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsfParams {
    /// Minimal contrast threshold.
    pub ct0: f64,
    /// Spatial frequency decay constant.
    pub alpha: f64,
    /// Half-resolution eccentricity in degrees.
    pub e2: f64,
}

impl Default for CsfParams {
    fn default() -> Self {
        Self {
            ct0: 1.0 / 64.0,
            alpha: 0.106,
            e2: 2.3,
        }
    }
}

impl CsfParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.ct0 > 0.0 && self.ct0 < 1.0) {
            return Err(FedError::InvalidParameter(format!(
                "ct0 must lie in (0, 1), got {}",
                self.ct0
            )));
        }
        if self.alpha.is_nan() || self.alpha <= 0.0 || self.e2.is_nan() || self.e2 <= 0.0 {
            return Err(FedError::InvalidParameter(format!(
                "alpha and e2 must be positive, got {} and {}",
                self.alpha, self.e2
            )));
        }
        Ok(())
    }

    /// `alpha / e2`, the exact decay constant of the normalized sensitivity.
    pub fn decay(&self) -> f64 {
        self.alpha / self.e2
    }
}

pub fn contrast_threshold(f: f64, e: f64, params: &CsfParams) -> f64 {
    params.ct0 * (params.alpha * f * (e + params.e2) / params.e2).exp()
}

pub fn contrast_sensitivity(f: f64, e: f64, params: &CsfParams) -> f64 {
    1.0 / contrast_threshold(f, e, params)
}

/// Frequency at which the contrast threshold reaches 1.0.
pub fn critical_frequency(e: f64, params: &CsfParams) -> f64 {
    params.e2 * (1.0 / params.ct0).ln() / ((e + params.e2) * params.alpha)
}

/// `min(f_c(e), f_d)`.
pub fn cutoff_frequency(e: f64, nyquist_cpd: f64, params: &CsfParams) -> f64 {
    critical_frequency(e, params).min(nyquist_cpd)
}

/// Foveation-based error sensitivity, normalized to 1 at the fovea.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSensitivity {
    params: CsfParams,
    nyquist_cpd: f64,
    decay: f64,
}

impl ErrorSensitivity {
    pub fn new(params: CsfParams, nyquist_cpd: f64) -> Self {
        Self {
            params,
            nyquist_cpd,
            decay: params.decay(),
        }
    }

    /// Uses the rounded constant 0.0461 in place of `alpha / e2`.
    pub fn strict(params: CsfParams, nyquist_cpd: f64) -> Self {
        Self {
            params,
            nyquist_cpd,
            decay: STRICT_DECAY,
        }
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    pub fn cutoff(&self, e: f64) -> f64 {
        cutoff_frequency(e, self.nyquist_cpd, &self.params)
    }

    /// Sensitivity in `[0, 1]`; the passband `f <= f_m(e)` is closed.
    pub fn eval(&self, f: f64, e: f64) -> f64 {
        if f <= self.cutoff(e) {
            (-self.decay * f * e).exp()
        } else {
            0.0
        }
    }
}

/// Convenience wrapper over [`ErrorSensitivity::eval`] with the exact decay.
pub fn error_sensitivity(f: f64, e: f64, nyquist_cpd: f64, params: &CsfParams) -> f64 {
    ErrorSensitivity::new(*params, nyquist_cpd).eval(f, e)
}
