//! The FED pipeline: decompose both frames, compute per-band entropy
//! fields, weight their differences by normalized foveated sensitivity and
//! sum the absolute weighted differences.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::csf::{CsfParams, ErrorSensitivity};
use crate::error::{FedError, Result};
use crate::filterbank::{decompose_with, Boundary, CornerMode, FilterBankSpec, FilterKind};
use crate::frame::LuminanceFrame;
use crate::geometry::{
    eccentricity_map, BlockGrid, BlockReference, EccentricityMap, GazePoint, ViewGeometry,
};
use crate::gsm::{entropy_field, EntropyField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FedConfig {
    pub n_subbands: usize,
    pub block_size: usize,
    pub sigma_w: f64,
    pub filter: FilterKind,
    pub csf: CsfParams,
    /// Use the rounded 0.0461 decay constant instead of `alpha / e2`.
    pub strict_decay: bool,
    pub block_reference: BlockReference,
    /// Reuse the reference frame's `K_U` for the distorted frame.
    pub share_reference_model: bool,
    pub corners: CornerMode,
    pub boundary: Boundary,
}

impl Default for FedConfig {
    fn default() -> Self {
        Self {
            n_subbands: 12,
            block_size: 4,
            sigma_w: 0.1,
            filter: FilterKind::Rectangular,
            csf: CsfParams::default(),
            strict_decay: false,
            block_reference: BlockReference::Corner,
            share_reference_model: false,
            corners: CornerMode::AssignTop,
            boundary: Boundary::Circular,
        }
    }
}

impl FedConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_subbands == 0 {
            return Err(FedError::InvalidParameter("n_subbands must be >= 1".into()));
        }
        if self.block_size < 2 {
            return Err(FedError::InvalidParameter("block size must be >= 2".into()));
        }
        if !(self.sigma_w > 0.0 && self.sigma_w.is_finite()) {
            return Err(FedError::InvalidParameter(format!(
                "sigma_w must be positive, got {}",
                self.sigma_w
            )));
        }
        self.csf.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubbandReport {
    /// One-based band index.
    pub k: usize,
    pub f_k_cpd: f64,
    pub partial: f64,
    /// False when the band's sensitivity is zero over the whole frame.
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FedReport {
    pub score: f64,
    pub subbands: Vec<SubbandReport>,
    pub config: FedConfig,
    pub geometry: ViewGeometry,
    pub gaze: GazePoint,
    /// Per-band `D_k` maps in raster block order, when requested.
    #[serde(skip)]
    pub maps: Option<Vec<Vec<f64>>>,
}

/// Normalized sensitivity weights `S_k^N` for a band of mean frequency
/// `f_k`; the map sums to 1 unless every block is past the cutoff, in which
/// case the all-zero map is returned with `active = false`.
pub fn sensitivity_weight_map(
    ecc: &EccentricityMap,
    f_k: f64,
    sensitivity: &ErrorSensitivity,
) -> (Vec<f64>, bool) {
    let raw: Vec<f64> = ecc.degrees.iter().map(|&e| sensitivity.eval(f_k, e)).collect();
    let total: f64 = raw.iter().sum();
    if total > 0.0 {
        (raw.into_iter().map(|s| s / total).collect(), true)
    } else {
        (vec![0.0; raw.len()], false)
    }
}

/// `D_k(p, q) = S_k^N(p, q) * (h_ref(p, q) - h_dist(p, q))`.
pub fn fed_subband_map(
    h_ref: &EntropyField,
    h_dist: &EntropyField,
    weights: &[f64],
) -> Result<Vec<f64>> {
    if h_ref.grid != h_dist.grid || weights.len() != h_ref.values.len() {
        return Err(FedError::DimensionMismatch {
            left: (h_ref.grid.rows, h_ref.grid.cols),
            right: (h_dist.grid.rows, h_dist.grid.cols),
        });
    }
    Ok(h_ref
        .values
        .iter()
        .zip(&h_dist.values)
        .zip(weights)
        .map(|((r, d), w)| w * (r - d))
        .collect())
}

/// Reusable scorer for a fixed geometry and configuration.
#[derive(Debug, Clone)]
pub struct FedScorer {
    geometry: ViewGeometry,
    config: FedConfig,
    bank: FilterBankSpec,
    frequencies: Vec<f64>,
    sensitivity: ErrorSensitivity,
    keep_maps: bool,
}

impl FedScorer {
    pub fn new(geometry: ViewGeometry, config: FedConfig) -> Result<Self> {
        config.validate()?;
        let bank = FilterBankSpec::uniform(config.filter, config.n_subbands)?
            .with_corners(config.corners);
        let frequencies = (0..bank.len())
            .map(|k| bank.mean_frequency_cpd(k, &geometry))
            .collect();
        let sensitivity = if config.strict_decay {
            ErrorSensitivity::strict(config.csf, geometry.nyquist_cpd())
        } else {
            ErrorSensitivity::new(config.csf, geometry.nyquist_cpd())
        };
        Ok(Self {
            geometry,
            config,
            bank,
            frequencies,
            sensitivity,
            keep_maps: false,
        })
    }

    /// Retain the per-band `D_k` maps in reports.
    pub fn with_maps(mut self, keep: bool) -> Self {
        self.keep_maps = keep;
        self
    }

    pub fn config(&self) -> &FedConfig {
        &self.config
    }

    pub fn geometry(&self) -> &ViewGeometry {
        &self.geometry
    }

    pub fn bank(&self) -> &FilterBankSpec {
        &self.bank
    }

    /// Mean frequency of each band in cycles/degree.
    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn score(
        &self,
        reference: &LuminanceFrame,
        distorted: &LuminanceFrame,
        gaze: GazePoint,
    ) -> Result<FedReport> {
        reference.ensure_same_dims(distorted)?;
        let (height, width) = reference.dims();
        gaze.validate(height, width)?;
        let grid = BlockGrid::for_frame(height, width, self.config.block_size)?;
        let ecc = eccentricity_map(&self.geometry, &gaze, grid, self.config.block_reference);

        let ref_bands = decompose_with(reference, &self.bank, self.config.boundary)?;
        let dist_bands = decompose_with(distorted, &self.bank, self.config.boundary)?;

        let per_band: Vec<(SubbandReport, Vec<f64>)> = (0..self.bank.len())
            .into_par_iter()
            .map(|k| {
                let b = self.config.block_size;
                let sw = self.config.sigma_w;
                let (h_ref, ref_model) =
                    entropy_field(&ref_bands.bands[k], height, width, b, sw, None)?;
                let shared = self.config.share_reference_model.then_some(&ref_model);
                let (h_dist, _) =
                    entropy_field(&dist_bands.bands[k], height, width, b, sw, shared)?;
                let (weights, active) =
                    sensitivity_weight_map(&ecc, self.frequencies[k], &self.sensitivity);
                let map = fed_subband_map(&h_ref, &h_dist, &weights)?;
                let partial = map.iter().map(|d| d.abs()).sum();
                Ok((
                    SubbandReport {
                        k: k + 1,
                        f_k_cpd: self.frequencies[k],
                        partial,
                        active,
                    },
                    map,
                ))
            })
            .collect::<Result<_>>()?;

        let score = per_band.iter().map(|(r, _)| r.partial).sum();
        let (subbands, maps): (Vec<_>, Vec<_>) = per_band.into_iter().unzip();
        Ok(FedReport {
            score,
            subbands,
            config: self.config,
            geometry: self.geometry,
            gaze,
            maps: self.keep_maps.then_some(maps),
        })
    }

    /// Mean per-frame score over a sequence of `(reference, distorted, gaze)`.
    pub fn score_video<'a, I>(&self, frames: I) -> Result<f64>
    where
        I: IntoIterator<Item = (&'a LuminanceFrame, &'a LuminanceFrame, GazePoint)>,
    {
        let mut total = 0.0;
        let mut count = 0usize;
        for (r, d, g) in frames {
            total += self.score(r, d, g)?.score;
            count += 1;
        }
        if count == 0 {
            return Err(FedError::Degenerate("no frames to score".into()));
        }
        Ok(total / count as f64)
    }
}

pub fn fed_score(
    reference: &LuminanceFrame,
    distorted: &LuminanceFrame,
    gaze: GazePoint,
    geometry: ViewGeometry,
    config: FedConfig,
) -> Result<FedReport> {
    FedScorer::new(geometry, config)?.score(reference, distorted, gaze)
}

/// Mean of the per-frame scores.
pub fn fed_video_score(
    frames: &[(LuminanceFrame, LuminanceFrame, GazePoint)],
    geometry: ViewGeometry,
    config: FedConfig,
) -> Result<f64> {
    FedScorer::new(geometry, config)?.score_video(frames.iter().map(|(r, d, g)| (r, d, *g)))
}
