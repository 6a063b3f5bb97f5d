//! Isotropic zero-DC bandpass filterbanks applied in the frequency domain.
//!
//! Radial frequency `r` is in cycles/pixel: a DFT bin with signed indices
//! `(u, v)` on an `H x W` grid sits at `sqrt((u/H)^2 + (v/W)^2)`. A uniform
//! bank splits `(0, 0.5]` into `n` equal slots of half-width `r_b = 0.25/n`
//! centered at `r_k = (k - 1/2) * 0.5/n`.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{FedError, Result};
use crate::fft2::{signed_index, Fft2};
use crate::frame::LuminanceFrame;
use crate::geometry::ViewGeometry;

/// Upper edge of the digital frequency band, cycles/pixel.
pub const NYQUIST: f64 = 0.5;

const QUAD_INTERVALS: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    #[serde(alias = "rect")]
    Rectangular,
    #[serde(alias = "tri")]
    Triangular,
    Dog,
}

impl FilterKind {
    pub fn name(self) -> &'static str {
        match self {
            FilterKind::Rectangular => "rectangular",
            FilterKind::Triangular => "triangular",
            FilterKind::Dog => "dog",
        }
    }
}

impl std::str::FromStr for FilterKind {
    type Err = FedError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rect" | "rectangular" => Ok(FilterKind::Rectangular),
            "tri" | "triangular" => Ok(FilterKind::Triangular),
            "dog" => Ok(FilterKind::Dog),
            other => Err(FedError::InvalidParameter(format!(
                "unknown filter kind {other:?} (expected rect, tri or dog)"
            ))),
        }
    }
}

/// Treatment of DFT bins beyond `r = 0.5` (the corners of the spectrum).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CornerMode {
    /// The top rectangular band extends to cover the corners.
    #[default]
    AssignTop,
    Discard,
}

/// Radial cross-section of one band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum BandShape {
    /// Unit gain on `lower < r <= upper`.
    Rect { lower: f64, upper: f64 },
    /// `(w - |r - center|) / w` inside `|r - center| < w`.
    Triangle { half_width: f64 },
    /// `exp(-r^2 / 2 sigma_outer^2) - exp(-r^2 / 2 sigma_inner^2)`, scaled
    /// to unit peak.
    Dog { sigma_inner: f64, sigma_outer: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    /// Center frequency `r_k`, cycles/pixel.
    pub center: f64,
    /// Half-width `r_b` of the nominal slot `|r - r_k| < r_b`.
    pub half_width: f64,
    pub shape: BandShape,
}

impl Band {
    fn is_top_rect(&self) -> bool {
        matches!(self.shape, BandShape::Rect { upper, .. } if upper >= NYQUIST)
    }

    /// Gain at radial frequency `r`, ignoring corner handling.
    pub fn gain(&self, r: f64) -> f64 {
        match self.shape {
            BandShape::Rect { lower, upper } => {
                if r > lower && r <= upper {
                    1.0
                } else {
                    0.0
                }
            }
            BandShape::Triangle { half_width } => {
                let d = (r - self.center).abs();
                if d < half_width {
                    (half_width - d) / half_width
                } else {
                    0.0
                }
            }
            BandShape::Dog {
                sigma_inner,
                sigma_outer,
            } => {
                if sigma_inner <= 0.0 || sigma_outer <= sigma_inner {
                    return 0.0;
                }
                let peak = dog_raw(dog_peak_radius(sigma_inner, sigma_outer), sigma_inner, sigma_outer);
                if peak <= 0.0 {
                    0.0
                } else {
                    dog_raw(r, sigma_inner, sigma_outer) / peak
                }
            }
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut pts = vec![self.center - self.half_width, self.center + self.half_width];
        match self.shape {
            BandShape::Rect { lower, upper } => pts.extend([lower, upper]),
            BandShape::Triangle { half_width } => pts.extend([
                self.center - half_width,
                self.center,
                self.center + half_width,
            ]),
            BandShape::Dog { .. } => {}
        }
        pts
    }
}

fn dog_raw(r: f64, sigma_inner: f64, sigma_outer: f64) -> f64 {
    let r2 = r * r;
    (-r2 / (2.0 * sigma_outer * sigma_outer)).exp() - (-r2 / (2.0 * sigma_inner * sigma_inner)).exp()
}

/// Radius where `dog_raw` peaks; `sigma_inner < sigma_outer`.
pub fn dog_peak_radius(sigma_inner: f64, sigma_outer: f64) -> f64 {
    if sigma_outer <= sigma_inner || sigma_inner <= 0.0 {
        return 0.0;
    }
    let (a2, b2) = (sigma_inner * sigma_inner, sigma_outer * sigma_outer);
    (4.0 * (sigma_outer / sigma_inner).ln() * a2 * b2 / (b2 - a2)).sqrt()
}

/// Spread factor `c` such that `(r_k - c r_b, r_k + c r_b)` peaks at `r_k`.
fn dog_spread_for_peak(center: f64, half_width: f64) -> f64 {
    let c_max = center / half_width;
    let peak_at = |c: f64| dog_peak_radius(center - c * half_width, center + c * half_width);
    // peak_at falls from sqrt(2) * center (c -> 0) to 0 (c -> c_max).
    let (mut lo, mut hi) = (1e-9 * c_max, c_max * (1.0 - 1e-12));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if peak_at(mid) > center {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// A bank of radial bands plus corner handling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterBankSpec {
    pub kind: FilterKind,
    pub bands: Vec<Band>,
    pub corners: CornerMode,
}

impl FilterBankSpec {
    /// Uniform partition of `(0, 0.5]` into `n` bands.
    pub fn uniform(kind: FilterKind, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(FedError::InvalidParameter(
                "filterbank needs at least one subband".into(),
            ));
        }
        let step = NYQUIST / n as f64;
        let half_width = step / 2.0;
        let bands = (0..n)
            .map(|k| {
                let lower = k as f64 * step;
                let upper = if k + 1 == n { NYQUIST } else { (k + 1) as f64 * step };
                let center = 0.5 * (lower + upper);
                let shape = match kind {
                    FilterKind::Rectangular => BandShape::Rect { lower, upper },
                    FilterKind::Triangular => BandShape::Triangle { half_width },
                    FilterKind::Dog => {
                        let c = dog_spread_for_peak(center, half_width);
                        BandShape::Dog {
                            sigma_inner: center - c * half_width,
                            sigma_outer: center + c * half_width,
                        }
                    }
                };
                Band {
                    center,
                    half_width,
                    shape,
                }
            })
            .collect();
        Ok(Self {
            kind,
            bands,
            corners: CornerMode::default(),
        })
    }

    /// Bands of equal nominal width for side-by-side comparison of the three
    /// profiles: triangles of half-width `2 r_b` (full width at half maximum
    /// `2 r_b`) and DoGs with `sigma_inner, sigma_outer` at the slot edges
    /// `r_k -/+ r_b`. Rectangular bands are those of [`Self::uniform`]. The
    /// DoG of the lowest band degenerates (`sigma_inner = 0`) to zero gain.
    pub fn matched_width(kind: FilterKind, n: usize) -> Result<Self> {
        let mut spec = Self::uniform(kind, n)?;
        for band in &mut spec.bands {
            match band.shape {
                BandShape::Rect { .. } => {}
                BandShape::Triangle { .. } => {
                    band.shape = BandShape::Triangle {
                        half_width: 2.0 * band.half_width,
                    }
                }
                BandShape::Dog { .. } => {
                    band.shape = BandShape::Dog {
                        sigma_inner: band.center - band.half_width,
                        sigma_outer: band.center + band.half_width,
                    }
                }
            }
        }
        Ok(spec)
    }

    pub fn with_corners(mut self, corners: CornerMode) -> Self {
        self.corners = corners;
        self
    }

    pub fn len(&self) -> usize {
        self.bands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }

    pub fn band(&self, k: usize) -> &Band {
        &self.bands[k]
    }

    /// Gain of band `k` (zero-based) at radial frequency `r`, cycles/pixel.
    pub fn evaluate_response(&self, k: usize, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let band = &self.bands[k];
        if r > NYQUIST {
            return match self.corners {
                CornerMode::AssignTop if band.is_top_rect() => 1.0,
                CornerMode::AssignTop if matches!(band.shape, BandShape::Rect { .. }) => 0.0,
                CornerMode::Discard if matches!(band.shape, BandShape::Rect { .. }) => 0.0,
                _ => band.gain(r),
            };
        }
        band.gain(r)
    }

    /// Gain-weighted mean radial frequency of band `k` in cycles/degree.
    pub fn mean_frequency_cpd(&self, k: usize, geom: &ViewGeometry) -> f64 {
        self.mean_frequency(k) * geom.pixels_per_degree()
    }

    /// Gain-weighted mean radial frequency over `(0, 0.5]`, cycles/pixel.
    pub fn mean_frequency(&self, k: usize) -> f64 {
        let band = &self.bands[k];
        let m0 = integrate_band(band, 0.0, NYQUIST, |_, g| g);
        let m1 = integrate_band(band, 0.0, NYQUIST, |r, g| r * g);
        if m0 > 0.0 {
            m1 / m0
        } else {
            band.center
        }
    }

    /// Share of the band's squared gain over `(0, 0.5]` lying outside its
    /// nominal slot `|r - r_k| < r_b`.
    pub fn out_of_band_energy_fraction(&self, k: usize) -> f64 {
        let band = &self.bands[k];
        let total = integrate_band(band, 0.0, NYQUIST, |_, g| g * g);
        if total <= 0.0 {
            return 0.0;
        }
        let (lo, hi) = match band.shape {
            BandShape::Rect { lower, upper } => (lower, upper.min(NYQUIST)),
            _ => (
                (band.center - band.half_width).max(0.0),
                (band.center + band.half_width).min(NYQUIST),
            ),
        };
        let outside = integrate_band(band, 0.0, lo, |_, g| g * g)
            + integrate_band(band, hi, NYQUIST, |_, g| g * g);
        (outside / total).clamp(0.0, 1.0)
    }

    /// Gains for every band on the DFT grid of an `height x width` frame.
    pub(crate) fn gain_grids(&self, height: usize, width: usize) -> Vec<Vec<f64>> {
        let radius: Vec<f64> = (0..height)
            .flat_map(|u| {
                let fu = signed_index(u, height) / height as f64;
                (0..width).map(move |v| {
                    let fv = signed_index(v, width) / width as f64;
                    (fu * fu + fv * fv).sqrt()
                })
            })
            .collect();
        (0..self.len())
            .map(|k| radius.iter().map(|&r| self.evaluate_response(k, r)).collect())
            .collect()
    }
}

/// Simpson integration of `f(r, gain(r))` over `[a, b]`, split at the band's
/// kinks so each piece is smooth.
fn integrate_band(band: &Band, a: f64, b: f64, f: impl Fn(f64, f64) -> f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut pts: Vec<f64> = band
        .breakpoints()
        .into_iter()
        .filter(|&p| p > a && p < b)
        .collect();
    pts.push(a);
    pts.push(b);
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.dedup();
    pts.windows(2)
        // rounding slivers between nearly equal breakpoints
        .filter(|w| w[1] - w[0] > 1e-12)
        .map(|w| {
            // sample strictly inside so half-open edges do not leak in
            let (lo, hi) = (w[0], w[1]);
            let h = (hi - lo) / QUAD_INTERVALS as f64;
            let eval = |r: f64| {
                let r = r.clamp(lo + 1e-14 * (hi - lo), hi - 1e-14 * (hi - lo));
                f(r, band.gain(r))
            };
            let mut s = eval(lo) + eval(hi);
            for i in 1..QUAD_INTERVALS {
                let weight = if i % 2 == 1 { 4.0 } else { 2.0 };
                s += weight * eval(lo + i as f64 * h);
            }
            s * h / 3.0
        })
        .sum()
}

/// How the frame boundary is treated by the (circular) DFT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Circular,
    /// Filter the symmetric `2H x 2W` extension and crop.
    Mirror,
}

/// Bandpass responses `I_k`, one row-major field per band.
#[derive(Debug, Clone, PartialEq)]
pub struct SubbandStack {
    pub height: usize,
    pub width: usize,
    pub bands: Vec<Vec<f64>>,
    /// Largest imaginary part discarded after the inverse transforms.
    pub max_imag_residue: f64,
}

impl SubbandStack {
    pub fn len(&self) -> usize {
        self.bands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }
}

pub fn decompose(frame: &LuminanceFrame, spec: &FilterBankSpec) -> Result<SubbandStack> {
    decompose_with(frame, spec, Boundary::Circular)
}

pub fn decompose_with(
    frame: &LuminanceFrame,
    spec: &FilterBankSpec,
    boundary: Boundary,
) -> Result<SubbandStack> {
    let (height, width) = frame.dims();
    if height < 2 || width < 2 {
        return Err(FedError::FrameTooSmall {
            height,
            width,
            block: 2,
        });
    }
    let (fh, fw, samples) = match boundary {
        Boundary::Circular => (height, width, frame.data().to_vec()),
        Boundary::Mirror => (2 * height, 2 * width, mirror_extend(frame)),
    };

    let mut spectrum: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    Fft2::forward(fh, fw).process(&mut spectrum);
    let gains = spec.gain_grids(fh, fw);
    let inverse = Fft2::inverse(fh, fw);
    let scale = 1.0 / (fh * fw) as f64;

    let results: Vec<(Vec<f64>, f64)> = gains
        .par_iter()
        .map(|gain| {
            let mut buf: Vec<Complex64> = spectrum
                .iter()
                .zip(gain)
                .map(|(c, &g)| c * g)
                .collect();
            buf[0] = Complex64::new(0.0, 0.0);
            inverse.process(&mut buf);
            let mut imag = 0.0f64;
            let mut out = Vec::with_capacity(height * width);
            for i in 0..height {
                for j in 0..width {
                    let c = buf[i * fw + j] * scale;
                    imag = imag.max(c.im.abs());
                    out.push(c.re);
                }
            }
            (out, imag)
        })
        .collect();

    let max_imag_residue = results.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(SubbandStack {
        height,
        width,
        bands: results.into_iter().map(|r| r.0).collect(),
        max_imag_residue,
    })
}

fn mirror_extend(frame: &LuminanceFrame) -> Vec<f64> {
    let (h, w) = frame.dims();
    let mut out = Vec::with_capacity(4 * h * w);
    for i in 0..2 * h {
        let si = if i < h { i } else { 2 * h - 1 - i };
        for j in 0..2 * w {
            let sj = if j < w { j } else { 2 * w - 1 - j };
            out.push(frame.get(si, sj));
        }
    }
    out
}
