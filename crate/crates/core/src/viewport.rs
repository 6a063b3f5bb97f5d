//! Rectilinear (gnomonic) viewports cut from equirectangular frames.
//!
//! Equirectangular convention: column `x` (continuous, pixel centers at
//! `j + 0.5`) maps to longitude `x / W * 360 - 180`, row `y` maps to latitude
//! `90 - y / H * 180`. Yaw is the longitude of the viewing direction and
//! positive pitch looks up.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FedError, Result};
use crate::frame::LuminanceFrame;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewportSpec {
    pub yaw_deg: f64,
    pub pitch_deg: f64,
    pub fov_deg: f64,
    pub out_width: usize,
    pub out_height: usize,
}

impl ViewportSpec {
    pub fn new(yaw_deg: f64, pitch_deg: f64) -> Self {
        Self {
            yaw_deg,
            pitch_deg,
            fov_deg: 90.0,
            out_width: 1024,
            out_height: 1024,
        }
    }

    pub fn with_fov(mut self, fov_deg: f64) -> Self {
        self.fov_deg = fov_deg;
        self
    }

    pub fn with_size(mut self, width: usize, height: usize) -> Self {
        self.out_width = width;
        self.out_height = height;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.pitch_deg.is_finite() || self.pitch_deg.abs() > 90.0 {
            return Err(FedError::InvalidParameter(format!(
                "pitch {} outside [-90, 90]",
                self.pitch_deg
            )));
        }
        if !self.yaw_deg.is_finite() {
            return Err(FedError::InvalidParameter("yaw must be finite".into()));
        }
        if !(self.fov_deg > 0.0 && self.fov_deg < 180.0) {
            return Err(FedError::InvalidParameter(format!(
                "fov {} outside (0, 180)",
                self.fov_deg
            )));
        }
        if self.out_width < 2 || self.out_height < 2 {
            return Err(FedError::InvalidParameter("viewport dims must be >= 2".into()));
        }
        Ok(())
    }

    /// Camera basis (forward, right, up) in world coordinates where
    /// direction `(lon, lat)` is `(cos lat sin lon, sin lat, cos lat cos lon)`.
    fn basis(&self) -> [[f64; 3]; 3] {
        let (sy, cy) = self.yaw_deg.to_radians().sin_cos();
        let (sp, cp) = self.pitch_deg.to_radians().sin_cos();
        let forward = [cp * sy, sp, cp * cy];
        let right = [cy, 0.0, -sy];
        let up = [-sp * sy, cp, -sp * cy];
        [forward, right, up]
    }

    /// Unit ray through the continuous output position `(y, x)`.
    fn ray(&self, basis: &[[f64; 3]; 3], y: f64, x: f64) -> [f64; 3] {
        let th = (self.fov_deg.to_radians() / 2.0).tan();
        let tv = th * self.out_height as f64 / self.out_width as f64;
        let u = (2.0 * x / self.out_width as f64 - 1.0) * th;
        let v = (1.0 - 2.0 * y / self.out_height as f64) * tv;
        let [f, r, up] = basis;
        let d = [
            f[0] + u * r[0] + v * up[0],
            f[1] + u * r[1] + v * up[1],
            f[2] + u * r[2] + v * up[2],
        ];
        let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        [d[0] / n, d[1] / n, d[2] / n]
    }

    /// `(lon, lat)` in degrees of the ray through output pixel `(i, j)`.
    pub fn pixel_direction(&self, i: usize, j: usize) -> (f64, f64) {
        direction_to_lonlat(self.ray(&self.basis(), i as f64 + 0.5, j as f64 + 0.5))
    }
}

pub fn lonlat_to_direction(lon_deg: f64, lat_deg: f64) -> [f64; 3] {
    let (so, co) = lon_deg.to_radians().sin_cos();
    let (sa, ca) = lat_deg.to_radians().sin_cos();
    [ca * so, sa, ca * co]
}

pub fn direction_to_lonlat(d: [f64; 3]) -> (f64, f64) {
    (
        d[0].atan2(d[2]).to_degrees(),
        d[1].clamp(-1.0, 1.0).asin().to_degrees(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewportGrid {
    pub n_lon: usize,
    pub n_lat: usize,
    pub viewports: Vec<ViewportSpec>,
}

impl ViewportGrid {
    /// Longitudes at `360 k / n_lon`; latitudes evenly spaced strictly
    /// inside the poles, `-90 + 180 (k + 1) / (n_lat + 1)`. Lat-major order.
    pub fn uniform(n_lon: usize, n_lat: usize, fov_deg: f64, size: usize) -> Result<Self> {
        if n_lon == 0 || n_lat == 0 {
            return Err(FedError::InvalidParameter("grid needs at least 1x1 viewports".into()));
        }
        let mut viewports = Vec::with_capacity(n_lon * n_lat);
        for a in 0..n_lat {
            let pitch = -90.0 + 180.0 * (a + 1) as f64 / (n_lat + 1) as f64;
            for o in 0..n_lon {
                let yaw = 360.0 * o as f64 / n_lon as f64;
                let spec = ViewportSpec::new(yaw, pitch)
                    .with_fov(fov_deg)
                    .with_size(size, size);
                spec.validate()?;
                viewports.push(spec);
            }
        }
        Ok(Self {
            n_lon,
            n_lat,
            viewports,
        })
    }

    pub fn len(&self) -> usize {
        self.viewports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.viewports.is_empty()
    }

    /// Adds `delta` degrees to every yaw.
    pub fn rotated(&self, delta_deg: f64) -> Self {
        let mut g = self.clone();
        g.viewports.iter_mut().for_each(|v| v.yaw_deg += delta_deg);
        g
    }
}

/// Six longitudes by three latitudes (-45, 0, +45), 1024 x 1024 at 90 deg.
pub fn default_grid() -> ViewportGrid {
    ViewportGrid::uniform(6, 3, 90.0, 1024).expect("valid default grid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    #[default]
    Bilinear,
    /// Catmull-Rom cubic convolution.
    Bicubic,
}

impl std::str::FromStr for Interpolation {
    type Err = FedError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bilinear" => Ok(Self::Bilinear),
            "bicubic" => Ok(Self::Bicubic),
            other => Err(FedError::InvalidParameter(format!("unknown interpolation {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SampleOptions {
    pub interpolation: Interpolation,
    /// Accept inputs whose width is not twice the height.
    pub force: bool,
}

fn check_equirect(frame: &LuminanceFrame, force: bool) -> Result<()> {
    let (h, w) = frame.dims();
    if !force && w != 2 * h {
        return Err(FedError::InvalidParameter(format!(
            "equirectangular input must be 2:1, got {w}x{h}"
        )));
    }
    Ok(())
}

struct Equirect<'a> {
    frame: &'a LuminanceFrame,
    h: usize,
    w: usize,
}

impl Equirect<'_> {
    #[inline]
    fn at(&self, i: isize, j: isize) -> f64 {
        let i = i.clamp(0, self.h as isize - 1) as usize;
        let j = j.rem_euclid(self.w as isize) as usize;
        self.frame.get(i, j)
    }

    fn sample(&self, lon: f64, lat: f64, interp: Interpolation) -> f64 {
        let u = (lon + 180.0) / 360.0 * self.w as f64 - 0.5;
        let v = ((90.0 - lat) / 180.0 * self.h as f64 - 0.5).clamp(0.0, (self.h - 1) as f64);
        let (j0, i0) = (u.floor(), v.floor());
        let (fx, fy) = (u - j0, v - i0);
        let (j0, i0) = (j0 as isize, i0 as isize);
        match interp {
            Interpolation::Bilinear => {
                let top = (1.0 - fx) * self.at(i0, j0) + fx * self.at(i0, j0 + 1);
                let bot = (1.0 - fx) * self.at(i0 + 1, j0) + fx * self.at(i0 + 1, j0 + 1);
                (1.0 - fy) * top + fy * bot
            }
            Interpolation::Bicubic => {
                let wx = catmull_rom(fx);
                let wy = catmull_rom(fy);
                let mut acc = 0.0;
                for (a, wya) in wy.iter().enumerate() {
                    let ii = i0 + a as isize - 1;
                    let row: f64 = wx
                        .iter()
                        .enumerate()
                        .map(|(b, wxb)| wxb * self.at(ii, j0 + b as isize - 1))
                        .sum();
                    acc += wya * row;
                }
                acc
            }
        }
    }
}

fn catmull_rom(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

pub fn extract_viewport(equirect: &LuminanceFrame, spec: &ViewportSpec) -> Result<LuminanceFrame> {
    extract_viewport_with(equirect, spec, SampleOptions::default())
}

pub fn extract_viewport_with(
    equirect: &LuminanceFrame,
    spec: &ViewportSpec,
    opts: SampleOptions,
) -> Result<LuminanceFrame> {
    spec.validate()?;
    check_equirect(equirect, opts.force)?;
    let (h, w) = equirect.dims();
    let src = Equirect { frame: equirect, h, w };
    let basis = spec.basis();
    let (oh, ow) = (spec.out_height, spec.out_width);
    let mut data = vec![0.0; oh * ow];
    data.par_chunks_mut(ow).enumerate().for_each(|(i, row)| {
        for (j, out) in row.iter_mut().enumerate() {
            let d = spec.ray(&basis, i as f64 + 0.5, j as f64 + 0.5);
            let (lon, lat) = direction_to_lonlat(d);
            *out = src.sample(lon, lat, opts.interpolation);
        }
    });
    LuminanceFrame::new(oh, ow, data)
}

/// Every viewport of every frame: `result[v][t]` is viewport `v` (grid
/// order) of frame `t`.
pub fn sample_all(
    frames: &[LuminanceFrame],
    grid: &ViewportGrid,
    opts: SampleOptions,
) -> Result<Vec<Vec<LuminanceFrame>>> {
    grid.viewports
        .par_iter()
        .map(|spec| {
            frames
                .iter()
                .map(|f| extract_viewport_with(f, spec, opts))
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_layout() {
        let g = default_grid();
        assert_eq!(g.len(), 18);
        let pitches: Vec<f64> = g.viewports.iter().step_by(6).map(|v| v.pitch_deg).collect();
        assert_eq!(pitches, vec![-45.0, 0.0, 45.0]);
        let yaws: Vec<f64> = g.viewports[..6].iter().map(|v| v.yaw_deg).collect();
        assert_eq!(yaws, vec![0.0, 60.0, 120.0, 180.0, 240.0, 300.0]);
        assert!(g.viewports.iter().all(|v| v.out_width == 1024 && v.fov_deg == 90.0));
    }

    #[test]
    fn forward_ray_hits_equirect_center() {
        let spec = ViewportSpec::new(0.0, 0.0).with_size(5, 5);
        let (lon, lat) = spec.pixel_direction(2, 2);
        assert!(lon.abs() < 1e-12 && lat.abs() < 1e-12);
        // a frame whose only bright pixels straddle (W/2, H/2)
        let eq = LuminanceFrame::from_fn(8, 16, |i, j| {
            if (3..5).contains(&i) && (7..9).contains(&j) {
                100.0
            } else {
                0.0
            }
        });
        let out = extract_viewport(&eq, &ViewportSpec::new(0.0, 0.0).with_size(5, 5).with_fov(1.0)).unwrap();
        assert!((out.get(2, 2) - 100.0).abs() < 1e-9);
    }

    #[test]
    fn fov_half_width() {
        let spec = ViewportSpec::new(0.0, 0.0).with_size(1000, 2);
        // continuous left edge of the image plane
        let d = spec.ray(&spec.basis(), 1.0, 0.0);
        let (lon, _) = direction_to_lonlat(d);
        assert!((lon + 45.0).abs() < 1e-9);
    }

    #[test]
    fn constant_in_constant_out() {
        let eq = LuminanceFrame::filled(32, 64, 77.0);
        for interp in [Interpolation::Bilinear, Interpolation::Bicubic] {
            let opts = SampleOptions { interpolation: interp, force: false };
            let out = extract_viewport_with(&eq, &ViewportSpec::new(123.0, 80.0).with_size(16, 16), opts).unwrap();
            assert!(out.data().iter().all(|v| (v - 77.0).abs() < 1e-9));
        }
    }

    #[test]
    fn rejects_non_equirect_unless_forced() {
        let eq = LuminanceFrame::filled(32, 32, 1.0);
        let spec = ViewportSpec::new(0.0, 0.0).with_size(4, 4);
        assert!(extract_viewport(&eq, &spec).is_err());
        let opts = SampleOptions { force: true, ..Default::default() };
        assert!(extract_viewport_with(&eq, &spec, opts).is_ok());
        assert!(ViewportSpec::new(0.0, 91.0).validate().is_err());
        assert!(ViewportSpec::new(0.0, 0.0).with_size(1, 4).validate().is_err());
    }

    #[test]
    fn basis_is_orthonormal() {
        let s = ViewportSpec::new(37.0, -61.0);
        let b = s.basis();
        for a in 0..3 {
            for c in 0..3 {
                let dot: f64 = (0..3).map(|k| b[a][k] * b[c][k]).sum();
                let want = if a == c { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-12);
            }
        }
    }
}
