//! Viewing geometry: pixel/degree conversions and per-block eccentricity.

use serde::{Deserialize, Serialize};

use crate::error::{FedError, Result};

/// Display geometry for a frame viewed with its center on the optical axis.
///
/// The viewing distance is measured in image widths and follows from the
/// horizontal field of view: `v = cot(fov/2) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewGeometry {
    image_width_px: usize,
    fov_deg: f64,
}

impl ViewGeometry {
    pub fn new(image_width_px: usize, fov_deg: f64) -> Result<Self> {
        if image_width_px == 0 {
            return Err(FedError::InvalidParameter("image width must be >= 1".into()));
        }
        if !(fov_deg > 0.0 && fov_deg < 180.0) {
            return Err(FedError::InvalidParameter(format!(
                "field of view must lie in (0, 180) degrees, got {fov_deg}"
            )));
        }
        Ok(Self {
            image_width_px,
            fov_deg,
        })
    }

    /// 1024 px wide viewport with a 90 degree field of view.
    pub fn viewport_default() -> Self {
        Self {
            image_width_px: 1024,
            fov_deg: 90.0,
        }
    }

    pub fn image_width_px(&self) -> usize {
        self.image_width_px
    }

    pub fn fov_deg(&self) -> f64 {
        self.fov_deg
    }

    /// Viewing distance in units of image width.
    pub fn viewing_distance(&self) -> f64 {
        0.5 / (self.fov_deg.to_radians() / 2.0).tan()
    }

    /// Display resolution `d` in pixels per degree of visual angle.
    pub fn pixels_per_degree(&self) -> f64 {
        std::f64::consts::PI * self.image_width_px as f64 * self.viewing_distance() / 180.0
    }

    /// Display Nyquist frequency in cycles per degree.
    pub fn nyquist_cpd(&self) -> f64 {
        self.pixels_per_degree() / 2.0
    }

    /// Viewing distance expressed in pixels (`v * M`).
    pub fn viewing_distance_px(&self) -> f64 {
        self.viewing_distance() * self.image_width_px as f64
    }
}

/// Gaze location in continuous pixel coordinates (`i0` row, `j0` column).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazePoint {
    pub i0: f64,
    pub j0: f64,
}

impl GazePoint {
    pub fn new(i0: f64, j0: f64) -> Self {
        Self { i0, j0 }
    }

    /// Geometric center of an `height x width` frame.
    pub fn center_of(height: usize, width: usize) -> Self {
        Self {
            i0: height as f64 / 2.0,
            j0: width as f64 / 2.0,
        }
    }

    pub fn validate(&self, height: usize, width: usize) -> Result<()> {
        let inside = self.i0.is_finite()
            && self.j0.is_finite()
            && self.i0 >= 0.0
            && self.j0 >= 0.0
            && self.i0 < height as f64
            && self.j0 < width as f64;
        if inside {
            Ok(())
        } else {
            Err(FedError::InvalidParameter(format!(
                "gaze ({}, {}) outside {height}x{width} frame",
                self.i0, self.j0
            )))
        }
    }
}

/// Which pixel of a block stands in for the block when measuring eccentricity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockReference {
    /// Top-left corner `(b*p, b*q)`.
    #[default]
    Corner,
    /// Block center `(b*p + b/2, b*q + b/2)`.
    Center,
}

impl BlockReference {
    fn offset(self, block_size: usize) -> f64 {
        match self {
            BlockReference::Corner => 0.0,
            BlockReference::Center => block_size as f64 / 2.0,
        }
    }
}

/// Non-overlapping `b x b` tiling of a frame; partial edge tiles are dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockGrid {
    pub block_size: usize,
    pub rows: usize,
    pub cols: usize,
}

impl BlockGrid {
    pub fn for_frame(height: usize, width: usize, block_size: usize) -> Result<Self> {
        if block_size < 2 {
            return Err(FedError::InvalidParameter(format!(
                "block size must be >= 2, got {block_size}"
            )));
        }
        let grid = Self {
            block_size,
            rows: height / block_size,
            cols: width / block_size,
        };
        if grid.rows == 0 || grid.cols == 0 {
            return Err(FedError::FrameTooSmall {
                height,
                width,
                block: block_size,
            });
        }
        Ok(grid)
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Eccentricity in degrees of block `(p, q)` relative to `gaze`.
pub fn eccentricity(
    geom: &ViewGeometry,
    gaze: &GazePoint,
    p: usize,
    q: usize,
    block_size: usize,
    reference: BlockReference,
) -> f64 {
    let off = reference.offset(block_size);
    let di = (block_size * p) as f64 + off - gaze.i0;
    let dj = (block_size * q) as f64 + off - gaze.j0;
    (di.hypot(dj) / geom.viewing_distance_px()).atan().to_degrees()
}

/// Row-major `rows x cols` field of per-block eccentricities.
#[derive(Debug, Clone, PartialEq)]
pub struct EccentricityMap {
    pub grid: BlockGrid,
    pub degrees: Vec<f64>,
}

impl EccentricityMap {
    pub fn get(&self, p: usize, q: usize) -> f64 {
        self.degrees[p * self.grid.cols + q]
    }
}

pub fn eccentricity_map(
    geom: &ViewGeometry,
    gaze: &GazePoint,
    grid: BlockGrid,
    reference: BlockReference,
) -> EccentricityMap {
    let mut degrees = Vec::with_capacity(grid.len());
    for p in 0..grid.rows {
        for q in 0..grid.cols {
            degrees.push(eccentricity(geom, gaze, p, q, grid.block_size, reference));
        }
    }
    EccentricityMap { grid, degrees }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn viewport_constants() {
        let g = ViewGeometry::viewport_default();
        assert_relative_eq!(g.viewing_distance(), 0.5, epsilon = 1e-15);
        assert!((g.pixels_per_degree() - 8.94).abs() < 0.005);
        assert!((g.nyquist_cpd() - 4.47).abs() < 0.005);
        assert_relative_eq!(g.nyquist_cpd(), g.pixels_per_degree() / 2.0);
    }

    #[test]
    fn ppd_formula_inversion() {
        // v = 1 at fov = 2*atan(1/2); M chosen so pi*M/180 = 2.
        let fov = 2.0 * (0.5f64).atan().to_degrees();
        let width = 360.0 / std::f64::consts::PI;
        let g = ViewGeometry {
            image_width_px: 1,
            fov_deg: fov,
        };
        assert_relative_eq!(g.viewing_distance(), 1.0, epsilon = 1e-12);
        let ppd = std::f64::consts::PI * width * g.viewing_distance() / 180.0;
        assert_relative_eq!(ppd, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(ViewGeometry::new(0, 90.0).is_err());
        assert!(ViewGeometry::new(64, 0.0).is_err());
        assert!(ViewGeometry::new(64, 180.0).is_err());
        assert!(ViewGeometry::new(64, f64::NAN).is_err());
    }

    #[test]
    fn eccentricity_examples() {
        let g = ViewGeometry::viewport_default();
        let gaze = GazePoint::new(512.0, 512.0);
        let c = BlockReference::Corner;
        assert_eq!(eccentricity(&g, &gaze, 128, 128, 4, c), 0.0);
        // 512 px straight down.
        assert_relative_eq!(eccentricity(&g, &gaze, 0, 128, 4, c), 45.0, epsilon = 1e-12);
        // 256 px to the right.
        let e = eccentricity(&g, &gaze, 128, 192, 4, c);
        // Ray oracle: eye at distance 512 px from the image plane looking at
        // the gaze; angle between the gaze ray and the ray to the block.
        let gaze_ray = [0.0, 0.0, 512.0];
        let block_ray = [0.0, 256.0, 512.0];
        let dot: f64 = gaze_ray.iter().zip(&block_ray).map(|(a, b)| a * b).sum();
        let norm = |v: &[f64; 3]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let oracle = (dot / (norm(&gaze_ray) * norm(&block_ray))).acos().to_degrees();
        assert_relative_eq!(e, oracle, epsilon = 1e-10);
        assert_relative_eq!(e, 26.565051177077994, epsilon = 1e-10);
    }

    #[test]
    fn center_reference_offsets_by_half_block() {
        let g = ViewGeometry::viewport_default();
        let gaze = GazePoint::new(2.0, 2.0);
        assert_eq!(eccentricity(&g, &gaze, 0, 0, 4, BlockReference::Center), 0.0);
        assert!(eccentricity(&g, &gaze, 0, 0, 4, BlockReference::Corner) > 0.0);
    }

    #[test]
    fn block_grid_floor_division() {
        let g = BlockGrid::for_frame(7, 9, 4).unwrap();
        assert_eq!((g.rows, g.cols), (1, 2));
        assert!(BlockGrid::for_frame(3, 9, 4).is_err());
        assert!(BlockGrid::for_frame(8, 8, 1).is_err());
    }

    #[test]
    fn gaze_validation() {
        assert!(GazePoint::new(0.0, 0.0).validate(4, 4).is_ok());
        assert!(GazePoint::new(4.0, 0.0).validate(4, 4).is_err());
        assert!(GazePoint::new(-0.1, 1.0).validate(4, 4).is_err());
    }

    proptest::proptest! {
        #[test]
        fn radially_symmetric_and_bounded(dp in -40i64..40, dq in -40i64..40) {
            let g = ViewGeometry::viewport_default();
            let gaze = GazePoint::new(200.0, 200.0);
            let at = |p: i64, q: i64| {
                eccentricity(&g, &gaze, (50 + p) as usize, (50 + q) as usize, 4, BlockReference::Corner)
            };
            let a = at(dp, dq);
            for b in [at(-dp, dq), at(dp, -dq), at(dq, dp), at(-dq, -dp)] {
                proptest::prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
            }
            proptest::prop_assert!((0.0..90.0).contains(&a));
        }

        #[test]
        fn monotone_in_distance(d1 in 0.0f64..5000.0, extra in 0.0f64..5000.0) {
            let g = ViewGeometry::viewport_default();
            let e = |d: f64| (d / g.viewing_distance_px()).atan().to_degrees();
            proptest::prop_assert!(e(d1) <= e(d1 + extra));
        }
    }
}
