//! Gaussian scale mixture model of `b x b` subband blocks and the
//! conditional local entropies under additive neural noise.
//!
//! A block vector `x` is modeled as `z * U` with `U ~ N(0, K_U)`. After
//! adding noise `W ~ N(0, sigma_w^2 I)`, the entropy conditioned on the
//! multiplier is `(N/2) ln(2 pi e) + 1/2 ln det(z^2 K_U + sigma_w^2 I)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{FedError, Result};
use crate::geometry::BlockGrid;

/// Relative eigenvalue floor applied to the fitted covariance.
pub const EIG_FLOOR: f64 = 1e-8;

/// Non-overlapping `b x b` tiles of a field, flattened row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Blocks {
    pub grid: BlockGrid,
    /// `grid.len()` vectors of length `b*b`, stored contiguously.
    pub vectors: Vec<f64>,
}

impl Blocks {
    pub fn dim(&self) -> usize {
        self.grid.block_size * self.grid.block_size
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn vector(&self, idx: usize) -> &[f64] {
        let n = self.dim();
        &self.vectors[idx * n..(idx + 1) * n]
    }
}

/// Tiles a row-major `height x width` field; trailing partial tiles are dropped.
pub fn blockify(field: &[f64], height: usize, width: usize, block_size: usize) -> Result<Blocks> {
    if field.len() != height * width {
        return Err(FedError::InvalidParameter(format!(
            "field has {} samples, expected {height}x{width}",
            field.len()
        )));
    }
    let grid = BlockGrid::for_frame(height, width, block_size)?;
    let b = block_size;
    let mut vectors = Vec::with_capacity(grid.len() * b * b);
    for p in 0..grid.rows {
        for q in 0..grid.cols {
            for i in 0..b {
                let row = (b * p + i) * width + b * q;
                vectors.extend_from_slice(&field[row..row + b]);
            }
        }
    }
    Ok(Blocks { grid, vectors })
}

/// Fitted GSM for one subband of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GsmModel {
    pub grid: BlockGrid,
    /// Floored eigenvalues of `K_U`, ascending.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors of `K_U`, one per column.
    pub eigenvectors: DMatrix<f64>,
    /// Multiplier estimates `z^2(p, q)` in raster order.
    pub multipliers: Vec<f64>,
    pub sigma_w: f64,
}

impl GsmModel {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let v = &self.eigenvectors;
        v * DMatrix::from_diagonal(&DVector::from_column_slice(&self.eigenvalues)) * v.transpose()
    }

    /// `x^T K_U^{-1} x / N`.
    fn multiplier_for(&self, x: &[f64]) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for (i, &lambda) in self.eigenvalues.iter().enumerate() {
            let proj: f64 = self.eigenvectors.column(i).iter().zip(x).map(|(a, b)| a * b).sum();
            acc += proj * proj / lambda;
        }
        acc / n as f64
    }

    /// Same covariance, multipliers re-estimated for other blocks.
    pub fn reestimate(&self, blocks: &Blocks) -> Result<GsmModel> {
        if blocks.dim() != self.dim() {
            return Err(FedError::InvalidParameter(format!(
                "block dimension {} does not match model dimension {}",
                blocks.dim(),
                self.dim()
            )));
        }
        let all_zero = self.eigenvalues.iter().all(|&l| l == EIG_FLOOR);
        let multipliers = (0..blocks.len())
            .map(|m| {
                if all_zero {
                    0.0
                } else {
                    self.multiplier_for(blocks.vector(m))
                }
            })
            .collect();
        Ok(GsmModel {
            grid: blocks.grid,
            eigenvalues: self.eigenvalues.clone(),
            eigenvectors: self.eigenvectors.clone(),
            multipliers,
            sigma_w: self.sigma_w,
        })
    }

    /// Conditional entropy of block `idx` in nats.
    pub fn conditional_entropy(&self, idx: usize) -> f64 {
        conditional_entropy_from_eigen(&self.eigenvalues, self.multipliers[idx], self.sigma_w)
    }
}

/// `(N/2) ln(2 pi e)`.
pub fn entropy_constant(dim: usize) -> f64 {
    dim as f64 / 2.0 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln()
}

pub fn conditional_entropy_from_eigen(eigenvalues: &[f64], z2: f64, sigma_w: f64) -> f64 {
    let noise = sigma_w * sigma_w;
    entropy_constant(eigenvalues.len())
        + 0.5 * eigenvalues.iter().map(|&l| (z2 * l + noise).ln()).sum::<f64>()
}

/// Estimates `K_U` and per-block multipliers.
///
/// `K_U` starts as the second-moment matrix of the blocks, eigenvalues below
/// `EIG_FLOOR * max` are raised to that floor, multipliers are the quadratic
/// forms `x^T K_U^{-1} x / N`, and finally the pair is rescaled so the mean
/// multiplier is 1 (the product `z^2 K_U` is unchanged).
pub fn fit_gsm(blocks: &Blocks, sigma_w: f64) -> Result<GsmModel> {
    if sigma_w.is_nan() || sigma_w <= 0.0 {
        return Err(FedError::InvalidParameter(format!(
            "noise level must be positive, got {sigma_w}"
        )));
    }
    let count = blocks.len();
    if count < 2 {
        return Err(FedError::TooFewBlocks(count));
    }
    let n = blocks.dim();

    let mut cov = DMatrix::<f64>::zeros(n, n);
    for m in 0..count {
        let x = blocks.vector(m);
        for a in 0..n {
            let xa = x[a];
            if xa == 0.0 {
                continue;
            }
            for b in a..n {
                cov[(a, b)] += xa * x[b];
            }
        }
    }
    for a in 0..n {
        for b in a..n {
            let v = cov[(a, b)] / count as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }

    let eigen = SymmetricEigen::new(cov);
    let max_eig = eigen.eigenvalues.iter().cloned().fold(0.0, f64::max);
    if max_eig <= 0.0 {
        return Ok(GsmModel {
            grid: blocks.grid,
            eigenvalues: vec![EIG_FLOOR; n],
            eigenvectors: DMatrix::identity(n, n),
            multipliers: vec![0.0; count],
            sigma_w,
        });
    }

    let floor = EIG_FLOOR * max_eig;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[a].partial_cmp(&eigen.eigenvalues[b]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eigen.eigenvalues[i].max(floor)).collect();
    let eigenvectors = DMatrix::from_fn(n, n, |r, c| eigen.eigenvectors[(r, order[c])]);

    let mut model = GsmModel {
        grid: blocks.grid,
        eigenvalues,
        eigenvectors,
        multipliers: Vec::new(),
        sigma_w,
    };
    model.multipliers = (0..count).map(|m| model.multiplier_for(blocks.vector(m))).collect();

    let mean = model.multipliers.iter().sum::<f64>() / count as f64;
    if mean > 0.0 {
        model.eigenvalues.iter_mut().for_each(|l| *l *= mean);
        // recomputed rather than divided so `reestimate` on the same blocks
        // reproduces them bit for bit
        model.multipliers = (0..count).map(|m| model.multiplier_for(blocks.vector(m))).collect();
    }
    Ok(model)
}

/// Grid of conditional local entropies (nats).
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyField {
    pub grid: BlockGrid,
    pub values: Vec<f64>,
}

impl EntropyField {
    pub fn from_model(model: &GsmModel) -> Self {
        Self {
            grid: model.grid,
            values: (0..model.multipliers.len())
                .map(|m| model.conditional_entropy(m))
                .collect(),
        }
    }

    pub fn get(&self, p: usize, q: usize) -> f64 {
        self.values[p * self.grid.cols + q]
    }
}

/// Blockify, fit (or reuse `shared`'s covariance), and evaluate entropies.
pub fn entropy_field(
    subband: &[f64],
    height: usize,
    width: usize,
    block_size: usize,
    sigma_w: f64,
    shared: Option<&GsmModel>,
) -> Result<(EntropyField, GsmModel)> {
    let blocks = blockify(subband, height, width, block_size)?;
    let model = match shared {
        Some(base) => base.reestimate(&blocks)?,
        None => fit_gsm(&blocks, sigma_w)?,
    };
    Ok((EntropyField::from_model(&model), model))
}
