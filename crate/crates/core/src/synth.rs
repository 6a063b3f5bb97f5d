//! Synthetic test content and distortions.
//!
//! [`natural_image`] renders a dead-leaves scene: occluding disks with a
//! power-law size distribution, each carrying a shading gradient and fine
//! texture. Such scenes reproduce the scale invariance and heavy-tailed
//! bandpass statistics of photographs, which is what the metric relies on.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::frame::LuminanceFrame;
use crate::geometry::GazePoint;

/// Deterministic dead-leaves image on the 0..=255 scale.
pub fn natural_image(height: usize, width: usize, seed: u64) -> LuminanceFrame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = height.max(width) as f64;
    let (r_min, r_max) = (1.5f64, 0.25 * scale);
    let (a, b) = (r_min.powi(-2), r_max.powi(-2));

    let mut value = vec![f64::NAN; height * width];
    let mut uncovered = height * width;
    let texture = Normal::new(0.0, 1.0).unwrap();
    let max_leaves = 40 * height * width;
    for _ in 0..max_leaves {
        if uncovered == 0 {
            break;
        }
        // density proportional to r^-3
        let u: f64 = rng.random();
        let r = (a - u * (a - b)).powf(-0.5);
        let ci = rng.random::<f64>() * height as f64;
        let cj = rng.random::<f64>() * width as f64;
        let base = 20.0 + 215.0 * rng.random::<f64>();
        let grad_i = rng.random_range(-1.0..1.0) * 40.0 / r.max(8.0);
        let grad_j = rng.random_range(-1.0..1.0) * 40.0 / r.max(8.0);
        let grain = 6.0 * rng.random::<f64>();

        let i0 = (ci - r).floor().max(0.0) as usize;
        let i1 = ((ci + r).ceil() as usize).min(height);
        let j0 = (cj - r).floor().max(0.0) as usize;
        let j1 = ((cj + r).ceil() as usize).min(width);
        for i in i0..i1 {
            let di = i as f64 + 0.5 - ci;
            for j in j0..j1 {
                let dj = j as f64 + 0.5 - cj;
                let idx = i * width + j;
                if di * di + dj * dj <= r * r && value[idx].is_nan() {
                    let t: f64 = texture.sample(&mut rng);
                    value[idx] = base + grad_i * di + grad_j * dj + grain * t;
                    uncovered -= 1;
                }
            }
        }
    }
    for v in value.iter_mut().filter(|v| v.is_nan()) {
        *v = 128.0;
    }
    let raw = LuminanceFrame::new(height, width, value).expect("finite samples");
    // mild optical blur, then clip to the display range
    gaussian_blur(&raw, 0.6).map(|v| v.clamp(0.0, 255.0))
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.5 * sigma).ceil().max(1.0) as usize;
    let mut k: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let x = i as f64 - radius as f64;
            (-x * x / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

/// Separable Gaussian blur with symmetric boundary extension.
pub fn gaussian_blur(frame: &LuminanceFrame, sigma: f64) -> LuminanceFrame {
    if sigma <= 0.0 {
        return frame.clone();
    }
    let (h, w) = frame.dims();
    let k = gaussian_kernel(sigma);
    let radius = (k.len() / 2) as isize;
    let mut tmp = vec![0.0; h * w];
    for i in 0..h {
        for j in 0..w {
            tmp[i * w + j] = k
                .iter()
                .enumerate()
                .map(|(t, kv)| kv * frame.get(i, reflect(j as isize + t as isize - radius, w)))
                .sum();
        }
    }
    LuminanceFrame::from_fn(h, w, |i, j| {
        k.iter()
            .enumerate()
            .map(|(t, kv)| kv * tmp[reflect(i as isize + t as isize - radius, h) * w + j])
            .sum()
    })
}

/// Additive white Gaussian noise, clipped to 0..=255.
pub fn add_noise(frame: &LuminanceFrame, sigma: f64, seed: u64) -> LuminanceFrame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    frame.map(|v| {
        let n: f64 = StandardNormal.sample(&mut rng);
        (v + sigma * n).clamp(0.0, 255.0)
    })
}

/// Adds clipped Gaussian noise to a `size x size` square centered on
/// `(center_i, center_j)`; the square is clipped to the frame.
pub fn add_noise_patch(
    frame: &LuminanceFrame,
    center_i: f64,
    center_j: f64,
    size: usize,
    sigma: f64,
    seed: u64,
) -> LuminanceFrame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, w) = frame.dims();
    let half = size as f64 / 2.0;
    let i0 = (center_i - half).round().max(0.0) as usize;
    let j0 = (center_j - half).round().max(0.0) as usize;
    let mut out = frame.clone();
    for i in i0..(i0 + size).min(h) {
        for j in j0..(j0 + size).min(w) {
            let n: f64 = StandardNormal.sample(&mut rng);
            out.set(i, j, (frame.get(i, j) + sigma * n).clamp(0.0, 255.0));
        }
    }
    out
}

/// Space-variant blur that grows with distance from the gaze: pixels within
/// `inner_radius` px are untouched, and the blur reaches `max_sigma` at the
/// farthest corner. Implemented by blending a small stack of blurred copies.
pub fn foveated_blur(
    frame: &LuminanceFrame,
    gaze: GazePoint,
    inner_radius: f64,
    max_sigma: f64,
) -> LuminanceFrame {
    let (h, w) = frame.dims();
    let levels = 6;
    let sigmas: Vec<f64> = (0..=levels).map(|l| max_sigma * l as f64 / levels as f64).collect();
    let stack: Vec<LuminanceFrame> = sigmas.iter().map(|&s| gaussian_blur(frame, s)).collect();
    let far = [(0.0, 0.0), (0.0, w as f64), (h as f64, 0.0), (h as f64, w as f64)]
        .iter()
        .map(|(i, j)| (i - gaze.i0).hypot(j - gaze.j0))
        .fold(0.0, f64::max);
    let span = (far - inner_radius).max(1.0);
    LuminanceFrame::from_fn(h, w, |i, j| {
        let d = (i as f64 - gaze.i0).hypot(j as f64 - gaze.j0);
        let t = ((d - inner_radius) / span).clamp(0.0, 1.0) * levels as f64;
        let lo = t.floor() as usize;
        let hi = (lo + 1).min(levels);
        let frac = t - lo as f64;
        (1.0 - frac) * stack[lo].get(i, j) + frac * stack[hi].get(i, j)
    })
}
