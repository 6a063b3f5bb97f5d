//! Agreement between metric scores and subjective scores: four-parameter
//! logistic mapping, PLCC, SROCC, KROCC and RMSE, plus a JSON-lines
//! manifest driver.

use std::path::{Path, PathBuf};

use nalgebra::{Matrix4, Vector4};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FedError, Result};
use crate::fed::{FedConfig, FedScorer};
use crate::frame::LuminanceFrame;
use crate::geometry::{GazePoint, ViewGeometry};
use crate::io::{load_sequence, RawYuvLayout};
use crate::viewport::{extract_viewport_with, SampleOptions, ViewportGrid};

pub const MAX_ITERATIONS: usize = 500;
pub const REL_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub beta: [f64; 4],
    pub sse: f64,
    pub converged: bool,
}

impl LogisticFit {
    pub fn predict(&self, x: f64) -> f64 {
        logistic(x, &self.beta)
    }
}

/// `Q(x) = b2 + (b1 - b2) / (1 + exp(-(x - b3) / |b4|))`.
pub fn logistic(x: f64, beta: &[f64; 4]) -> f64 {
    let [b1, b2, b3, b4] = *beta;
    b2 + (b1 - b2) * sigmoid((x - b3) / b4.abs())
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn sse(xs: &[f64], ys: &[f64], beta: &[f64; 4]) -> f64 {
    xs.iter().zip(ys).map(|(&x, &y)| (y - logistic(x, beta)).powi(2)).sum()
}

fn jacobian_row(x: f64, beta: &[f64; 4]) -> Vector4<f64> {
    let [b1, b2, b3, b4] = *beta;
    let a = b4.abs();
    let t = (x - b3) / a;
    let s = sigmoid(t);
    let ds = (b1 - b2) * s * (1.0 - s);
    Vector4::new(s, 1.0 - s, -ds / a, -ds * t / b4)
}

fn levenberg_marquardt(xs: &[f64], ys: &[f64], init: [f64; 4]) -> LogisticFit {
    let mut beta = init;
    let mut cur = sse(xs, ys, &beta);
    let mut lambda = 1e-3;
    let mut converged = false;
    for _ in 0..MAX_ITERATIONS {
        if cur == 0.0 {
            converged = true;
            break;
        }
        let mut jtj = Matrix4::zeros();
        let mut jtr = Vector4::zeros();
        for (&x, &y) in xs.iter().zip(ys) {
            let row = jacobian_row(x, &beta);
            jtj += row * row.transpose();
            jtr += row * (y - logistic(x, &beta));
        }
        let mut accepted = false;
        while lambda < 1e20 {
            let mut a = jtj;
            for d in 0..4 {
                a[(d, d)] += lambda * jtj[(d, d)].max(1e-12);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let cand = [
                beta[0] + step[0],
                beta[1] + step[1],
                beta[2] + step[2],
                beta[3] + step[3],
            ];
            if cand[3] == 0.0 || cand.iter().any(|v| !v.is_finite()) {
                lambda *= 10.0;
                continue;
            }
            let next = sse(xs, ys, &cand);
            if next < cur {
                let rel = (cur - next) / cur;
                beta = cand;
                cur = next;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if rel < REL_TOLERANCE {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no descent direction left at working precision
            converged = true;
        }
        if converged {
            break;
        }
    }
    LogisticFit {
        beta,
        sse: cur,
        converged,
    }
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    (m, var.sqrt())
}

fn check_pairs(xs: &[f64], ys: &[f64], min: usize) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(FedError::InvalidParameter(format!(
            "{} scores but {} subjective values",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < min {
        return Err(FedError::InvalidParameter(format!(
            "need at least {min} records, got {}",
            xs.len()
        )));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(FedError::InvalidParameter("non-finite record".into()));
    }
    Ok(())
}

/// Least-squares logistic fit, best of the default start and three
/// perturbed starts.
pub fn logistic_fit(xs: &[f64], ys: &[f64]) -> Result<LogisticFit> {
    check_pairs(xs, ys, 4)?;
    let (_, sx) = mean_std(xs);
    if sx == 0.0 {
        return Err(FedError::Degenerate("all scores identical".into()));
    }
    let ymax = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ymin = ys.iter().cloned().fold(f64::INFINITY, f64::min);
    let mx = median(xs);
    let base = [ymax, ymin, mx, sx / 4.0];
    let starts = [
        base,
        [ymin, ymax, mx, sx / 4.0],
        [ymax, ymin, mx - sx / 2.0, sx],
        [ymax, ymin, mx + sx / 2.0, sx / 16.0],
    ];
    let fits: Vec<LogisticFit> = starts.iter().map(|&s| levenberg_marquardt(xs, ys, s)).collect();
    let best = fits
        .into_iter()
        .min_by(|a, b| a.sse.total_cmp(&b.sse))
        .expect("non-empty starts");
    Ok(best)
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pairs(a, b, 2)?;
    let (ma, _) = mean_std(a);
    let (mb, _) = mean_std(b);
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(FedError::Degenerate("zero variance".into()));
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Pearson correlation between `Q(x)` and `y`.
pub fn plcc(xs: &[f64], ys: &[f64], fit: &LogisticFit) -> Result<f64> {
    let q: Vec<f64> = xs.iter().map(|&x| fit.predict(x)).collect();
    pearson(&q, ys)
}

pub fn rmse(xs: &[f64], ys: &[f64], fit: &LogisticFit) -> Result<f64> {
    check_pairs(xs, ys, 1)?;
    Ok((sse(xs, ys, &fit.beta) / xs.len() as f64).sqrt())
}

/// 1-based ranks, ties sharing the average rank.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && v[idx[end]] == v[idx[start]] {
            end += 1;
        }
        let r = (start + end + 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = r;
        }
        start = end;
    }
    ranks
}

pub fn srocc(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_pairs(xs, ys, 2)?;
    pearson(&average_ranks(xs), &average_ranks(ys))
}

fn tied_pairs(sorted: &[f64]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

fn merge_count(v: &mut [f64], buf: &mut Vec<f64>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut v[..mid], buf) + merge_count(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            swaps += (mid - i) as u64;
            buf.push(v[j]);
            j += 1;
        } else {
            buf.push(v[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    swaps
}

/// Kendall tau-b in O(n log n).
pub fn krocc(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_pairs(xs, ys, 2)?;
    let n = xs.len() as u64;
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]).then(ys[a].total_cmp(&ys[b])));
    let sx: Vec<f64> = idx.iter().map(|&i| xs[i]).collect();
    let mut sy: Vec<f64> = idx.iter().map(|&i| ys[i]).collect();

    let n0 = n * (n - 1) / 2;
    let n1 = tied_pairs(&sx);
    let mut n3 = 0u64;
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && sx[end] == sx[start] {
            end += 1;
        }
        n3 += tied_pairs(&sy[start..end]);
        start = end;
    }
    let swaps = merge_count(&mut sy, &mut Vec::with_capacity(idx.len()));
    let n2 = tied_pairs(&sy);
    let denom = ((n0 - n1) as f64 * (n0 - n2) as f64).sqrt();
    if denom == 0.0 {
        return Err(FedError::Degenerate("all pairs tied".into()));
    }
    let s = n0 as f64 - n1 as f64 - n2 as f64 + n3 as f64 - 2.0 * swaps as f64;
    Ok((s / denom).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlations {
    pub n: usize,
    pub plcc: f64,
    pub srocc: f64,
    pub krocc: f64,
    pub rmse: f64,
    pub fit: LogisticFit,
}

pub fn correlate(xs: &[f64], ys: &[f64]) -> Result<Correlations> {
    let fit = logistic_fit(xs, ys)?;
    Ok(Correlations {
        n: xs.len(),
        plcc: plcc(xs, ys, &fit)?,
        srocc: srocc(xs, ys)?,
        krocc: krocc(xs, ys)?,
        rmse: rmse(xs, ys, &fit)?,
        fit,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GazeSpec {
    Named(String),
    Points(Vec<[f64; 2]>),
}

impl Default for GazeSpec {
    fn default() -> Self {
        GazeSpec::Named("center".into())
    }
}

impl GazeSpec {
    /// Gaze for frame `t` of an `h x w` sequence. A single point applies to
    /// every frame.
    pub fn at(&self, t: usize, height: usize, width: usize) -> Result<GazePoint> {
        match self {
            GazeSpec::Named(s) if s == "center" => Ok(GazePoint::center_of(height, width)),
            GazeSpec::Named(s) => Err(FedError::InvalidParameter(format!("unknown gaze {s:?}"))),
            GazeSpec::Points(p) if p.is_empty() => {
                Err(FedError::InvalidParameter("empty gaze list".into()))
            }
            GazeSpec::Points(p) => {
                let [i, j] = if p.len() == 1 {
                    p[0]
                } else {
                    *p.get(t).ok_or_else(|| {
                        FedError::InvalidParameter(format!("no gaze point for frame {t}"))
                    })?
                };
                Ok(GazePoint::new(i, j))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    #[serde(default)]
    pub id: Option<String>,
    pub ref_path: PathBuf,
    pub dist_path: PathBuf,
    pub dmos: f64,
    #[serde(default)]
    pub gaze: GazeSpec,
    /// Half-open `[start, end)` frame range.
    #[serde(default)]
    pub frames: Option<[usize; 2]>,
    /// Layout for headerless YUV inputs.
    #[serde(default)]
    pub raw: Option<RawYuvLayout>,
}

impl ManifestEntry {
    pub fn name(&self) -> String {
        self.id
            .clone()
            .unwrap_or_else(|| self.dist_path.display().to_string())
    }
}

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let entry: ManifestEntry = serde_json::from_str(line).map_err(|e| FedError::Manifest {
            line: n + 1,
            reason: e.to_string(),
        })?;
        if !entry.dmos.is_finite() {
            return Err(FedError::Manifest {
                line: n + 1,
                reason: "dmos must be finite".into(),
            });
        }
        if let Some([a, b]) = entry.frames {
            if a >= b {
                return Err(FedError::Manifest {
                    line: n + 1,
                    reason: format!("empty frame range [{a}, {b})"),
                });
            }
        }
        out.push(entry);
    }
    Ok(out)
}

pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| FedError::io(path, e))?;
    parse_manifest(&text)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub config: FedConfig,
    pub fov_deg: f64,
    /// Sample viewports from equirectangular inputs; `None` scores frames as
    /// given.
    pub grid: Option<ViewportGrid>,
    pub sampling: SampleOptions,
    /// Directory that relative manifest paths are resolved against.
    pub base_dir: PathBuf,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            config: FedConfig::default(),
            fov_deg: 90.0,
            grid: None,
            sampling: SampleOptions::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryScore {
    pub id: String,
    pub dmos: f64,
    pub fed: f64,
    pub frames: usize,
    pub viewports: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metric: String,
    pub correlations: Correlations,
    pub config: FedConfig,
    pub fov_deg: f64,
    pub grid: Option<ViewportGrid>,
    pub entries: Vec<EntryScore>,
}

impl EvalReport {
    pub fn summary_csv(&self) -> String {
        let c = &self.correlations;
        format!(
            "metric,n,plcc,srocc,krocc,rmse,converged\n{},{},{:.6},{:.6},{:.6},{:.6},{}\n",
            self.metric, c.n, c.plcc, c.srocc, c.krocc, c.rmse, c.fit.converged
        )
    }

    pub fn entries_csv(&self) -> String {
        let mut s = String::from("id,dmos,fed,frames,viewports\n");
        for e in &self.entries {
            s.push_str(&format!(
                "{},{},{:.9},{},{}\n",
                csv_field(&e.id),
                e.dmos,
                e.fed,
                e.frames,
                e.viewports
            ));
        }
        s
    }
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn score_views(
    refs: &[LuminanceFrame],
    dists: &[LuminanceFrame],
    gaze: &GazeSpec,
    opts: &EvalOptions,
) -> Result<f64> {
    let (h, w) = refs[0].dims();
    let scorer = FedScorer::new(ViewGeometry::new(w, opts.fov_deg)?, opts.config)?;
    let mut total = 0.0;
    for (t, (r, d)) in refs.iter().zip(dists).enumerate() {
        total += scorer.score(r, d, gaze.at(t, h, w)?)?.score;
    }
    Ok(total / refs.len() as f64)
}

/// Mean FED over frames (and viewports when a grid is set) for one entry.
pub fn score_entry(entry: &ManifestEntry, opts: &EvalOptions) -> Result<EntryScore> {
    let range = entry.frames.map(|[a, b]| (a, b));
    let refs = load_sequence(&resolve(&opts.base_dir, &entry.ref_path), entry.raw, range)?;
    let dists = load_sequence(&resolve(&opts.base_dir, &entry.dist_path), entry.raw, range)?;
    if refs.len() != dists.len() {
        return Err(FedError::InvalidParameter(format!(
            "{}: {} reference frames but {} distorted",
            entry.name(),
            refs.len(),
            dists.len()
        )));
    }
    let (fed, viewports) = match &opts.grid {
        None => (score_views(&refs, &dists, &entry.gaze, opts)?, 1),
        Some(grid) => {
            let per_view: Vec<f64> = grid
                .viewports
                .par_iter()
                .map(|spec| {
                    let cut = |fs: &[LuminanceFrame]| {
                        fs.iter()
                            .map(|f| extract_viewport_with(f, spec, opts.sampling))
                            .collect::<Result<Vec<_>>>()
                    };
                    score_views(&cut(&refs)?, &cut(&dists)?, &entry.gaze, opts)
                })
                .collect::<Result<_>>()?;
            (per_view.iter().sum::<f64>() / per_view.len() as f64, per_view.len())
        }
    };
    Ok(EntryScore {
        id: entry.name(),
        dmos: entry.dmos,
        fed,
        frames: refs.len(),
        viewports,
    })
}

pub fn evaluate_manifest(entries: &[ManifestEntry], opts: &EvalOptions) -> Result<EvalReport> {
    opts.config.validate()?;
    let scored: Vec<EntryScore> = entries
        .par_iter()
        .map(|e| score_entry(e, opts))
        .collect::<Result<_>>()?;
    let xs: Vec<f64> = scored.iter().map(|e| e.fed).collect();
    let ys: Vec<f64> = scored.iter().map(|e| e.dmos).collect();
    Ok(EvalReport {
        metric: "FED".into(),
        correlations: correlate(&xs, &ys)?,
        config: opts.config,
        fov_deg: opts.fov_deg,
        grid: opts.grid.clone(),
        entries: scored,
    })
}
