use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use fed_core::eval::{evaluate_manifest, load_manifest, EvalOptions};
use fed_core::fed::{FedConfig, FedScorer, SubbandReport};
use fed_core::filterbank::{FilterBankSpec, FilterKind};
use fed_core::geometry::{GazePoint, ViewGeometry};
use fed_core::io::{load_frame, load_sequence, store_frame, FrameFormat, StoreFormat};
use fed_core::viewport::{extract_viewport_with, SampleOptions, ViewportGrid};
use fed_core::{FedError, LuminanceFrame};
use rayon::prelude::*;
use serde::Serialize;

use crate::{parse_grid, BankArgs, CliError, EvalArgs, InputArgs, ReportFormat, ScoreArgs, ViewportArgs};

type CliResult<T = ()> = Result<T, CliError>;

fn write_text(path: &Path, text: &str) -> CliResult {
    std::fs::write(path, text).map_err(|e| FedError::io(path, e).into())
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable report");
    s.push('\n');
    s
}

fn is_still(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref(),
        Some("png" | "pgm")
    )
}

fn load_input(path: &Path, input: &InputArgs) -> CliResult<Vec<LuminanceFrame>> {
    let layout = input.layout()?;
    if path.is_dir() {
        return load_frame_dir(path, input);
    }
    if layout.is_none() && is_still(path) {
        let format = match FrameFormat::from_path(path)? {
            FrameFormat::Png(_) => FrameFormat::Png(input.luma()),
            other => other,
        };
        return Ok(vec![load_frame(path, format)?]);
    }
    Ok(load_sequence(path, layout, input.frames)?)
}

fn load_frame_dir(dir: &Path, input: &InputArgs) -> CliResult<Vec<LuminanceFrame>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| FedError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| is_still(p))
        .collect();
    files.sort();
    let (start, end) = input.frames.unwrap_or((0, usize::MAX));
    let picked: Vec<&PathBuf> = files.iter().skip(start).take(end - start).collect();
    if picked.is_empty() {
        return Err(CliError::Input(format!("no PGM/PNG frames in {}", dir.display())));
    }
    picked
        .into_iter()
        .map(|p| {
            let format = match FrameFormat::from_path(p)? {
                FrameFormat::Png(_) => FrameFormat::Png(input.luma()),
                other => other,
            };
            Ok(load_frame(p, format)?)
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
enum Gaze {
    Center,
    At(GazePoint),
}

fn parse_gaze(s: &str) -> CliResult<Gaze> {
    if s.trim() == "center" {
        return Ok(Gaze::Center);
    }
    let bad = || CliError::Input(format!("gaze must be `row,col` or `center`, got {s:?}"));
    let (i, j) = s.split_once(',').ok_or_else(bad)?;
    let i: f64 = i.trim().parse().map_err(|_| bad())?;
    let j: f64 = j.trim().parse().map_err(|_| bad())?;
    Ok(Gaze::At(GazePoint::new(i, j)))
}

#[derive(Debug, Serialize)]
struct ScoreOutput {
    /// Mean of the per-frame scores.
    score: f64,
    frames: usize,
    frame_scores: Vec<f64>,
    /// Per-band partial sums averaged over frames.
    subbands: Vec<SubbandReport>,
    config: FedConfig,
    geometry: ViewGeometry,
    gaze: GazePoint,
}

pub fn score(args: ScoreArgs) -> CliResult {
    let config = args.fed.config();
    config.validate()?;
    let gaze = parse_gaze(&args.gaze)?;
    let refs = load_input(&args.reference, &args.input)?;
    let dists = load_input(&args.distorted, &args.input)?;
    if refs.len() != dists.len() {
        return Err(CliError::Input(format!(
            "{} reference frames but {} distorted frames",
            refs.len(),
            dists.len()
        )));
    }
    let (h, w) = refs[0].dims();
    let geometry = ViewGeometry::new(w, args.fov)?;
    let scorer = FedScorer::new(geometry, config)?;
    let gaze = match gaze {
        Gaze::Center => GazePoint::center_of(h, w),
        Gaze::At(g) => g,
    };
    let reports = refs
        .iter()
        .zip(&dists)
        .map(|(r, d)| scorer.score(r, d, gaze))
        .collect::<Result<Vec<_>, _>>()?;

    let n = reports.len() as f64;
    let frame_scores: Vec<f64> = reports.iter().map(|r| r.score).collect();
    let mut subbands = reports[0].subbands.clone();
    for (k, band) in subbands.iter_mut().enumerate() {
        band.partial = reports.iter().map(|r| r.subbands[k].partial).sum::<f64>() / n;
        band.active = reports.iter().any(|r| r.subbands[k].active);
    }
    let out = ScoreOutput {
        score: frame_scores.iter().sum::<f64>() / n,
        frames: reports.len(),
        frame_scores,
        subbands,
        config,
        geometry,
        gaze,
    };
    let text = match args.report {
        ReportFormat::Json => to_json(&out),
        ReportFormat::Csv => score_csv(&out),
    };
    match &args.out {
        Some(p) => write_text(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn score_csv(out: &ScoreOutput) -> String {
    let c = &out.config;
    let mut s = String::from(
        "k,f_k_cpd,partial,active,score,frames,n_subbands,block_size,sigma_w,bank,fov_deg,gaze_i,gaze_j\n",
    );
    for b in &out.subbands {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            b.k,
            b.f_k_cpd,
            b.partial,
            b.active,
            out.score,
            out.frames,
            c.n_subbands,
            c.block_size,
            c.sigma_w,
            c.filter.name(),
            out.geometry.fov_deg(),
            out.gaze.i0,
            out.gaze.j0
        );
    }
    s
}

#[derive(Debug, Serialize)]
struct ViewportEntry {
    index: usize,
    yaw_deg: f64,
    pitch_deg: f64,
    dir: String,
}

#[derive(Debug, Serialize)]
struct ViewportManifest {
    input: String,
    n_lon: usize,
    n_lat: usize,
    fov_deg: f64,
    width: usize,
    height: usize,
    interpolation: fed_core::viewport::Interpolation,
    frames: usize,
    viewports: Vec<ViewportEntry>,
}

pub fn viewports(args: ViewportArgs) -> CliResult {
    let (n_lon, n_lat) = args.grid;
    let grid = ViewportGrid::uniform(n_lon, n_lat, args.fov, args.size)?;
    let opts = SampleOptions {
        interpolation: args.interp.into(),
        force: args.force,
    };
    let frames = load_input(&args.input, &args.input_args)?;
    let dirs: Vec<PathBuf> = (0..grid.len()).map(|v| args.out.join(format!("vp{v:02}"))).collect();
    for d in &dirs {
        std::fs::create_dir_all(d).map_err(|e| FedError::io(d, e))?;
    }
    for (t, frame) in frames.iter().enumerate() {
        grid.viewports
            .par_iter()
            .zip(&dirs)
            .map(|(spec, dir)| {
                let view = extract_viewport_with(frame, spec, opts)?;
                store_frame(&view, &dir.join(format!("frame_{t:05}.pgm")), StoreFormat::Pgm)
            })
            .collect::<Result<Vec<()>, FedError>>()?;
    }
    let manifest = ViewportManifest {
        input: args.input.display().to_string(),
        n_lon,
        n_lat,
        fov_deg: args.fov,
        width: args.size,
        height: args.size,
        interpolation: opts.interpolation,
        frames: frames.len(),
        viewports: grid
            .viewports
            .iter()
            .enumerate()
            .map(|(index, v)| ViewportEntry {
                index,
                yaw_deg: v.yaw_deg,
                pitch_deg: v.pitch_deg,
                dir: format!("vp{index:02}"),
            })
            .collect(),
    };
    write_text(&args.out.join("manifest.json"), &to_json(&manifest))
}

fn sibling(path: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    path.with_file_name(format!("{stem}{suffix}.{ext}"))
}

pub fn eval(args: EvalArgs) -> CliResult {
    let entries = load_manifest(&args.manifest)?;
    let grid = match args.grid.trim() {
        "none" => None,
        g => {
            let (a, b) = parse_grid(g).map_err(CliError::Input)?;
            Some(ViewportGrid::uniform(a, b, args.fov, args.size)?)
        }
    };
    let opts = EvalOptions {
        config: args.fed.config(),
        fov_deg: args.fov,
        grid,
        sampling: SampleOptions {
            interpolation: args.interp.into(),
            force: args.force,
        },
        base_dir: args
            .manifest
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default(),
    };
    let report = evaluate_manifest(&entries, &opts)?;
    let summary = report.summary_csv();
    write_text(&args.out, &summary)?;
    write_text(&sibling(&args.out, "_entries", "csv"), &report.entries_csv())?;
    write_text(&sibling(&args.out, "", "json"), &to_json(&report))?;
    print!("{summary}");
    if !report.correlations.fit.converged {
        return Err(CliError::Numeric("logistic fit did not converge".into()));
    }
    Ok(())
}

pub fn bank_inspect(args: BankArgs) -> CliResult {
    let kind: FilterKind = args.bank.into();
    let spec = if args.matched {
        FilterBankSpec::matched_width(kind, args.subbands)?
    } else {
        FilterBankSpec::uniform(kind, args.subbands)?
    };
    let geom = ViewGeometry::new(args.image_width, args.fov)?;
    if args.samples == 0 {
        return Err(CliError::Input("--samples must be >= 1".into()));
    }
    if let Some(path) = &args.out {
        let mut s = String::from("r");
        for k in 1..=spec.len() {
            let _ = write!(s, ",band_{k}");
        }
        s.push('\n');
        for i in 0..=args.samples {
            let r = 0.5 * i as f64 / args.samples as f64;
            let _ = write!(s, "{r}");
            for k in 0..spec.len() {
                let _ = write!(s, ",{}", spec.evaluate_response(k, r));
            }
            s.push('\n');
        }
        write_text(path, &s)?;
    }
    let mut s = String::from("bank,k,center,half_width,mean_frequency_cpd,out_of_band_energy\n");
    for k in 0..spec.len() {
        let b = spec.band(k);
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            kind.name(),
            k + 1,
            b.center,
            b.half_width,
            spec.mean_frequency_cpd(k, &geom),
            spec.out_of_band_energy_fraction(k)
        );
    }
    print!("{s}");
    Ok(())
}
