use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fed_core::filterbank::{Boundary, FilterKind};
use fed_core::geometry::BlockReference;
use fed_core::io::{Chroma, LumaMatrix, RawYuvLayout};
use fed_core::viewport::Interpolation;
use fed_core::{fed::FedConfig, FedError};

mod commands;

#[derive(Parser, Debug)]
#[command(name = "fed", version, about = "Foveated entropic differencing quality metric")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "FED_JOBS")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Score a distorted frame or sequence against its reference.
    Score(ScoreArgs),
    /// Cut rectilinear viewports out of equirectangular frames.
    Viewports(ViewportArgs),
    /// Correlate FED with subjective scores over a JSON-lines manifest.
    Eval(EvalArgs),
    /// Dump filterbank radial profiles and per-band statistics.
    BankInspect(BankArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Bank {
    Rect,
    Tri,
    Dog,
}

impl From<Bank> for FilterKind {
    fn from(b: Bank) -> Self {
        match b {
            Bank::Rect => FilterKind::Rectangular,
            Bank::Tri => FilterKind::Triangular,
            Bank::Dog => FilterKind::Dog,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BlockRef {
    Corner,
    Center,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BoundaryArg {
    Circular,
    Mirror,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
enum ReportFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Luma {
    Bt709,
    Bt601,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ChromaArg {
    Yuv400,
    Yuv420,
    Yuv444,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum InterpArg {
    Bilinear,
    Bicubic,
}

impl From<InterpArg> for Interpolation {
    fn from(i: InterpArg) -> Self {
        match i {
            InterpArg::Bilinear => Interpolation::Bilinear,
            InterpArg::Bicubic => Interpolation::Bicubic,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct FedArgs {
    /// Number of radial subbands.
    #[arg(long, default_value_t = 12)]
    subbands: usize,
    /// Block size b (blocks are b x b).
    #[arg(long, default_value_t = 4)]
    block: usize,
    /// Neural noise standard deviation.
    #[arg(long = "sigma-w", default_value_t = 0.1)]
    sigma_w: f64,
    #[arg(long, value_enum, default_value_t = Bank::Rect)]
    bank: Bank,
    /// Use the rounded 0.0461 sensitivity decay.
    #[arg(long)]
    strict_decay: bool,
    /// Reuse the reference covariance for the distorted frame.
    #[arg(long)]
    share_model: bool,
    #[arg(long, value_enum, default_value_t = BlockRef::Corner)]
    block_reference: BlockRef,
    #[arg(long, value_enum, default_value_t = BoundaryArg::Circular)]
    boundary: BoundaryArg,
}

impl FedArgs {
    fn config(&self) -> FedConfig {
        FedConfig {
            n_subbands: self.subbands,
            block_size: self.block,
            sigma_w: self.sigma_w,
            filter: self.bank.into(),
            strict_decay: self.strict_decay,
            share_reference_model: self.share_model,
            block_reference: match self.block_reference {
                BlockRef::Corner => BlockReference::Corner,
                BlockRef::Center => BlockReference::Center,
            },
            boundary: match self.boundary {
                BoundaryArg::Circular => Boundary::Circular,
                BoundaryArg::Mirror => Boundary::Mirror,
            },
            ..FedConfig::default()
        }
    }
}

#[derive(Args, Debug, Clone)]
struct InputArgs {
    /// Width of headerless YUV input.
    #[arg(long)]
    width: Option<usize>,
    /// Height of headerless YUV input.
    #[arg(long)]
    height: Option<usize>,
    #[arg(long, value_enum, default_value_t = ChromaArg::Yuv420)]
    chroma: ChromaArg,
    /// RGB to luma conversion for PNG input.
    #[arg(long, value_enum, default_value_t = Luma::Bt709)]
    luma: Luma,
    /// Frame range START:END (END exclusive).
    #[arg(long, value_parser = parse_range)]
    frames: Option<(usize, usize)>,
}

impl InputArgs {
    fn layout(&self) -> Result<Option<RawYuvLayout>, FedError> {
        match (self.width, self.height) {
            (Some(width), Some(height)) => Ok(Some(RawYuvLayout {
                width,
                height,
                chroma: match self.chroma {
                    ChromaArg::Yuv400 => Chroma::Yuv400,
                    ChromaArg::Yuv420 => Chroma::Yuv420,
                    ChromaArg::Yuv444 => Chroma::Yuv444,
                },
            })),
            (None, None) => Ok(None),
            _ => Err(FedError::InvalidParameter(
                "--width and --height must be given together".into(),
            )),
        }
    }

    fn luma(&self) -> LumaMatrix {
        match self.luma {
            Luma::Bt709 => LumaMatrix::Bt709,
            Luma::Bt601 => LumaMatrix::Bt601,
        }
    }
}

#[derive(Args, Debug)]
struct ScoreArgs {
    reference: PathBuf,
    distorted: PathBuf,
    /// Gaze point as `row,col` in pixels, or `center`.
    #[arg(long, default_value = "center")]
    gaze: String,
    /// Horizontal field of view in degrees.
    #[arg(long, default_value_t = 90.0)]
    fov: f64,
    #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
    report: ReportFormat,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    fed: FedArgs,
    #[command(flatten)]
    input: InputArgs,
}

#[derive(Args, Debug)]
struct ViewportArgs {
    /// Equirectangular video (Y4M/YUV), still image, or directory of frames.
    input: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Longitudes x latitudes.
    #[arg(long, default_value = "6x3", value_parser = parse_grid)]
    grid: (usize, usize),
    #[arg(long, default_value_t = 90.0)]
    fov: f64,
    /// Square viewport side in pixels.
    #[arg(long, default_value_t = 1024)]
    size: usize,
    #[arg(long, value_enum, default_value_t = InterpArg::Bilinear)]
    interp: InterpArg,
    /// Accept inputs that are not 2:1.
    #[arg(long)]
    force: bool,
    #[command(flatten)]
    input_args: InputArgs,
}

#[derive(Args, Debug)]
struct EvalArgs {
    manifest: PathBuf,
    /// Summary CSV; the JSON report and per-entry CSV are written next to it.
    #[arg(long)]
    out: PathBuf,
    /// Viewport grid applied to each entry, or `none` to score frames as given.
    #[arg(long, default_value = "6x3")]
    grid: String,
    #[arg(long, default_value_t = 90.0)]
    fov: f64,
    #[arg(long, default_value_t = 1024)]
    size: usize,
    #[arg(long, value_enum, default_value_t = InterpArg::Bilinear)]
    interp: InterpArg,
    #[arg(long)]
    force: bool,
    #[command(flatten)]
    fed: FedArgs,
}

#[derive(Args, Debug)]
struct BankArgs {
    #[arg(long, value_enum, default_value_t = Bank::Rect)]
    bank: Bank,
    #[arg(long, default_value_t = 12)]
    subbands: usize,
    /// Use equal-width comparison bands instead of the scoring bank.
    #[arg(long)]
    matched: bool,
    /// Radial profile CSV (one column per band).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Radial samples on [0, 0.5] cycles/pixel.
    #[arg(long, default_value_t = 512)]
    samples: usize,
    /// Image width used to express band frequencies in cycles/degree.
    #[arg(long, default_value_t = 1024)]
    image_width: usize,
    #[arg(long, default_value_t = 90.0)]
    fov: f64,
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(':').ok_or("expected START:END")?;
    let a: usize = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: usize = b.trim().parse().map_err(|e| format!("{e}"))?;
    if a >= b {
        return Err(format!("empty range {a}:{b}"));
    }
    Ok((a, b))
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or("expected <lon>x<lat>, e.g. 6x3")?;
    let a: usize = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: usize = b.trim().parse().map_err(|e| format!("{e}"))?;
    if a == 0 || b == 0 {
        return Err("grid dimensions must be >= 1".into());
    }
    Ok((a, b))
}

/// Errors the CLI reports, split by exit status.
#[derive(Debug)]
pub enum CliError {
    Input(String),
    Numeric(String),
}

impl From<FedError> for CliError {
    fn from(e: FedError) -> Self {
        match e {
            FedError::Degenerate(_) => CliError::Numeric(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
        {
            eprintln!("fed: cannot configure thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Score(a) => commands::score(a),
        Command::Viewports(a) => commands::viewports(a),
        Command::Eval(a) => commands::eval(a),
        Command::BankInspect(a) => commands::bank_inspect(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Input(m)) => {
            eprintln!("fed: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Numeric(m)) => {
            eprintln!("fed: numeric failure: {m}");
            ExitCode::from(3)
        }
    }
}
