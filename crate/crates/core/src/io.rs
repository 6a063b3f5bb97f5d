//! Frame readers and writers: binary PGM, raw planar YUV, Y4M streams and
//! 8-bit PNG (converted to luma).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{FedError, Result};
use crate::frame::LuminanceFrame;

/// RGB to luma weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LumaMatrix {
    #[default]
    Bt709,
    Bt601,
}

impl LumaMatrix {
    pub fn weights(self) -> [f64; 3] {
        match self {
            LumaMatrix::Bt709 => [0.2126, 0.7152, 0.0722],
            LumaMatrix::Bt601 => [0.299, 0.587, 0.114],
        }
    }

    pub fn luma(self, r: f64, g: f64, b: f64) -> f64 {
        let [wr, wg, wb] = self.weights();
        wr * r + wg * g + wb * b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Chroma {
    /// Luma plane only.
    Yuv400,
    Yuv420,
    Yuv444,
}

impl Chroma {
    fn chroma_samples(self, height: usize, width: usize) -> usize {
        match self {
            Chroma::Yuv400 => 0,
            Chroma::Yuv420 => 2 * height.div_ceil(2) * width.div_ceil(2),
            Chroma::Yuv444 => 2 * height * width,
        }
    }
}

/// Layout of a headerless planar 8-bit YUV file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawYuvLayout {
    pub width: usize,
    pub height: usize,
    pub chroma: Chroma,
}

impl RawYuvLayout {
    pub fn frame_bytes(&self) -> usize {
        self.width * self.height + self.chroma.chroma_samples(self.height, self.width)
    }

    /// Reads `<path>.json`, e.g. `{"width":1024,"height":1024,"chroma":"yuv420"}`.
    pub fn from_sidecar(path: &Path) -> Result<Self> {
        let mut side = path.as_os_str().to_owned();
        side.push(".json");
        let text = std::fs::read_to_string(&side).map_err(|e| FedError::io(&side, e))?;
        serde_json::from_str(&text).map_err(|e| FedError::format("yuv sidecar", e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FrameFormat {
    Pgm,
    Png(LumaMatrix),
    RawYuv { layout: RawYuvLayout, index: usize },
    Y4m { index: usize },
}

impl FrameFormat {
    /// Guess from the file extension; raw YUV needs a sidecar.
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .unwrap_or_default();
        match ext.as_str() {
            "pgm" => Ok(FrameFormat::Pgm),
            "png" => Ok(FrameFormat::Png(LumaMatrix::default())),
            "y4m" => Ok(FrameFormat::Y4m { index: 0 }),
            "yuv" => Ok(FrameFormat::RawYuv {
                layout: RawYuvLayout::from_sidecar(path)?,
                index: 0,
            }),
            other => Err(FedError::format(
                "frame",
                format!("cannot infer format from extension {other:?}"),
            )),
        }
    }
}

pub fn load_frame(path: &Path, format: FrameFormat) -> Result<LuminanceFrame> {
    match format {
        FrameFormat::Pgm => {
            let bytes = std::fs::read(path).map_err(|e| FedError::io(path, e))?;
            decode_pgm(&bytes)
        }
        FrameFormat::Png(matrix) => {
            let file = File::open(path).map_err(|e| FedError::io(path, e))?;
            decode_png(BufReader::new(file), matrix)
        }
        FrameFormat::RawYuv { layout, index } => {
            let mut file = File::open(path).map_err(|e| FedError::io(path, e))?;
            read_raw_y(&mut file, layout, index)
        }
        FrameFormat::Y4m { index } => {
            let file = File::open(path).map_err(|e| FedError::io(path, e))?;
            let mut reader = Y4mReader::new(BufReader::new(file))?;
            for _ in 0..index {
                reader
                    .next_frame()?
                    .ok_or_else(|| FedError::format("y4m", format!("frame {index} out of range")))?;
            }
            reader
                .next_frame()?
                .ok_or_else(|| FedError::format("y4m", format!("frame {index} out of range")))
        }
    }
}

/// Loads frames `range.0..range.1` (all frames when `None`) of a PGM, PNG,
/// Y4M or raw YUV source. Still images count as a single frame.
pub fn load_sequence(
    path: &Path,
    layout: Option<RawYuvLayout>,
    range: Option<(usize, usize)>,
) -> Result<Vec<LuminanceFrame>> {
    let format = match layout {
        Some(layout) => FrameFormat::RawYuv { layout, index: 0 },
        None => FrameFormat::from_path(path)?,
    };
    let (start, end) = range.unwrap_or((0, usize::MAX));
    if start >= end {
        return Err(FedError::InvalidParameter(format!("empty frame range {start}..{end}")));
    }
    let frames = match format {
        FrameFormat::Pgm | FrameFormat::Png(_) => {
            if start > 0 {
                return Err(FedError::InvalidParameter(format!(
                    "frame {start} requested from a still image"
                )));
            }
            vec![load_frame(path, format)?]
        }
        FrameFormat::RawYuv { layout, .. } => {
            let count = raw_frame_count(path, layout)?;
            let mut file = File::open(path).map_err(|e| FedError::io(path, e))?;
            (start..end.min(count))
                .map(|t| read_raw_y(&mut file, layout, t))
                .collect::<Result<_>>()?
        }
        FrameFormat::Y4m { .. } => {
            let file = File::open(path).map_err(|e| FedError::io(path, e))?;
            let mut reader = Y4mReader::new(BufReader::new(file))?;
            let mut out = Vec::new();
            let mut t = 0;
            while t < end {
                match reader.next_frame()? {
                    Some(f) if t >= start => out.push(f),
                    Some(_) => {}
                    None => break,
                }
                t += 1;
            }
            out
        }
    };
    if frames.is_empty() {
        return Err(FedError::format("sequence", format!("no frames in range for {}", path.display())));
    }
    Ok(frames)
}

/// Number of frames in a raw YUV file.
pub fn raw_frame_count(path: &Path, layout: RawYuvLayout) -> Result<usize> {
    let len = std::fs::metadata(path).map_err(|e| FedError::io(path, e))?.len() as usize;
    Ok(len / layout.frame_bytes())
}

fn read_raw_y<R: Read + Seek>(reader: &mut R, layout: RawYuvLayout, index: usize) -> Result<LuminanceFrame> {
    let offset = (index * layout.frame_bytes()) as u64;
    reader
        .seek(SeekFrom::Start(offset))
        .map_err(|e| FedError::format("yuv", e.to_string()))?;
    let mut y = vec![0u8; layout.width * layout.height];
    reader
        .read_exact(&mut y)
        .map_err(|_| FedError::format("yuv", format!("truncated payload for frame {index}")))?;
    bytes_to_frame(layout.height, layout.width, &y)
}

fn bytes_to_frame(height: usize, width: usize, bytes: &[u8]) -> Result<LuminanceFrame> {
    LuminanceFrame::new(height, width, bytes.iter().map(|&b| b as f64).collect())
}

/// Streaming Y4M reader yielding the luma plane of each frame.
pub struct Y4mReader<R: Read> {
    decoder: y4m::Decoder<R>,
}

impl<R: Read> Y4mReader<R> {
    pub fn new(reader: R) -> Result<Self> {
        let decoder = y4m::decode(reader).map_err(|e| FedError::format("y4m", format!("{e:?}")))?;
        if decoder.get_bit_depth() != 8 {
            return Err(FedError::format(
                "y4m",
                format!("unsupported bit depth {}", decoder.get_bit_depth()),
            ));
        }
        Ok(Self { decoder })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.decoder.get_height(), self.decoder.get_width())
    }

    pub fn next_frame(&mut self) -> Result<Option<LuminanceFrame>> {
        let (h, w) = self.dims();
        match self.decoder.read_frame() {
            Ok(frame) => bytes_to_frame(h, w, frame.get_y_plane()).map(Some),
            Err(y4m::Error::EOF) => Ok(None),
            Err(e) => Err(FedError::format("y4m", format!("{e:?}"))),
        }
    }
}

fn pgm_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() && bytes[*pos] != b'#' {
        *pos += 1;
    }
    if start == *pos {
        return Err(FedError::format("pgm", "unexpected end of header"));
    }
    Ok(&bytes[start..*pos])
}

fn pgm_number(bytes: &[u8], pos: &mut usize, what: &str) -> Result<usize> {
    let tok = pgm_token(bytes, pos)?;
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| FedError::format("pgm", format!("bad {what} field")))
}

/// Decodes an 8-bit binary (P5) PGM. Samples are rescaled to 0..=255 when
/// the maximum value is below 255.
pub fn decode_pgm(bytes: &[u8]) -> Result<LuminanceFrame> {
    let mut pos = 0;
    if pgm_token(bytes, &mut pos)? != b"P5" {
        return Err(FedError::format("pgm", "missing P5 magic"));
    }
    let width = pgm_number(bytes, &mut pos, "width")?;
    let height = pgm_number(bytes, &mut pos, "height")?;
    let maxval = pgm_number(bytes, &mut pos, "maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(FedError::format(
            "pgm",
            format!("unsupported bit depth (maxval {maxval})"),
        ));
    }
    if width == 0 || height == 0 {
        return Err(FedError::format("pgm", "zero dimension"));
    }
    // exactly one whitespace byte separates the header from the payload
    pos += 1;
    let need = width * height;
    let payload = bytes.get(pos..pos + need).ok_or_else(|| {
        FedError::format(
            "pgm",
            format!("truncated payload: need {need} bytes, have {}", bytes.len().saturating_sub(pos)),
        )
    })?;
    let scale = 255.0 / maxval as f64;
    LuminanceFrame::new(
        height,
        width,
        payload
            .iter()
            .map(|&b| if maxval == 255 { b as f64 } else { b as f64 * scale })
            .collect(),
    )
}

pub fn decode_png<R: Read>(reader: R, matrix: LumaMatrix) -> Result<LuminanceFrame> {
    let mut decoder = png::Decoder::new(BufReader::new(ReadSeekAdapter::new(reader)?));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder
        .read_info()
        .map_err(|e| FedError::format("png", e.to_string()))?;
    let mut buf = vec![0u8; reader.output_buffer_size().unwrap_or(0)];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| FedError::format("png", e.to_string()))?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(FedError::format(
            "png",
            format!("unsupported bit depth {:?}", info.bit_depth),
        ));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let data = &buf[..info.buffer_size()];
    let channels = info.color_type.samples();
    let stride = info.line_size;
    let frame = LuminanceFrame::from_fn(h, w, |i, j| {
        let px = &data[i * stride + j * channels..];
        match channels {
            1 | 2 => px[0] as f64,
            _ => matrix.luma(px[0] as f64, px[1] as f64, px[2] as f64),
        }
    });
    Ok(frame)
}

/// The png decoder wants `BufRead + Seek`; buffer the whole stream.
struct ReadSeekAdapter(std::io::Cursor<Vec<u8>>);

impl ReadSeekAdapter {
    fn new<R: Read>(mut reader: R) -> Result<Self> {
        let mut bytes = Vec::new();
        reader
            .read_to_end(&mut bytes)
            .map_err(|e| FedError::format("png", e.to_string()))?;
        Ok(Self(std::io::Cursor::new(bytes)))
    }
}

impl Read for ReadSeekAdapter {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        self.0.read(buf)
    }
}

impl Seek for ReadSeekAdapter {
    fn seek(&mut self, pos: SeekFrom) -> std::io::Result<u64> {
        self.0.seek(pos)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StoreFormat {
    Pgm,
    /// Raw planar 8-bit; chroma planes (if any) are written as neutral 128.
    RawYuv(Chroma),
}

/// Round half up and clamp to 0..=255.
pub fn quantize(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

pub fn encode_pgm(frame: &LuminanceFrame) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    out.extend(frame.data().iter().map(|&v| quantize(v)));
    out
}

pub fn store_frame(frame: &LuminanceFrame, path: &Path, format: StoreFormat) -> Result<()> {
    let file = File::create(path).map_err(|e| FedError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let write = |w: &mut BufWriter<File>, bytes: &[u8]| w.write_all(bytes).map_err(|e| FedError::io(path, e));
    match format {
        StoreFormat::Pgm => write(&mut w, &encode_pgm(frame))?,
        StoreFormat::RawYuv(chroma) => {
            let y: Vec<u8> = frame.data().iter().map(|&v| quantize(v)).collect();
            write(&mut w, &y)?;
            let c = vec![128u8; chroma.chroma_samples(frame.height(), frame.width())];
            write(&mut w, &c)?;
        }
    }
    w.flush().map_err(|e| FedError::io(path, e))
}
