use std::io::Write;

use fed_core::io::{
    load_frame, raw_frame_count, store_frame, Chroma, FrameFormat, LumaMatrix, RawYuvLayout,
    StoreFormat, Y4mReader,
};
use fed_core::LuminanceFrame;

fn ramp(h: usize, w: usize) -> LuminanceFrame {
    LuminanceFrame::from_fn(h, w, |i, j| ((i * 37 + j * 11) % 256) as f64)
}

#[test]
fn pgm_store_then_load() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("a.pgm");
    let f = ramp(7, 9);
    store_frame(&f, &p, StoreFormat::Pgm).unwrap();
    assert_eq!(load_frame(&p, FrameFormat::from_path(&p).unwrap()).unwrap(), f);
}

#[test]
fn yuv420_luma_plane_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("a.yuv");
    let f = ramp(6, 10);
    store_frame(&f, &p, StoreFormat::RawYuv(Chroma::Yuv420)).unwrap();
    let layout = RawYuvLayout { width: 10, height: 6, chroma: Chroma::Yuv420 };
    assert_eq!(std::fs::metadata(&p).unwrap().len() as usize, 60 + 30);
    let g = load_frame(&p, FrameFormat::RawYuv { layout, index: 0 }).unwrap();
    assert_eq!(g, f);
    assert_eq!(raw_frame_count(&p, layout).unwrap(), 1);
    assert!(load_frame(&p, FrameFormat::RawYuv { layout, index: 1 }).is_err());
}

#[test]
fn yuv_sidecar_and_second_frame() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("b.yuv");
    let layout = RawYuvLayout { width: 4, height: 2, chroma: Chroma::Yuv444 };
    let mut bytes = vec![0u8; layout.frame_bytes()];
    bytes.extend((0..8).map(|v| v as u8 * 10));
    bytes.extend(vec![128u8; 16]);
    std::fs::write(&p, bytes).unwrap();
    std::fs::write(dir.path().join("b.yuv.json"), r#"{"width":4,"height":2,"chroma":"yuv444"}"#).unwrap();
    let FrameFormat::RawYuv { layout: got, .. } = FrameFormat::from_path(&p).unwrap() else {
        panic!("expected raw yuv");
    };
    assert_eq!(got, layout);
    let f = load_frame(&p, FrameFormat::RawYuv { layout, index: 1 }).unwrap();
    assert_eq!(f.data(), &[0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0]);
}

#[test]
fn png_rgb_uses_selected_luma() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.png");
    {
        let file = std::fs::File::create(&p).unwrap();
        let mut enc = png::Encoder::new(std::io::BufWriter::new(file), 2, 1);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().unwrap();
        w.write_image_data(&[255, 255, 255, 200, 100, 50]).unwrap();
    }
    let f = load_frame(&p, FrameFormat::Png(LumaMatrix::Bt709)).unwrap();
    assert!((f.get(0, 0) - 255.0).abs() < 1e-9);
    assert!((f.get(0, 1) - (0.2126 * 200.0 + 0.7152 * 100.0 + 0.0722 * 50.0)).abs() < 1e-9);
    let g = load_frame(&p, FrameFormat::Png(LumaMatrix::Bt601)).unwrap();
    assert!((g.get(0, 1) - (0.299 * 200.0 + 0.587 * 100.0 + 0.114 * 50.0)).abs() < 1e-9);
}

#[test]
fn y4m_frames_stream() {
    let mut buf = Vec::new();
    {
        let mut enc = y4m::encode(4, 2, y4m::Ratio::new(30, 1))
            .with_colorspace(y4m::Colorspace::C420jpeg)
            .write_header(&mut buf)
            .unwrap();
        for k in 0..3u8 {
            let y = vec![k * 50; 8];
            let c = vec![128u8; 2];
            enc.write_frame(&y4m::Frame::new([&y, &c, &c], None)).unwrap();
        }
    }
    let mut r = Y4mReader::new(&buf[..]).unwrap();
    assert_eq!(r.dims(), (2, 4));
    let mut seen = 0;
    while let Some(f) = r.next_frame().unwrap() {
        assert!(f.data().iter().all(|&v| v == seen as f64 * 50.0));
        seen += 1;
    }
    assert_eq!(seen, 3);

    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("d.y4m");
    std::fs::File::create(&p).unwrap().write_all(&buf).unwrap();
    let f = load_frame(&p, FrameFormat::Y4m { index: 2 }).unwrap();
    assert_eq!(f.get(1, 3), 100.0);
    assert!(load_frame(&p, FrameFormat::Y4m { index: 3 }).is_err());
}

#[test]
fn y4m_high_bit_depth_rejected() {
    let mut buf = Vec::new();
    {
        let mut enc = y4m::encode(2, 2, y4m::Ratio::new(30, 1))
            .with_colorspace(y4m::Colorspace::C420p10)
            .write_header(&mut buf)
            .unwrap();
        let y = vec![0u8; 8];
        let c = vec![0u8; 2];
        enc.write_frame(&y4m::Frame::new([&y, &c, &c], None)).unwrap();
    }
    assert!(Y4mReader::new(&buf[..]).is_err());
}

#[test]
fn unknown_extension_is_an_error() {
    assert!(FrameFormat::from_path(std::path::Path::new("x.bmp")).is_err());
    assert!(load_frame(std::path::Path::new("/nonexistent.pgm"), FrameFormat::Pgm).is_err());
}

proptest::proptest! {
    #[test]
    fn pgm_identity_on_integer_frames(h in 1usize..12, w in 1usize..12, seed in 0u64..1000) {
        let f = LuminanceFrame::from_fn(h, w, |i, j| ((i as u64 * 131 + j as u64 * 17 + seed * 7) % 256) as f64);
        let bytes = fed_core::io::encode_pgm(&f);
        proptest::prop_assert_eq!(fed_core::io::decode_pgm(&bytes).unwrap(), f);
    }
}
