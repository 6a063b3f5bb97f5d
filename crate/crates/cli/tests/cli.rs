use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fed_core::io::{store_frame, StoreFormat};
use fed_core::synth::{add_noise, gaussian_blur, natural_image};
use serde_json::Value;

fn fed(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fed"))
        .args(args)
        .env_remove("FED_JOBS")
        .output()
        .expect("run fed")
}

fn write_pgm(dir: &Path, name: &str, frame: &fed_core::LuminanceFrame) -> PathBuf {
    let p = dir.join(name);
    store_frame(frame, &p, StoreFormat::Pgm).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn identical_inputs_score_zero_and_echo_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_pgm(dir.path(), "a.pgm", &natural_image(64, 64, 1));
    let out = fed(&["score", s(&a), s(&a)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["score"].as_f64().unwrap(), 0.0);
    assert_eq!(v["config"]["n_subbands"], 12);
    assert_eq!(v["config"]["block_size"], 4);
    assert_eq!(v["config"]["sigma_w"], 0.1);
    assert_eq!(v["config"]["filter"], "rectangular");
    assert_eq!(v["subbands"].as_array().unwrap().len(), 12);
    assert_eq!(v["gaze"]["i0"], 32.0);
}

#[test]
fn subband_sweep_and_csv_report() {
    let dir = tempfile::tempdir().unwrap();
    let img = natural_image(64, 64, 2);
    let a = write_pgm(dir.path(), "a.pgm", &img);
    let b = write_pgm(dir.path(), "b.pgm", &gaussian_blur(&img, 1.5));
    for n in ["6", "8", "10", "12"] {
        let out = fed(&["score", s(&a), s(&b), "--subbands", n, "--fov", "30"]);
        assert!(out.status.success());
        let v: Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(v["subbands"].as_array().unwrap().len().to_string(), n);
        assert!(v["score"].as_f64().unwrap() > 0.0);
    }
    let out = fed(&["score", s(&a), s(&b), "--report", "csv", "--bank", "dog", "--gaze", "10,20"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 13);
    assert!(lines[0].starts_with("k,f_k_cpd,partial,active,score"));
    assert!(lines[1].contains(",dog,90,10,20"));
}

#[test]
fn reports_are_deterministic_across_job_counts() {
    let dir = tempfile::tempdir().unwrap();
    let img = natural_image(64, 64, 3);
    let a = write_pgm(dir.path(), "a.pgm", &img);
    let b = write_pgm(dir.path(), "b.pgm", &add_noise(&img, 10.0, 4));
    let one = fed(&["--jobs", "1", "score", s(&a), s(&b)]);
    let four = fed(&["--jobs", "4", "score", s(&a), s(&b)]);
    let again = fed(&["score", s(&a), s(&b)]);
    assert!(one.status.success() && four.status.success());
    assert_eq!(one.stdout, four.stdout);
    assert_eq!(one.stdout, again.stdout);
    let env = Command::new(env!("CARGO_BIN_EXE_fed"))
        .args(["score", s(&a), s(&b)])
        .env("FED_JOBS", "2")
        .output()
        .unwrap();
    assert_eq!(env.stdout, one.stdout);
}

#[test]
fn input_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_pgm(dir.path(), "a.pgm", &natural_image(32, 32, 5));
    let b = write_pgm(dir.path(), "b.pgm", &natural_image(32, 48, 5));
    let bad = dir.path().join("bad.pgm");
    std::fs::write(&bad, b"P5\n4 4\n255\n\x00").unwrap();
    for args in [
        vec!["score", s(&a), s(&b)],
        vec!["score", s(&a), s(&bad)],
        vec!["score", s(&a), "/does/not/exist.pgm"],
        vec!["score", s(&a), s(&a), "--gaze", "nope"],
        vec!["score", s(&a), s(&a), "--block", "1"],
        vec!["score", s(&a), s(&a), "--bank", "hex"],
    ] {
        let out = fed(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn bank_inspect_writes_profiles() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("p.csv");
    let out = fed(&["bank-inspect", "--bank", "tri", "--subbands", "6", "--samples", "100", "--out", s(&csv)]);
    assert!(out.status.success());
    let summary = String::from_utf8(out.stdout).unwrap();
    assert_eq!(summary.lines().count(), 7);
    assert!(summary.starts_with("bank,k,center,half_width,mean_frequency_cpd,out_of_band_energy"));
    let profile = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = profile.lines().collect();
    assert_eq!(lines.len(), 102);
    assert_eq!(lines[0], "r,band_1,band_2,band_3,band_4,band_5,band_6");
}

#[test]
fn viewports_writes_grid_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let eq = write_pgm(dir.path(), "eq.pgm", &natural_image(64, 128, 6));
    let out_dir = dir.path().join("views");
    let out = fed(&["viewports", s(&eq), "--out", s(&out_dir), "--size", "16"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["viewports"].as_array().unwrap().len(), 18);
    assert_eq!(m["fov_deg"], 90.0);
    assert_eq!(m["width"], 16);
    assert_eq!(m["viewports"][6]["pitch_deg"], 0.0);
    assert!(out_dir.join("vp17/frame_00000.pgm").exists());

    let square = write_pgm(dir.path(), "sq.pgm", &natural_image(32, 32, 6));
    let out = fed(&["viewports", s(&square), "--out", s(&out_dir), "--size", "8"]);
    assert_eq!(out.status.code(), Some(2));
    let out = fed(&["viewports", s(&square), "--out", s(&out_dir), "--size", "8", "--force", "--grid", "2x1"]);
    assert!(out.status.success());
}

fn manifest_fixture(dir: &Path, distort: bool) -> PathBuf {
    let mut lines = String::new();
    for c in 0..3u64 {
        let img = natural_image(48, 48, 10 + c);
        write_pgm(dir, &format!("ref{c}.pgm"), &img);
        for (d, sigma) in [1.0, 2.0].into_iter().enumerate() {
            let dist = if distort { gaussian_blur(&img, sigma) } else { img.clone() };
            write_pgm(dir, &format!("dist{c}_{d}.pgm"), &dist);
            lines.push_str(&format!(
                "{{\"ref_path\":\"ref{c}.pgm\",\"dist_path\":\"dist{c}_{d}.pgm\",\"dmos\":{}}}\n",
                10.0 * (d + 1) as f64 + c as f64
            ));
        }
    }
    let p = dir.join("manifest.jsonl");
    std::fs::write(&p, lines).unwrap();
    p
}

#[test]
fn eval_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = manifest_fixture(dir.path(), true);
    let out_csv = dir.path().join("report.csv");
    let out = fed(&["eval", s(&manifest), "--out", s(&out_csv), "--grid", "none", "--fov", "20"]);
    assert!(matches!(out.status.code(), Some(0 | 3)), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = std::fs::read_to_string(&out_csv).unwrap();
    assert!(summary.starts_with("metric,n,plcc,srocc,krocc,rmse,converged\nFED,6,"));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["entries"].as_array().unwrap().len(), 6);
    let entries = std::fs::read_to_string(dir.path().join("report_entries.csv")).unwrap();
    assert_eq!(entries.lines().count(), 7);
}

#[test]
fn eval_degenerate_scores_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = manifest_fixture(dir.path(), false);
    let out_csv = dir.path().join("r.csv");
    let out = fed(&["eval", s(&manifest), "--out", s(&out_csv), "--grid", "none"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn eval_rejects_bad_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.jsonl");
    std::fs::write(&p, "{\"ref_path\": 3}\n").unwrap();
    let out = fed(&["eval", s(&p), "--out", s(&dir.path().join("r.csv"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
}
