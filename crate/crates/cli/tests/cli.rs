use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use elastic_seg::pgm::Pgm;
use elastic_seg::BinaryMask;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_elastic-seg")).args(args).output().expect("spawn binary")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(args: &[&str]) -> String {
    let o = run(args);
    assert_eq!(o.status.code(), Some(0), "{args:?}\nstdout: {}\nstderr: {}", stdout(&o), stderr(&o));
    stdout(&o)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Value of `key=...` in the command output.
fn field(out: &str, key: &str) -> f64 {
    out.split_whitespace()
        .find_map(|tok| tok.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("{key} missing from {out}"))
        .parse()
        .unwrap()
}

fn write_disc(path: &Path, n: usize, r: f64) {
    let mask = BinaryMask::disc(n, n, n as f64 / 2.0, n as f64 / 2.0, r);
    fs::write(path, Pgm::from_mask(&mask).encode()).unwrap();
}

#[test]
fn phantom_is_deterministic_and_complete() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        ok(&["phantom", "--out", p(d), "--n", "5", "--size", "32", "--seed", "7"]);
    }
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 11);
    for name in &names {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name:?}");
    }
    let manifest = fs::read_to_string(a.join("manifest.csv")).unwrap();
    let lines: Vec<_> = manifest.lines().collect();
    assert_eq!(lines[0], "id,seed,foreground_frac");
    assert_eq!(lines.len(), 6);
    assert!(lines[1].starts_with("0000,7,"));
    assert!(lines[5].starts_with("0004,11,"));
}

#[test]
fn phantom_reports_unwritable_output() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, b"x").unwrap();
    let o = run(&["phantom", "--out", p(&blocker.join("sub")), "--n", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!stderr(&o).is_empty());
}

#[test]
fn energy_of_perfect_prediction_vanishes() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.pgm");
    write_disc(&m, 32, 7.0);
    let out = ok(&["energy", "--gt", p(&m), "--pred", p(&m), "--alpha", "1"]);
    assert!(field(&out, "E_spectral") <= 1e-10);
}

#[test]
fn energy_oracle_agrees_on_phantom() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["phantom", "--out", p(dir.path()), "--n", "1", "--size", "16", "--seed", "2", "--branches", "2"]);
    let out = ok(&[
        "energy",
        "--gt",
        p(&dir.path().join("msk_0000.pgm")),
        "--pred",
        p(&dir.path().join("img_0000.pgm")),
        "--oracle",
    ]);
    assert!(field(&out, "rel_diff") <= 1e-10);
    assert!(field(&out, "E_direct") > 0.0);
}

#[test]
fn energy_input_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let (small, big) = (dir.path().join("s.pgm"), dir.path().join("b.pgm"));
    write_disc(&small, 16, 4.0);
    write_disc(&big, 32, 4.0);
    let missing = run(&["energy", "--gt", p(&dir.path().join("none.pgm")), "--pred", p(&small)]);
    assert_eq!(missing.status.code(), Some(2));
    let mismatch = run(&["energy", "--gt", p(&small), "--pred", p(&big)]);
    assert_eq!(mismatch.status.code(), Some(2));
    assert!(stderr(&mismatch).contains("dimension mismatch"));
    let ascii = dir.path().join("a.pgm");
    fs::write(&ascii, "P2\n2 2\n255\n0 0 0 0\n").unwrap();
    let o = run(&["energy", "--gt", p(&ascii), "--pred", p(&ascii)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("P2"), "{}", stderr(&o));
    let usage = run(&["energy", "--gt", p(&small)]);
    assert_eq!(usage.status.code(), Some(2));
}

#[test]
fn energy_reads_greyscale_png() {
    let dir = tempfile::tempdir().unwrap();
    let mask = BinaryMask::disc(16, 16, 8.0, 8.0, 4.0);
    let png_path = dir.path().join("m.png");
    {
        let file = fs::File::create(&png_path).unwrap();
        let mut enc = png::Encoder::new(file, 16, 16);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().unwrap();
        let data: Vec<u8> = mask.values().iter().map(|&v| v * 255).collect();
        w.write_image_data(&data).unwrap();
    }
    let pgm_path = dir.path().join("m.pgm");
    fs::write(&pgm_path, Pgm::from_mask(&mask).encode()).unwrap();
    let from_png = ok(&["energy", "--gt", p(&png_path), "--pred", p(&pgm_path), "--alpha", "0.35"]);
    let from_pgm = ok(&["energy", "--gt", p(&pgm_path), "--pred", p(&pgm_path), "--alpha", "0.35"]);
    assert_eq!(from_png, from_pgm);
}

#[test]
fn gradcheck_passes_for_loss_and_network() {
    let out = ok(&["gradcheck", "--size", "12", "--seeds", "10"]);
    assert!(field(&out, "max_relative_error") <= 1e-5);
    assert!(out.trim_end().ends_with("PASS"));
    for loss in ["bce", "dice", "surface", "pil+bce:0.5"] {
        ok(&["gradcheck", "--size", "10", "--seeds", "3", "--loss", loss]);
    }
    let out = ok(&["gradcheck", "--net", "--size", "8", "--seeds", "5"]);
    assert!(field(&out, "max_relative_error") <= 1e-4);
    let bad = run(&["gradcheck", "--loss", "focal"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn evolve_shifted_disc_demo() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.pgm");
    write_disc(&m, 64, 6.0);
    let out_dir = dir.path().join("run");
    let out = ok(&[
        "evolve", "--gt", p(&m), "--init", "shifted", "--shift", "6", "--alpha", "1", "--eta", "0.5", "--steps", "500",
        "--snapshot-every", "100", "--tol", "0", "--out", p(&out_dir),
    ]);
    assert!(field(&out, "iou") >= 0.95, "{out}");
    let csv = fs::read_to_string(out_dir.join("energy.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("step,energy"));
    let energies: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(energies.len(), 501);
    assert!(energies.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    let snaps = fs::read_dir(&out_dir)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("snap_"))
        .count();
    assert_eq!(snaps, 500 / 100);
    assert!(out_dir.join("final.pgm").is_file());
}

#[test]
fn evolve_uniform_start_recovers_two_discs() {
    let dir = tempfile::tempdir().unwrap();
    let mask = BinaryMask::from_fn(48, 48, |x, y| {
        let d1 = (x as f64 - 14.0).powi(2) + (y as f64 - 16.0).powi(2);
        let d2 = (x as f64 - 33.0).powi(2) + (y as f64 - 30.0).powi(2);
        d1 <= 36.0 || d2 <= 49.0
    });
    let m = dir.path().join("m.pgm");
    fs::write(&m, Pgm::from_mask(&mask).encode()).unwrap();
    let out = ok(&["evolve", "--gt", p(&m), "--init", "uniform", "--alpha", "1", "--out", p(&dir.path().join("r"))]);
    assert!(field(&out, "iou") >= 0.9, "{out}");
}

#[test]
fn train_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&["phantom", "--out", p(&data), "--n", "1", "--size", "32", "--seed", "4", "--branches", "3"]);
    let model = dir.path().join("model.ebl");
    let log = dir.path().join("log.csv");
    let args = [
        "train", "--data", p(&data), "--split", "all", "--loss", "pil", "--epochs", "300", "--seed", "1", "--out",
        p(&model), "--log", p(&log),
    ];
    ok(&args);
    let first = fs::read(&model).unwrap();
    assert_eq!(&first[..4], b"EBL1");
    assert_eq!(fs::read_to_string(&log).unwrap().lines().count(), 301);

    // Same seed, same bytes.
    ok(&args);
    assert_eq!(fs::read(&model).unwrap(), first);

    let metrics = dir.path().join("metrics.csv");
    let out = ok(&[
        "eval", "--model", p(&model), "--data", p(&data), "--split", "all", "--out", p(&metrics), "--loss", "pil",
    ]);
    let csv = fs::read_to_string(&metrics).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines[0], "method,loss,image_id,sens,spec,f1,auc");
    assert_eq!(lines.len(), 2);
    let f1: f64 = lines[1].split(',').nth(5).unwrap().parse().unwrap();
    assert!(f1 >= 0.95, "{csv}");
    assert!(lines[1].starts_with("toynet,pil,0000,"));
    assert!(out.contains("macro:"));
}

#[test]
fn eval_of_oracle_predictions_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&["phantom", "--out", p(&data), "--n", "4", "--size", "24"]);
    let preds = dir.path().join("preds");
    fs::create_dir(&preds).unwrap();
    for id in ["0001", "0003"] {
        fs::copy(data.join(format!("msk_{id}.pgm")), preds.join(format!("pred_{id}.pgm"))).unwrap();
    }
    let metrics = dir.path().join("m.csv");
    ok(&["eval", "--predictions", p(&preds), "--data", p(&data), "--out", p(&metrics)]);
    let csv = fs::read_to_string(&metrics).unwrap();
    let rows: Vec<_> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    for row in rows {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(&cols[3..], ["1.000000"; 4], "{row}");
    }
}

#[test]
fn eval_refuses_corrupt_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&["phantom", "--out", p(&data), "--n", "2", "--size", "16"]);
    let model = dir.path().join("bad.ebl");
    fs::write(&model, b"NOPE\x03\x00\x00\x00").unwrap();
    let o = run(&["eval", "--model", p(&model), "--data", p(&data), "--out", p(&dir.path().join("m.csv"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("magic"), "{}", stderr(&o));
}

#[test]
fn bench_emits_exact_header_and_rows() {
    let out = ok(&["bench", "--sizes", "8,16", "--repeats", "2"]);
    let lines: Vec<_> = out.lines().collect();
    assert_eq!(lines[0], "size,t_fft_ns,t_direct_ns,ratio");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("8,"));
    assert!(lines[2].starts_with("16,"));
    let bad = run(&["bench", "--repeats", "0", "--sizes", "8"]);
    assert_eq!(bad.status.code(), Some(2));
}
