use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pansharp_core::metrics::QualityReport;
use pansharp_core::{read_raster, upsample, write_raster, Interpolation, RasterImage, SpectralWeights};
use pansharp_cli::manifest::{Mode, Patch, RunManifest};
use rand::{Rng, SeedableRng};

fn pansharp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pansharp")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = pansharp(args);
    assert!(
        out.status.success(),
        "pansharp {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn fails(args: &[&str]) -> String {
    let out = pansharp(args);
    assert!(!out.status.success(), "pansharp {args:?} unexpectedly succeeded");
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn sensor() -> pansharp_core::SensorSpec {
    pansharp_core::SensorSpec::new("fixture", 4, 11, 4).unwrap()
}

fn random(w: usize, h: usize, k: usize, seed: u64) -> RasterImage {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    RasterImage::new(w, h, k, 11, (0..w * h * k).map(|_| rng.random_range(1.0..2047.0f32) as f64).collect())
        .unwrap()
}

/// Writes one patch per `(pan, ms, reference, fused, pan_reduced)` tuple and
/// a manifest in `dir`.
fn fixture(dir: &Path, mode: Mode, patches: Vec<[Option<RasterImage>; 5]>) -> PathBuf {
    let mut m = RunManifest::new(dir, sensor(), mode, "fixture");
    for (i, imgs) in patches.into_iter().enumerate() {
        let mut paths: Vec<Option<PathBuf>> = Vec::new();
        for (slot, img) in imgs.iter().enumerate() {
            paths.push(img.as_ref().map(|img| {
                let rel = PathBuf::from(format!("p{i}_{slot}.psr"));
                write_raster(img, dir.join(&rel)).unwrap();
                rel
            }));
        }
        let mut p = Patch::new(format!("p{i}"), paths[0].clone().unwrap(), paths[1].clone().unwrap());
        p.reference = paths[2].clone();
        p.fused = paths[3].clone();
        p.pan_reduced = paths[4].clone();
        m.patches.push(p);
    }
    m.save(dir).unwrap()
}

fn all_files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn synth_writes_triples_and_is_reproducible() {
    let t = tempfile::tempdir().unwrap();
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    for dir in [&a, &b] {
        ok(&["synth", "--out", s(dir), "--count", "4", "--width", "64", "--height", "64", "--seed", "3"]);
    }
    let m = RunManifest::load(&a).unwrap();
    assert_eq!(m.patches.len(), 4);
    assert_eq!(m.mode, Mode::Full);
    for p in &m.patches {
        assert_eq!(read_raster(m.resolve(&p.pan)).unwrap().dims(), (64, 64, 1));
        assert_eq!(read_raster(m.resolve(&p.ms)).unwrap().dims(), (16, 16, 4));
        assert_eq!(read_raster(m.resolve(p.reference.as_ref().unwrap())).unwrap().dims(), (64, 64, 4));
    }
    assert_eq!(all_files(&a), all_files(&b));
}

#[test]
fn synth_thread_count_does_not_change_output() {
    let t = tempfile::tempdir().unwrap();
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    ok(&["synth", "--out", s(&a), "--count", "3", "--width", "32", "--height", "32", "--jobs", "1"]);
    ok(&["synth", "--out", s(&b), "--count", "3", "--width", "32", "--height", "32", "--jobs", "3"]);
    assert_eq!(all_files(&a), all_files(&b));
}

#[test]
fn synth_tiles_scenes() {
    let t = tempfile::tempdir().unwrap();
    ok(&[
        "synth", "--out", s(t.path()), "--count", "2", "--width", "128", "--height", "128", "--patch-size", "64",
        "--stride", "32",
    ]);
    let m = RunManifest::load(t.path()).unwrap();
    assert_eq!(m.patches.len(), 2 * 9);
    assert_eq!(m.patches[4].id, "scene0000_t004");
}

#[test]
fn synth_rejects_bad_dimensions() {
    let t = tempfile::tempdir().unwrap();
    let err = fails(&["synth", "--out", s(t.path()), "--width", "30", "--height", "32"]);
    assert!(err.contains("multiple of ratio"), "{err}");
    let err = fails(&["synth", "--out", s(t.path()), "--pan-weights", "0.5,0.5,0.5,0.5"]);
    assert!(err.contains("sum"), "{err}");
}

#[test]
fn degrade_geometry_and_reference() {
    let t = tempfile::tempdir().unwrap();
    let input = fixture(t.path(), Mode::Full, vec![[Some(random(256, 256, 1, 1)), Some(random(64, 64, 4, 2)), None, None, None]]);
    let out = t.path().join("reduced");
    ok(&["degrade", "--in", s(&input), "--out", s(&out)]);
    let m = RunManifest::load(&out).unwrap();
    assert_eq!(m.mode, Mode::Reduced);
    let p = &m.patches[0];
    assert_eq!(read_raster(m.resolve(&p.pan)).unwrap().dims(), (64, 64, 1));
    assert_eq!(read_raster(m.resolve(&p.ms)).unwrap().dims(), (16, 16, 4));
    assert_eq!(
        read_raster(m.resolve(p.reference.as_ref().unwrap())).unwrap(),
        read_raster(t.path().join("p0_1.psr")).unwrap()
    );
}

#[test]
fn degrade_keeps_constants_and_rejects_bad_geometry() {
    let t = tempfile::tempdir().unwrap();
    let pan = RasterImage::filled(32, 32, 1, 11, 700.0).unwrap();
    let ms = RasterImage::filled(8, 8, 4, 11, 300.0).unwrap();
    let input = fixture(t.path(), Mode::Full, vec![[Some(pan), Some(ms), None, None, None]]);
    let out = t.path().join("r");
    ok(&["degrade", "--in", s(&input), "--out", s(&out)]);
    let m = RunManifest::load(&out).unwrap();
    assert!(read_raster(m.resolve(&m.patches[0].pan)).unwrap().samples().iter().all(|&v| v == 700.0));
    assert!(read_raster(m.resolve(&m.patches[0].ms)).unwrap().samples().iter().all(|&v| v == 300.0));

    let t = tempfile::tempdir().unwrap();
    let input = fixture(t.path(), Mode::Full, vec![[Some(random(40, 40, 1, 1)), Some(random(10, 10, 4, 2)), None, None, None]]);
    let err = fails(&["degrade", "--in", s(&input), "--out", s(&t.path().join("r"))]);
    assert!(err.contains("p0"), "{err}");
    let err = fails(&["degrade", "--in", s(&input), "--out", s(&t.path().join("r")), "--ratio", "2"]);
    assert!(err.contains("--ratio"), "{err}");
}

#[test]
fn fuse_every_method_at_256_over_64() {
    let t = tempfile::tempdir().unwrap();
    let input = fixture(t.path(), Mode::Full, vec![[Some(random(400, 400, 1, 3)), Some(random(100, 100, 4, 4)), None, None, None]]);
    for m in ["BDSD", "GS", "IHS", "BROVEY", "HPF", "LMM", "sfim"] {
        let out = t.path().join(m);
        ok(&["fuse", "--in", s(&input), "--out", s(&out), "--method", m]);
        let man = RunManifest::load(&out).unwrap();
        assert_eq!(man.tag, m.to_uppercase());
        let fused = read_raster(man.resolve(man.patches[0].fused.as_ref().unwrap())).unwrap();
        assert_eq!(fused.dims(), (400, 400, 4));
    }
}

#[test]
fn fuse_unknown_method_lists_valid_tags() {
    let t = tempfile::tempdir().unwrap();
    let input = fixture(t.path(), Mode::Full, vec![[Some(random(32, 32, 1, 3)), Some(random(8, 8, 4, 4)), None, None, None]]);
    let err = fails(&["fuse", "--in", s(&input), "--out", s(t.path()), "--method", "PCA"]);
    for tag in ["BDSD", "GS", "IHS", "BROVEY", "HPF", "LMM", "SFIM"] {
        assert!(err.contains(tag), "{err}");
    }
}

#[test]
fn fit_spectral_recovers_planted_weights() {
    let t = tempfile::tempdir().unwrap();
    let ds = t.path().join("ds");
    ok(&[
        "synth", "--out", s(&ds), "--count", "2", "--width", "128", "--height", "128", "--pan-weights",
        "0.1,0.2,0.3,0.4",
    ]);
    let w = t.path().join("w.json");
    ok(&["fit-spectral", "--in", s(&ds), "--out", s(&w)]);
    let fit = SpectralWeights::from_json(&fs::read_to_string(&w).unwrap()).unwrap();
    for (got, want) in fit.center_taps().iter().zip([0.1, 0.2, 0.3, 0.4]) {
        assert!((got - want).abs() <= 1e-3, "{got} vs {want}");
    }

    let heavy = t.path().join("heavy.json");
    ok(&["fit-spectral", "--in", s(&ds), "--out", s(&heavy), "--ridge", "1e12"]);
    let fit = SpectralWeights::from_json(&fs::read_to_string(&heavy).unwrap()).unwrap();
    assert!(fit.center_taps().iter().all(|w| w.abs() < 1e-3), "{:?}", fit.center_taps());
}

#[test]
fn fit_spectral_needs_patches() {
    let t = tempfile::tempdir().unwrap();
    let m = RunManifest::new(t.path(), sensor(), Mode::Full, "empty");
    m.save(t.path()).unwrap();
    let err = fails(&["fit-spectral", "--in", s(t.path()), "--out", s(&t.path().join("w.json"))]);
    assert!(err.contains("no patches"), "{err}");
}

fn load_report(dir: &Path) -> QualityReport {
    QualityReport::from_json(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn eval_ideal_product_in_reduced_mode() {
    let t = tempfile::tempdir().unwrap();
    let gt = random(32, 32, 4, 5);
    let input = fixture(
        t.path(),
        Mode::Reduced,
        vec![[Some(random(32, 32, 1, 6)), Some(random(8, 8, 4, 7)), Some(gt.clone()), Some(gt), None]],
    );
    let out = t.path().join("eval");
    ok(&["eval", "--in", s(&input), "--out", s(&out)]);
    let r = load_report(&out);
    let rec = &r.records[0];
    assert_eq!((rec.sam, rec.ergas, rec.ssim), (Some(0.0), Some(0.0), Some(1.0)));
    assert_eq!(rec.qnr, None);
}

#[test]
fn eval_nearest_upsample_scores_qnr_one() {
    let t = tempfile::tempdir().unwrap();
    let ms = random(16, 16, 4, 8);
    let pan_r = random(16, 16, 1, 9);
    let nearest = |img: &RasterImage| upsample(img, 4, Interpolation::Nearest).unwrap();
    let input = fixture(
        t.path(),
        Mode::Full,
        vec![[Some(nearest(&pan_r)), Some(ms.clone()), None, Some(nearest(&ms)), Some(pan_r)]],
    );
    let out = t.path().join("eval");
    ok(&["eval", "--in", s(&input), "--out", s(&out), "--q-mode", "global"]);
    let rec = &load_report(&out).records[0];
    assert!((rec.qnr.unwrap() - 1.0).abs() <= 1e-9, "{rec:?}");
    assert_eq!(rec.sam, None);
}

#[test]
fn eval_without_fused_product_fails() {
    let t = tempfile::tempdir().unwrap();
    let input = fixture(t.path(), Mode::Full, vec![[Some(random(32, 32, 1, 1)), Some(random(8, 8, 4, 2)), None, None, None]]);
    let err = fails(&["eval", "--in", s(&input), "--out", s(&t.path().join("e"))]);
    assert!(err.contains("fuse"), "{err}");
}

/// Recomputes mean and sample std per column from the CSV text.
#[test]
fn eval_csv_aggregates_match_a_spreadsheet_recomputation() {
    let t = tempfile::tempdir().unwrap();
    let ds = t.path().join("ds");
    ok(&["synth", "--out", s(&ds), "--count", "5", "--width", "64", "--height", "64"]);
    let fused = t.path().join("f");
    ok(&["fuse", "--in", s(&ds), "--out", s(&fused), "--method", "GS"]);
    let out = t.path().join("e");
    ok(&["eval", "--in", s(&fused), "--out", s(&out)]);
    let csv = fs::read_to_string(out.join("report.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows[0], ["patch_id", "d_lambda", "d_s", "qnr", "sam", "ergas", "ssim"]);
    let data = &rows[1..rows.len() - 2];
    assert_eq!(data.len(), 5);
    let (mean_row, std_row) = (&rows[rows.len() - 2], &rows[rows.len() - 1]);
    assert_eq!((mean_row[0], std_row[0]), ("mean", "std"));
    for c in 1..7 {
        let v: Vec<f64> = data.iter().map(|r| r[c].parse().unwrap()).collect();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let got_mean: f64 = mean_row[c].parse().unwrap();
        let got_std: f64 = std_row[c].parse().unwrap();
        assert!((got_mean - mean).abs() <= 1e-12 * mean.abs().max(1.0), "col {c}");
        assert!((got_std - std).abs() <= 1e-12 * std.abs().max(1.0), "col {c}");
    }
}

#[test]
fn report_merges_and_bolds() {
    let t = tempfile::tempdir().unwrap();
    let ds = t.path().join("ds");
    ok(&["synth", "--out", s(&ds), "--count", "2", "--width", "64", "--height", "64"]);
    let mut dirs = Vec::new();
    for m in ["IHS", "BROVEY"] {
        let f = t.path().join(format!("f{m}"));
        let e = t.path().join(format!("e{m}"));
        ok(&["fuse", "--in", s(&ds), "--out", s(&f), "--method", m]);
        ok(&["eval", "--in", s(&f), "--out", s(&e)]);
        dirs.push(e);
    }
    let out = ok(&["report", s(&dirs[0]), s(&dirs[1].join("report.json"))]);
    let table = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 4, "{table}");
    assert!(lines[2].starts_with("| IHS |") && lines[3].starts_with("| BROVEY |"));
    assert_eq!(table.matches("**").count() % 2, 0);
    assert!(table.matches("**").count() >= 12);

    let file = t.path().join("table.txt");
    ok(&["report", s(&dirs[0]), "--format", "text", "--out", s(&file)]);
    assert!(fs::read_to_string(&file).unwrap().starts_with("Method"));
    fails(&["report", s(&t.path().join("nope.json"))]);
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let t = tempfile::tempdir().unwrap();
    let cfg = t.path().join("cfg.toml");
    fs::write(&cfg, "ratio = 2\nseed = 5\n").unwrap();
    let a = t.path().join("a");
    ok(&["synth", "--config", s(&cfg), "--out", s(&a), "--count", "1", "--width", "32", "--height", "32"]);
    let m = RunManifest::load(&a).unwrap();
    assert_eq!(m.sensor.ratio, 2);
    assert_eq!(read_raster(m.resolve(&m.patches[0].ms)).unwrap().dims(), (16, 16, 4));

    let b = t.path().join("b");
    ok(&["synth", "--config", s(&cfg), "--ratio", "4", "--out", s(&b), "--count", "1", "--width", "32", "--height", "32"]);
    assert_eq!(RunManifest::load(&b).unwrap().sensor.ratio, 4);

    fs::write(&cfg, "ratoi = 2\n").unwrap();
    let err = fails(&["synth", "--config", s(&cfg), "--out", s(&b)]);
    assert!(err.contains("cfg.toml"), "{err}");
}
