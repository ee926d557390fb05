use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use pansharp_core::degrade::fit_spectral_weights_multi;
use pansharp_core::metrics::{
    evaluate_full, evaluate_reduced, FullEvalConfig, PanReduction, QualityRecord, QualityReport,
};
use pansharp_core::raster::{crop, write_atomic, write_raster_tagged, TileGrid};
use pansharp_core::{
    fuse, generate_scene, read_raster, spatial_degrade, wald_degrade, DistortionForm, FusionTag, RasterImage,
    SceneSpec, SensorSpec,
};

use crate::config::{SharedArgs, Settings};
use crate::manifest::{check_patch_id, Mode, Patch, RunManifest};
use crate::table::{render, TableFormat};

pub const PATCH_DIR: &str = "patches";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";

#[derive(Debug, Parser)]
#[command(name = "pansharp", version, about = "Pan-sharpening pipeline: synthesize, degrade, fuse, fit, evaluate")]
pub struct Cli {
    #[command(flatten)]
    pub shared: SharedArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic scenes (PAN, LR MS, HR MS ground truth) and a manifest
    Synth(SynthArgs),
    /// Blur and decimate every pair; the original MS becomes the reference
    Degrade(IoArgs),
    /// Fuse every pair with a classical method
    Fuse(FuseArgs),
    /// Fit the 3x3 spectral kernel jointly over all patches
    FitSpectral(FitArgs),
    /// Score fused products and write report.json / report.csv
    Eval(EvalArgs),
    /// Merge reports into one method-by-metric table
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
    /// Number of scenes; scene i uses seed + i
    #[arg(long, default_value_t = 4)]
    pub count: usize,
    /// PAN-scale width
    #[arg(long, default_value_t = 256)]
    pub width: usize,
    #[arg(long, default_value_t = 256)]
    pub height: usize,
    #[arg(long, default_value_t = 4)]
    pub bands: usize,
    #[arg(long, default_value_t = 11)]
    pub bit_depth: u8,
    /// Comma-separated PAN weights summing to 1 [default: equal]
    #[arg(long, value_delimiter = ',')]
    pub pan_weights: Option<Vec<f64>>,
    #[arg(long, default_value_t = 4)]
    pub octaves: u32,
    /// Standard deviation of Gaussian noise added to the PAN
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Cut each scene into square PAN-scale patches of this size
    #[arg(long)]
    pub patch_size: Option<usize>,
    /// Patch stride [default: patch size]
    #[arg(long, requires = "patch_size")]
    pub stride: Option<usize>,
    #[arg(long, default_value = "synthetic")]
    pub sensor_name: String,
}

#[derive(Debug, Args)]
pub struct IoArgs {
    /// Input manifest file or directory containing manifest.json
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    #[command(flatten)]
    pub io: IoArgs,
    /// One of BDSD, GS, IHS, BROVEY, HPF, LMM, SFIM
    #[arg(long, value_parser = parse_tag)]
    pub method: FusionTag,
}

fn parse_tag(s: &str) -> Result<FusionTag, String> {
    s.parse().map_err(|e: pansharp_core::Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output weights JSON file
    #[arg(long)]
    pub out: PathBuf,
    /// Ridge on the kernel taps [default: 0]
    #[arg(long)]
    pub ridge: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub io: IoArgs,
    /// Evaluation protocol [default: the manifest's mode]
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// sqrt (default) or classical (no square root) distortion indices
    #[arg(long, value_parser = parse_form)]
    pub form: Option<DistortionForm>,
}

fn parse_form(s: &str) -> Result<DistortionForm, String> {
    s.parse().map_err(|e: pansharp_core::Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Report JSON files, or eval output directories
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
    /// Write the table here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = TableFormat::Markdown)]
    pub format: TableFormat,
}

pub fn run(cli: Cli) -> Result<()> {
    let settings = Settings::resolve(&cli.shared)?;
    match cli.command {
        Command::Synth(a) => synth(&settings, &a),
        Command::Degrade(a) => degrade(&settings, &a),
        Command::Fuse(a) => fuse_cmd(&settings, &a),
        Command::FitSpectral(a) => fit_spectral(&settings, &a),
        Command::Eval(a) => eval(&settings, &a),
        Command::Report(a) => report(&a),
    }
}

fn read(m: &RunManifest, p: &Path) -> Result<RasterImage> {
    let path = m.resolve(p);
    read_raster(&path).with_context(|| format!("reading {}", path.display()))
}

fn write(img: &RasterImage, path: &Path, sensor: &SensorSpec) -> Result<()> {
    write_raster_tagged(img, path, Some(&sensor.name)).with_context(|| format!("writing {}", path.display()))
}

fn patch_path(id: &str, suffix: &str) -> PathBuf {
    Path::new(PATCH_DIR).join(format!("{id}_{suffix}.psr"))
}

/// Runs `f` over `items` on the configured pool, keeping input order.
fn par_map<T: Sync, R: Send>(settings: &Settings, items: &[T], f: impl Fn(&T) -> Result<R> + Sync) -> Result<Vec<R>> {
    let pool = settings.thread_pool()?;
    pool.install(|| items.par_iter().map(&f).collect())
}

fn synth(settings: &Settings, a: &SynthArgs) -> Result<()> {
    ensure!(a.count > 0, "--count must be at least 1");
    let ratio = settings.ratio;
    let sensor = SensorSpec::new(a.sensor_name.clone(), a.bands, a.bit_depth, ratio)?;
    check_patch_id(&a.sensor_name).context("--sensor-name")?;
    let cfg = settings.degrade_config(ratio)?;
    let base = SceneSpec {
        seed: settings.seed,
        width: a.width,
        height: a.height,
        bands: a.bands,
        bit_depth: a.bit_depth,
        pan_weights: a.pan_weights.clone().unwrap_or_else(|| vec![1.0 / a.bands as f64; a.bands]),
        texture_octaves: a.octaves,
        noise_sigma: a.noise,
    };
    base.validate(ratio)?;
    let grid = match a.patch_size {
        Some(size) => Some(TileGrid::new(a.width, a.height, size, a.stride.unwrap_or(size), ratio)?),
        None => None,
    };

    let scenes: Vec<u64> = (0..a.count as u64).collect();
    let patches = par_map(settings, &scenes, |&i| {
        let spec = SceneSpec {
            seed: base.seed.wrapping_add(i),
            ..base.clone()
        };
        let scene = generate_scene(&spec, &cfg)?;
        let mut out = Vec::new();
        let mut emit = |id: String, pan: &RasterImage, ms: &RasterImage, gt: &RasterImage| -> Result<()> {
            let mut p = Patch::new(id.clone(), patch_path(&id, "pan"), patch_path(&id, "ms"));
            p.reference = Some(patch_path(&id, "ref"));
            write(pan, &a.out.join(&p.pan), &sensor)?;
            write(ms, &a.out.join(&p.ms), &sensor)?;
            write(gt, &a.out.join(p.reference.as_ref().unwrap()), &sensor)?;
            out.push(p);
            Ok(())
        };
        match &grid {
            None => emit(format!("scene{i:04}"), &scene.pan, &scene.lrms, &scene.hrms)?,
            Some(g) => {
                let (s, m) = (g.patch_size, g.patch_size / ratio);
                for (t, &(r, c)) in g.origins.iter().enumerate() {
                    emit(
                        format!("scene{i:04}_t{t:03}"),
                        &crop(&scene.pan, r, c, s, s)?,
                        &crop(&scene.lrms, r / ratio, c / ratio, m, m)?,
                        &crop(&scene.hrms, r, c, s, s)?,
                    )?;
                }
            }
        }
        Ok(out)
    })?;

    let mut manifest = RunManifest::new(&a.out, sensor, Mode::Full, a.sensor_name.clone());
    manifest.patches = patches.into_iter().flatten().collect();
    let path = manifest.save(&a.out)?;
    eprintln!("wrote {} patches to {}", manifest.patches.len(), path.display());
    Ok(())
}

fn degrade(settings: &Settings, a: &IoArgs) -> Result<()> {
    let input = RunManifest::load(&a.input)?;
    let ratio = settings.ratio_for(input.sensor.ratio)?;
    let cfg = settings.degrade_config(ratio)?;
    let mut out = input.rebase(&a.out)?;
    out.mode = Mode::Reduced;
    let rows = par_map(settings, &input.patches, |p| {
        let pan = read(&input, &p.pan)?;
        let ms = read(&input, &p.ms)?;
        input.sensor.check_pair(&pan, &ms).with_context(|| format!("patch '{}'", p.id))?;
        let (pan_r, ms_r) = wald_degrade(&pan, &ms, &cfg).with_context(|| format!("patch '{}'", p.id))?;
        let (pp, mp) = (patch_path(&p.id, "pan"), patch_path(&p.id, "ms"));
        write(&pan_r, &a.out.join(&pp), &input.sensor)?;
        write(&ms_r, &a.out.join(&mp), &input.sensor)?;
        Ok((pp, mp))
    })?;
    for (patch, (pp, mp)) in out.patches.iter_mut().zip(rows) {
        // the original MS is the reference at the reduced PAN scale
        patch.reference = Some(std::mem::replace(&mut patch.ms, mp));
        patch.pan = pp;
        patch.fused = None;
        patch.pan_reduced = None;
    }
    let path = out.save(&a.out)?;
    eprintln!("wrote {} reduced pairs to {}", out.patches.len(), path.display());
    Ok(())
}

fn fuse_cmd(settings: &Settings, a: &FuseArgs) -> Result<()> {
    let input = RunManifest::load(&a.io.input)?;
    settings.ratio_for(input.sensor.ratio)?;
    let mut out = input.rebase(&a.io.out)?;
    out.tag = a.method.to_string();
    let paths = par_map(settings, &input.patches, |p| {
        let pan = read(&input, &p.pan)?;
        let ms = read(&input, &p.ms)?;
        input.sensor.check_pair(&pan, &ms).with_context(|| format!("patch '{}'", p.id))?;
        let fused = fuse(&pan, &ms, &input.sensor, a.method).with_context(|| format!("{} on '{}'", a.method, p.id))?;
        let fp = patch_path(&p.id, &a.method.as_str().to_lowercase());
        write(&fused, &a.io.out.join(&fp), &input.sensor)?;
        Ok(fp)
    })?;
    for (patch, fp) in out.patches.iter_mut().zip(paths) {
        patch.fused = Some(fp);
    }
    let path = out.save(&a.io.out)?;
    eprintln!("fused {} patches with {} into {}", out.patches.len(), a.method, path.display());
    Ok(())
}

fn fit_spectral(settings: &Settings, a: &FitArgs) -> Result<()> {
    let input = RunManifest::load(&a.input)?;
    ensure!(!input.patches.is_empty(), "manifest has no patches to fit");
    let ratio = settings.ratio_for(input.sensor.ratio)?;
    let cfg = settings.degrade_config(ratio)?;
    let ridge = a.ridge.unwrap_or(settings.ridge);
    let pairs = par_map(settings, &input.patches, |p| {
        let ms = read(&input, &p.ms)?;
        let pan_r = match &p.pan_reduced {
            Some(path) => read(&input, path)?,
            None => spatial_degrade(&read(&input, &p.pan)?, &cfg)?,
        };
        Ok((ms, pan_r))
    })?;
    let refs: Vec<(&RasterImage, &RasterImage)> = pairs.iter().map(|(m, p)| (m, p)).collect();
    let weights = fit_spectral_weights_multi(&refs, ridge)?;
    write_atomic(&a.out, weights.to_json().as_bytes())?;
    let taps: Vec<String> = weights.center_taps().iter().map(|w| format!("{w:.6}")).collect();
    eprintln!(
        "fitted {} bands over {} patches: center taps [{}], bias {:.6}, residual RMSE {:.6}",
        weights.bands,
        refs.len(),
        taps.join(", "),
        weights.bias,
        weights.residual_rmse
    );
    Ok(())
}

fn eval(settings: &Settings, a: &EvalArgs) -> Result<()> {
    let input = RunManifest::load(&a.io.input)?;
    let ratio = settings.ratio_for(input.sensor.ratio)?;
    let cfg = settings.degrade_config(ratio)?;
    let mode = a.mode.unwrap_or(input.mode);
    let eval_cfg = FullEvalConfig {
        q_mode: settings.q_mode,
        form: a.form.unwrap_or(settings.distortion_form),
    };
    let records = par_map(settings, &input.patches, |p| {
        let fused_path = p
            .fused
            .as_ref()
            .with_context(|| format!("patch '{}' has no fused product; run fuse first", p.id))?;
        let fused = read(&input, fused_path)?;
        let reference = p.reference.as_ref().map(|r| read(&input, r)).transpose()?;
        let mut rec = QualityRecord::new(p.id.clone());
        if mode == Mode::Full {
            let pan = read(&input, &p.pan)?;
            let ms = read(&input, &p.ms)?;
            let pan_r = p.pan_reduced.as_ref().map(|r| read(&input, r)).transpose()?;
            let reduction = match &pan_r {
                Some(img) => PanReduction::Provided(img),
                None => PanReduction::Degrade(&cfg),
            };
            let m = evaluate_full(&fused, &ms, &pan, reduction, &eval_cfg)
                .with_context(|| format!("no-reference metrics for '{}'", p.id))?;
            rec = rec.with_full(m);
        }
        match (&reference, mode) {
            (Some(gt), _) if gt.same_shape(&fused) => {
                let m = evaluate_reduced(&fused, gt, &input.sensor)
                    .with_context(|| format!("reference metrics for '{}'", p.id))?;
                rec = rec.with_reduced(m);
            }
            (None, Mode::Reduced) => bail!("patch '{}' has no reference for reduced-mode evaluation", p.id),
            (Some(gt), Mode::Reduced) => bail!(
                "patch '{}': reference {:?} does not match fused {:?}",
                p.id,
                gt.dims(),
                fused.dims()
            ),
            _ => {}
        }
        rec.check_invariants()?;
        Ok(rec)
    })?;
    let report = QualityReport::new(input.tag.clone(), eval_cfg.q_mode, eval_cfg.form, records);
    write_atomic(&a.io.out.join(REPORT_JSON), report.to_json().as_bytes())?;
    write_atomic(&a.io.out.join(REPORT_CSV), report.to_csv().as_bytes())?;
    eprintln!(
        "evaluated {} patches ({mode:?} mode) into {}",
        report.records.len(),
        a.io.out.display()
    );
    Ok(())
}

fn report(a: &ReportArgs) -> Result<()> {
    let reports = a
        .reports
        .iter()
        .map(|p| {
            let file = if p.is_dir() { p.join(REPORT_JSON) } else { p.clone() };
            let text = std::fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
            QualityReport::from_json(&text).with_context(|| format!("parsing {}", file.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    let table = render(&reports, a.format);
    for w in &table.warnings {
        eprintln!("warning: {w}");
    }
    match &a.out {
        Some(path) => write_atomic(path, table.rendered.as_bytes())?,
        None => print!("{}", table.rendered),
    }
    Ok(())
}
