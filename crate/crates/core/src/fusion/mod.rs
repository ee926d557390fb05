//! Classical pan-sharpening baselines.
//!
//! Every method maps a single-band PAN `Y` and a K-band LR MS `X` at
//! `1/ratio` of the PAN extent to a K-band image at the PAN extent. Shared
//! notation:
//!
//! - `U`: bicubic upsample of `X` to the PAN grid
//! - `I`: per-pixel mean of the bands of `U`
//! - `Y'`: `Y` with its global mean and standard deviation matched to `I`
//!
//! Ratio-style methods clamp their denominators at `epsilon * (2^bits - 1)`.

mod bdsd;

pub use bdsd::{bdsd_apply, bdsd_fit, fuse_bdsd, BdsdCoefficients};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::box_filter;
use crate::raster::{upsample, Interpolation, RasterImage, SensorSpec};

pub const DEFAULT_EPSILON: f64 = 1e-3;
pub const DEFAULT_LMM_WINDOW: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FusionTag {
    Bdsd,
    Gs,
    Ihs,
    Brovey,
    Hpf,
    Lmm,
    Sfim,
}

impl FusionTag {
    pub const ALL: [FusionTag; 7] = [
        FusionTag::Bdsd,
        FusionTag::Gs,
        FusionTag::Ihs,
        FusionTag::Brovey,
        FusionTag::Hpf,
        FusionTag::Lmm,
        FusionTag::Sfim,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FusionTag::Bdsd => "BDSD",
            FusionTag::Gs => "GS",
            FusionTag::Ihs => "IHS",
            FusionTag::Brovey => "BROVEY",
            FusionTag::Hpf => "HPF",
            FusionTag::Lmm => "LMM",
            FusionTag::Sfim => "SFIM",
        }
    }

    pub fn valid_tags() -> String {
        Self::ALL.iter().map(|t| t.as_str()).collect::<Vec<_>>().join(", ")
    }
}

impl fmt::Display for FusionTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FusionTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.trim().to_ascii_uppercase();
        Self::ALL
            .iter()
            .copied()
            .find(|t| t.as_str() == upper)
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "unknown fusion method '{s}'; valid: {}",
                    Self::valid_tags()
                ))
            })
    }
}

/// A fusion method with its tunables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionMethod {
    pub tag: FusionTag,
    /// Box window for HPF, SFIM and LMM.
    pub window: usize,
    /// Denominator guard as a fraction of the dynamic range.
    pub epsilon: f64,
}

impl FusionMethod {
    /// Default window is `2 * ratio + 1` for HPF/SFIM and 7 for LMM.
    pub fn with_defaults(tag: FusionTag, ratio: usize) -> Self {
        let window = match tag {
            FusionTag::Lmm => DEFAULT_LMM_WINDOW,
            _ => 2 * ratio + 1,
        };
        Self {
            tag,
            window,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "window must be odd and >= 3, got {}",
                self.window
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must lie in (0, 1], got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    pub fn apply(&self, pan: &RasterImage, ms: &RasterImage, spec: &SensorSpec) -> Result<RasterImage> {
        self.validate()?;
        match self.tag {
            FusionTag::Ihs => ihs(pan, ms, spec),
            FusionTag::Brovey => brovey(pan, ms, spec, self.epsilon),
            FusionTag::Gs => gs(pan, ms, spec),
            FusionTag::Hpf => hpf(pan, ms, spec, self.window),
            FusionTag::Sfim => sfim(pan, ms, spec, self.window, self.epsilon),
            FusionTag::Lmm => lmm(pan, ms, spec, self.window, self.epsilon),
            FusionTag::Bdsd => fuse_bdsd(pan, ms, spec),
        }
    }
}

/// Runs `tag` with its default parameters.
pub fn fuse(pan: &RasterImage, ms: &RasterImage, spec: &SensorSpec, tag: FusionTag) -> Result<RasterImage> {
    FusionMethod::with_defaults(tag, spec.ratio).apply(pan, ms, spec)
}

pub fn fuse_ihs(pan: &RasterImage, ms: &RasterImage, spec: &SensorSpec) -> Result<RasterImage> {
    fuse(pan, ms, spec, FusionTag::Ihs)
}

pub fn fuse_brovey(pan: &RasterImage, ms: &RasterImage, spec: &SensorSpec) -> Result<RasterImage> {
    fuse(pan, ms, spec, FusionTag::Brovey)
}

pub fn fuse_gs(pan: &RasterImage, ms: &RasterImage, spec: &SensorSpec) -> Result<RasterImage> {
    fuse(pan, ms, spec, FusionTag::Gs)
}

pub fn fuse_hpf(pan: &RasterImage, ms: &RasterImage, spec: &SensorSpec) -> Result<RasterImage> {
    fuse(pan, ms, spec, FusionTag::Hpf)
}

pub fn fuse_sfim(pan: &RasterImage, ms: &RasterImage, spec: &SensorSpec) -> Result<RasterImage> {
    fuse(pan, ms, spec, FusionTag::Sfim)
}

pub fn fuse_lmm(pan: &RasterImage, ms: &RasterImage, spec: &SensorSpec) -> Result<RasterImage> {
    fuse(pan, ms, spec, FusionTag::Lmm)
}

/// Upsampled MS, its intensity and the PAN plane, shared by all methods.
pub(crate) struct Prepared<'a> {
    pub upsampled: RasterImage,
    pub intensity: Vec<f64>,
    pub pan: &'a [f64],
    pub width: usize,
    pub height: usize,
}

pub(crate) fn prepare<'a>(pan: &'a RasterImage, ms: &RasterImage, spec: &SensorSpec) -> Result<Prepared<'a>> {
    crate::raster::check_pan_ms(pan, ms, spec.ratio)?;
    let upsampled = upsample(ms, spec.ratio, Interpolation::Bicubic)?;
    let n = upsampled.plane_len();
    let k = upsampled.bands() as f64;
    let mut intensity = vec![0.0; n];
    for b in 0..upsampled.bands() {
        for (acc, v) in intensity.iter_mut().zip(upsampled.band(b)) {
            *acc += v;
        }
    }
    for v in &mut intensity {
        *v /= k;
    }
    Ok(Prepared {
        upsampled,
        intensity,
        pan: pan.band(0),
        width: pan.width(),
        height: pan.height(),
    })
}

pub(crate) fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Global mean/std match of `pan` onto `reference`. A flat `pan` maps to
/// the reference mean.
pub fn histogram_match(pan: &[f64], reference: &[f64]) -> Vec<f64> {
    let (mp, sp) = mean_std(pan);
    let (mr, sr) = mean_std(reference);
    if sp == 0.0 {
        return vec![mr; pan.len()];
    }
    let gain = sr / sp;
    pan.iter().map(|v| (v - mp) * gain + mr).collect()
}

fn assemble(p: &Prepared<'_>, bit_depth: u8, band: impl Fn(usize, &[f64]) -> Vec<f64>) -> Result<RasterImage> {
    let planes = (0..p.upsampled.bands())
        .map(|b| band(b, p.upsampled.band(b)))
        .collect();
    RasterImage::from_bands(p.width, p.height, bit_depth, planes)
}

fn ihs(pan: &RasterImage, ms: &RasterImage, spec: &SensorSpec) -> Result<RasterImage> {
    let p = prepare(pan, ms, spec)?;
    let matched = histogram_match(p.pan, &p.intensity);
    let detail: Vec<f64> = matched.iter().zip(&p.intensity).map(|(y, i)| y - i).collect();
    assemble(&p, ms.bit_depth(), |_, u| u.iter().zip(&detail).map(|(u, d)| u + d).collect())
}

fn brovey(pan: &RasterImage, ms: &RasterImage, spec: &SensorSpec, epsilon: f64) -> Result<RasterImage> {
    let p = prepare(pan, ms, spec)?;
    let guard = epsilon * spec.dynamic_range();
    let matched = histogram_match(p.pan, &p.intensity);
    let ratio: Vec<f64> = matched
        .iter()
        .zip(&p.intensity)
        .map(|(y, i)| y / i.max(guard))
        .collect();
    assemble(&p, ms.bit_depth(), |_, u| u.iter().zip(&ratio).map(|(u, g)| u * g).collect())
}

/// Per-band injection gains `cov(U_i, I) / var(I)`.
pub fn gs_gains(upsampled: &RasterImage, intensity: &[f64]) -> Result<Vec<f64>> {
    let (mi, si) = mean_std(intensity);
    let n = intensity.len() as f64;
    let var = si * si;
    if var == 0.0 {
        return Err(Error::Degenerate("intensity has zero variance".into()));
    }
    Ok((0..upsampled.bands())
        .map(|b| {
            let band = upsampled.band(b);
            let mu = band.iter().sum::<f64>() / n;
            let cov = band
                .iter()
                .zip(intensity)
                .map(|(u, i)| (u - mu) * (i - mi))
                .sum::<f64>()
                / n;
            cov / var
        })
        .collect())
}

fn gs(pan: &RasterImage, ms: &RasterImage, spec: &SensorSpec) -> Result<RasterImage> {
    let p = prepare(pan, ms, spec)?;
    let gains = gs_gains(&p.upsampled, &p.intensity)?;
    let matched = histogram_match(p.pan, &p.intensity);
    let detail: Vec<f64> = matched.iter().zip(&p.intensity).map(|(y, i)| y - i).collect();
    assemble(&p, ms.bit_depth(), |b, u| {
        u.iter().zip(&detail).map(|(u, d)| u + gains[b] * d).collect()
    })
}

fn hpf(pan: &RasterImage, ms: &RasterImage, spec: &SensorSpec, window: usize) -> Result<RasterImage> {
    let p = prepare(pan, ms, spec)?;
    let low = box_filter(p.pan, p.width, p.height, window);
    let detail: Vec<f64> = p.pan.iter().zip(&low).map(|(y, l)| y - l).collect();
    assemble(&p, ms.bit_depth(), |_, u| u.iter().zip(&detail).map(|(u, d)| u + d).collect())
}

fn sfim(pan: &RasterImage, ms: &RasterImage, spec: &SensorSpec, window: usize, epsilon: f64) -> Result<RasterImage> {
    let p = prepare(pan, ms, spec)?;
    let guard = epsilon * spec.dynamic_range();
    let low = box_filter(p.pan, p.width, p.height, window);
    let ratio: Vec<f64> = p.pan.iter().zip(&low).map(|(y, l)| y / l.max(guard)).collect();
    assemble(&p, ms.bit_depth(), |_, u| u.iter().zip(&ratio).map(|(u, g)| u * g).collect())
}

fn lmm(pan: &RasterImage, ms: &RasterImage, spec: &SensorSpec, window: usize, epsilon: f64) -> Result<RasterImage> {
    let p = prepare(pan, ms, spec)?;
    let guard = epsilon * spec.dynamic_range();
    let low = box_filter(p.pan, p.width, p.height, window);
    let ratio: Vec<f64> = p.pan.iter().zip(&low).map(|(y, l)| y / l.max(guard)).collect();
    assemble(&p, ms.bit_depth(), |_, u| {
        let local = box_filter(u, p.width, p.height, window);
        local.iter().zip(&ratio).map(|(m, g)| m * g).collect()
    })
}
