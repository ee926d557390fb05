//! Deterministic synthetic scenes: HR MS ground truth, a PAN that is an exact
//! linear mix of it, and the Wald-degraded LR MS.
//!
//! Every random draw comes from a ChaCha stream selected by
//! `(seed, band, layer)`, so a scene does not depend on generation order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::degrade::{spatial_degrade, DegradeConfig};
use crate::error::{Error, Result};
use crate::raster::{max_value, RasterImage};

const SHARED: u32 = u32::MAX;
const LAYER_EDGES: u32 = 1000;
const LAYER_POINTS: u32 = 1001;
const LAYER_RANGE: u32 = 1002;
const LAYER_NOISE: u32 = 1003;

/// Weight of the per-band field relative to the shared one.
const PERTURBATION: f64 = 0.55;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub seed: u64,
    /// PAN-scale width.
    pub width: usize,
    pub height: usize,
    pub bands: usize,
    pub bit_depth: u8,
    /// Non-negative, summing to 1.
    pub pan_weights: Vec<f64>,
    pub texture_octaves: u32,
    pub noise_sigma: f64,
}

impl SceneSpec {
    /// 11-bit scene with equal PAN weights, 4 octaves and no PAN noise.
    pub fn new(seed: u64, width: usize, height: usize, bands: usize) -> Self {
        Self {
            seed,
            width,
            height,
            bands,
            bit_depth: 11,
            pan_weights: vec![1.0 / bands.max(1) as f64; bands],
            texture_octaves: 4,
            noise_sigma: 0.0,
        }
    }

    pub fn validate(&self, ratio: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.bands == 0 {
            return bad("scene needs at least one band".into());
        }
        if ratio == 0 || self.width == 0 || self.height == 0 || self.width % ratio != 0 || self.height % ratio != 0 {
            return bad(format!(
                "scene {}x{} is not a positive multiple of ratio {ratio}",
                self.width, self.height
            ));
        }
        if !(1..=16).contains(&self.bit_depth) {
            return bad(format!("bit depth {} outside 1..=16", self.bit_depth));
        }
        if self.pan_weights.len() != self.bands {
            return bad(format!(
                "{} PAN weights for {} bands",
                self.pan_weights.len(),
                self.bands
            ));
        }
        if self.pan_weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return bad("PAN weights must be finite and non-negative".into());
        }
        let sum: f64 = self.pan_weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return bad(format!("PAN weights sum to {sum}, expected 1"));
        }
        if self.texture_octaves == 0 || self.texture_octaves > 12 {
            return bad(format!("texture octaves {} outside 1..=12", self.texture_octaves));
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return bad(format!("noise sigma {} must be >= 0", self.noise_sigma));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    /// Ground truth at PAN scale, integer valued.
    pub hrms: RasterImage,
    pub pan: RasterImage,
    /// `hrms` blurred and decimated.
    pub lrms: RasterImage,
}

fn stream(seed: u64, band: u32, layer: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((band as u64) << 32) | layer as u64);
    rng
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Multi-octave value noise in roughly [-1, 1].
fn value_noise(seed: u64, band: u32, octaves: u32, w: usize, h: usize) -> Vec<f64> {
    let mut out = vec![0.0; w * h];
    let base_cell = (w.max(h) as f64 / 2.0).max(2.0);
    let mut amp = 1.0;
    let mut norm = 0.0;
    for o in 0..octaves {
        let cell = (base_cell / f64::powi(2.0, o as i32)).max(2.0);
        let gw = (w as f64 / cell).ceil() as usize + 2;
        let gh = (h as f64 / cell).ceil() as usize + 2;
        let mut rng = stream(seed, band, o);
        let lattice: Vec<f64> = (0..gw * gh).map(|_| rng.random_range(-1.0..1.0)).collect();
        for r in 0..h {
            let fy = r as f64 / cell;
            let (iy, ty) = (fy.floor() as usize, smoothstep(fy.fract()));
            for c in 0..w {
                let fx = c as f64 / cell;
                let (ix, tx) = (fx.floor() as usize, smoothstep(fx.fract()));
                let at = |y: usize, x: usize| lattice[y * gw + x];
                let top = at(iy, ix) + tx * (at(iy, ix + 1) - at(iy, ix));
                let bot = at(iy + 1, ix) + tx * (at(iy + 1, ix + 1) - at(iy + 1, ix));
                out[r * w + c] += amp * (top + ty * (bot - top));
            }
        }
        norm += amp;
        amp *= 0.5;
    }
    out.iter_mut().for_each(|v| *v /= norm);
    out
}

/// Half-plane steps: `(nx, ny, offset)` per edge.
fn edges(seed: u64, w: usize, h: usize) -> Vec<(f64, f64, f64)> {
    let mut rng = stream(seed, SHARED, LAYER_EDGES);
    (0..3)
        .map(|_| {
            let theta = rng.random_range(0.0..std::f64::consts::PI);
            let (px, py) = (rng.random_range(0.0..w as f64), rng.random_range(0.0..h as f64));
            let (nx, ny) = (theta.cos(), theta.sin());
            (nx, ny, -(nx * px + ny * py))
        })
        .collect()
}

/// Small Gaussian spots: `(x, y, sigma)`.
fn points(seed: u64, w: usize, h: usize) -> Vec<(f64, f64, f64)> {
    let mut rng = stream(seed, SHARED, LAYER_POINTS);
    let count = 2 + w * h / 4096;
    (0..count)
        .map(|_| {
            (
                rng.random_range(0.0..w as f64),
                rng.random_range(0.0..h as f64),
                rng.random_range(0.8..2.0),
            )
        })
        .collect()
}

fn band_field(spec: &SceneSpec, band: usize, shared: &[f64], edges: &[(f64, f64, f64)], points: &[(f64, f64, f64)]) -> Vec<f64> {
    let (w, h) = (spec.width, spec.height);
    let b = band as u32;
    let own = value_noise(spec.seed, b, spec.texture_octaves, w, h);
    let mut rng = stream(spec.seed, b, LAYER_EDGES);
    let edge_amp: Vec<f64> = edges.iter().map(|_| rng.random_range(0.15..0.45)).collect();
    let mut rng = stream(spec.seed, b, LAYER_POINTS);
    let point_amp: Vec<f64> = points.iter().map(|_| rng.random_range(0.5..1.5)).collect();
    let mut field = vec![0.0; w * h];
    for r in 0..h {
        for c in 0..w {
            let (x, y) = (c as f64, r as f64);
            let i = r * w + c;
            let mut v = shared[i] + PERTURBATION * own[i];
            for ((nx, ny, off), amp) in edges.iter().zip(&edge_amp) {
                if nx * x + ny * y + off > 0.0 {
                    v += amp;
                }
            }
            for ((px, py, s), amp) in points.iter().zip(&point_amp) {
                let d2 = (x - px).powi(2) + (y - py).powi(2);
                if d2 < 25.0 * s * s {
                    v += amp * (-d2 / (2.0 * s * s)).exp();
                }
            }
            field[i] = v;
        }
    }
    field
}

/// Maps `field` affinely into a random sub-interval of `[0, max]` and rounds.
fn quantize(field: &mut [f64], seed: u64, band: u32, max: f64) {
    let lo = field.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = field.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut rng = stream(seed, band, LAYER_RANGE);
    let floor = rng.random_range(0.02..0.15) * max;
    let ceil = rng.random_range(0.75..0.98) * max;
    let span = if hi > lo { hi - lo } else { 1.0 };
    for v in field.iter_mut() {
        *v = (floor + (*v - lo) / span * (ceil - floor)).round().clamp(0.0, max);
    }
}

/// Generates a scene; identical inputs give bit-identical outputs.
pub fn generate_scene(spec: &SceneSpec, cfg: &DegradeConfig) -> Result<Scene> {
    cfg.validate()?;
    spec.validate(cfg.ratio)?;
    let (w, h) = (spec.width, spec.height);
    let max = max_value(spec.bit_depth);
    let shared = value_noise(spec.seed, SHARED, spec.texture_octaves, w, h);
    let e = edges(spec.seed, w, h);
    let p = points(spec.seed, w, h);
    let planes: Vec<Vec<f64>> = (0..spec.bands)
        .map(|b| {
            let mut f = band_field(spec, b, &shared, &e, &p);
            quantize(&mut f, spec.seed, b as u32, max);
            f
        })
        .collect();

    let mut pan = vec![0.0; w * h];
    for (plane, wt) in planes.iter().zip(&spec.pan_weights) {
        for (o, v) in pan.iter_mut().zip(plane) {
            *o += wt * v;
        }
    }
    if spec.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, spec.noise_sigma)
            .map_err(|e| Error::InvalidParameter(format!("noise sigma: {e}")))?;
        let mut rng = stream(spec.seed, SHARED, LAYER_NOISE);
        for v in pan.iter_mut() {
            *v = (*v + normal.sample(&mut rng)).clamp(0.0, max);
        }
    }

    let hrms = RasterImage::from_bands(w, h, spec.bit_depth, planes)?;
    let pan = RasterImage::new(w, h, 1, spec.bit_depth, pan)?;
    let lrms = spatial_degrade(&hrms, cfg)?;
    Ok(Scene { hrms, pan, lrms })
}
