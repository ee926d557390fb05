use super::RasterImage;
use crate::error::{Error, Result};

/// Interpolator used by [`upsample`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    /// Keys cubic convolution (a = -0.5) on a half-pixel aligned grid.
    #[default]
    Bicubic,
    /// Pixel replication.
    Nearest,
}

/// Upsamples every band by an integer factor.
pub fn upsample(img: &RasterImage, factor: usize, method: Interpolation) -> Result<RasterImage> {
    if factor < 1 {
        return Err(Error::InvalidParameter("upsample factor must be >= 1".into()));
    }
    let (w, h, k) = img.dims();
    let mut samples = Vec::with_capacity(w * h * k * factor * factor);
    for b in 0..k {
        samples.extend(upsample_band(img.band(b), w, h, factor, method));
    }
    RasterImage::new(w * factor, h * factor, k, img.bit_depth(), samples)
}

/// Upsamples one `width x height` plane. `factor` must be >= 1.
pub fn upsample_band(
    plane: &[f64],
    width: usize,
    height: usize,
    factor: usize,
    method: Interpolation,
) -> Vec<f64> {
    debug_assert_eq!(plane.len(), width * height);
    let ow = width * factor;
    let oh = height * factor;
    match method {
        Interpolation::Nearest => {
            let mut out = vec![0.0; ow * oh];
            for r in 0..oh {
                let src = &plane[(r / factor) * width..(r / factor + 1) * width];
                let dst = &mut out[r * ow..(r + 1) * ow];
                for (c, d) in dst.iter_mut().enumerate() {
                    *d = src[c / factor];
                }
            }
            out
        }
        Interpolation::Bicubic => {
            let cols = cubic_taps(width, factor);
            let rows = cubic_taps(height, factor);
            // horizontal pass: height x ow
            let mut tmp = vec![0.0; height * ow];
            for r in 0..height {
                let src = &plane[r * width..(r + 1) * width];
                for (c, tap) in cols.iter().enumerate() {
                    tmp[r * ow + c] = tap.apply(|i| src[i]);
                }
            }
            let mut out = vec![0.0; ow * oh];
            for (r, tap) in rows.iter().enumerate() {
                for c in 0..ow {
                    out[r * ow + c] = tap.apply(|i| tmp[i * ow + c]);
                }
            }
            out
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct CubicTap {
    index: [usize; 4],
    weight: [f64; 4],
}

impl CubicTap {
    fn apply(&self, get: impl Fn(usize) -> f64) -> f64 {
        self.index
            .iter()
            .zip(self.weight.iter())
            .map(|(&i, &w)| w * get(i))
            .sum()
    }
}

fn keys(t: f64) -> f64 {
    const A: f64 = -0.5;
    let t = t.abs();
    if t <= 1.0 {
        ((A + 2.0) * t - (A + 3.0)) * t * t + 1.0
    } else if t < 2.0 {
        ((A * t - 5.0 * A) * t + 8.0 * A) * t - 4.0 * A
    } else {
        0.0
    }
}

fn cubic_taps(len: usize, factor: usize) -> Vec<CubicTap> {
    let last = len as isize - 1;
    (0..len * factor)
        .map(|o| {
            let x = (o as f64 + 0.5) / factor as f64 - 0.5;
            let base = x.floor();
            let frac = x - base;
            let base = base as isize;
            let mut index = [0usize; 4];
            let mut weight = [0.0; 4];
            for m in 0..4 {
                let offset = m as isize - 1;
                index[m] = (base + offset).clamp(0, last) as usize;
                weight[m] = keys(frac - offset as f64);
            }
            CubicTap { index, weight }
        })
        .collect()
}
