//! Spatial and spectral degradation.
//!
//! Spatial degradation is a per-band Gaussian blur followed by phase-0
//! decimation at the resolution ratio. Spectral degradation maps a K-band
//! image to a single synthetic PAN band through a 3x3xK linear kernel.

mod spectral;

pub use spectral::{
    fit_spectral_weights, fit_spectral_weights_multi, spectral_degrade, SpectralWeights,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter;
use crate::raster::{check_pan_ms, RasterImage};

/// Blur and decimation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegradeConfig {
    pub ratio: usize,
    pub blur_sigma: f64,
    pub kernel_radius: usize,
}

impl Default for DegradeConfig {
    /// sigma = ratio / 2 at ratio 4, radius 6.
    fn default() -> Self {
        Self {
            ratio: 4,
            blur_sigma: 2.0,
            kernel_radius: 6,
        }
    }
}

impl DegradeConfig {
    /// Config for `ratio` with sigma = ratio / 2 and radius ceil(3 sigma).
    pub fn for_ratio(ratio: usize) -> Self {
        let sigma = ratio as f64 / 2.0;
        Self {
            ratio,
            blur_sigma: sigma,
            kernel_radius: (3.0 * sigma).ceil() as usize,
        }
    }

    /// Replaces sigma and widens the radius to at least ceil(3 sigma).
    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.blur_sigma = sigma;
        if sigma.is_finite() && sigma > 0.0 {
            self.kernel_radius = self.kernel_radius.max((3.0 * sigma).ceil() as usize);
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.blur_sigma.is_finite() && self.blur_sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "blur sigma must be positive, got {}",
                self.blur_sigma
            )));
        }
        if self.ratio < 1 {
            return Err(Error::InvalidParameter("ratio must be >= 1".into()));
        }
        let min_radius = (3.0 * self.blur_sigma).ceil() as usize;
        if self.kernel_radius < min_radius {
            return Err(Error::InvalidParameter(format!(
                "kernel radius {} below ceil(3 sigma) = {min_radius}",
                self.kernel_radius
            )));
        }
        Ok(())
    }

    pub fn kernel(&self) -> Vec<f64> {
        filter::gaussian_kernel(self.blur_sigma, self.kernel_radius)
    }
}

/// Separable Gaussian blur of every band, edge-replicated.
pub fn gaussian_blur(img: &RasterImage, cfg: &DegradeConfig) -> Result<RasterImage> {
    cfg.validate()?;
    let kernel = cfg.kernel();
    let (w, h, k) = img.dims();
    let mut samples = Vec::with_capacity(img.samples().len());
    for b in 0..k {
        samples.extend(filter::separable(img.band(b), w, h, &kernel));
    }
    RasterImage::new(w, h, k, img.bit_depth(), samples)
}

/// Keeps samples at `(ratio * i, ratio * j)`.
pub fn decimate(img: &RasterImage, ratio: usize) -> Result<RasterImage> {
    if ratio == 0 {
        return Err(Error::InvalidParameter("ratio must be >= 1".into()));
    }
    let (w, h, k) = img.dims();
    if w % ratio != 0 || h % ratio != 0 {
        return Err(Error::Shape(format!(
            "{w}x{h} not divisible by ratio {ratio}"
        )));
    }
    let (ow, oh) = (w / ratio, h / ratio);
    let mut samples = Vec::with_capacity(ow * oh * k);
    for b in 0..k {
        let plane = img.band(b);
        for r in 0..oh {
            let row = &plane[r * ratio * w..];
            samples.extend((0..ow).map(|c| row[c * ratio]));
        }
    }
    RasterImage::new(ow, oh, k, img.bit_depth(), samples)
}

/// Blur then decimate by `cfg.ratio`.
pub fn spatial_degrade(img: &RasterImage, cfg: &DegradeConfig) -> Result<RasterImage> {
    let (w, h, _) = img.dims();
    if w % cfg.ratio.max(1) != 0 || h % cfg.ratio.max(1) != 0 {
        return Err(Error::Shape(format!(
            "{w}x{h} not divisible by ratio {}",
            cfg.ratio
        )));
    }
    decimate(&gaussian_blur(img, cfg)?, cfg.ratio)
}

/// Reduces an aligned PAN/MS pair by the resolution ratio.
///
/// The caller keeps the original MS as the reference for the reduced pair.
pub fn wald_degrade(
    pan: &RasterImage,
    ms: &RasterImage,
    cfg: &DegradeConfig,
) -> Result<(RasterImage, RasterImage)> {
    check_pan_ms(pan, ms, cfg.ratio)?;
    Ok((spatial_degrade(pan, cfg)?, spatial_degrade(ms, cfg)?))
}
