//! Multi-band raster images and the operations that move them between
//! scales: file I/O, patch tiling and resampling.
//!
//! Samples are held band-major (all of band 0, then band 1, ...) in `f64`
//! so that metric computations keep full precision. Raw digital numbers are
//! kept as-is; nothing is normalized to a display range.

mod io;
mod resample;
mod tile;

pub use io::{
    read_raster, read_raster_with_header, sidecar_path, write_atomic, write_raster,
    write_raster_tagged, RasterHeader, MAGIC, VERSION,
};
pub use resample::{upsample, upsample_band, Interpolation};
pub use tile::{crop, tile, TileGrid};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A multi-band image of raw digital numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    bands: usize,
    bit_depth: u8,
    samples: Vec<f64>,
}

impl RasterImage {
    /// Builds an image from band-major samples, checking length and finiteness.
    pub fn new(
        width: usize,
        height: usize,
        bands: usize,
        bit_depth: u8,
        samples: Vec<f64>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Shape(format!("empty extent {width}x{height}")));
        }
        if bands == 0 {
            return Err(Error::Shape("image must have at least one band".into()));
        }
        if !(1..=32).contains(&bit_depth) {
            return Err(Error::InvalidParameter(format!(
                "bit depth {bit_depth} outside 1..=32"
            )));
        }
        let expected = width * height * bands;
        if samples.len() != expected {
            return Err(Error::Shape(format!(
                "{width}x{height}x{bands} needs {expected} samples, got {}",
                samples.len()
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self {
            width,
            height,
            bands,
            bit_depth,
            samples,
        })
    }

    pub fn filled(width: usize, height: usize, bands: usize, bit_depth: u8, value: f64) -> Result<Self> {
        Self::new(
            width,
            height,
            bands,
            bit_depth,
            vec![value; width * height * bands],
        )
    }

    /// Stacks equally sized planes into one image.
    pub fn from_bands(width: usize, height: usize, bit_depth: u8, planes: Vec<Vec<f64>>) -> Result<Self> {
        let bands = planes.len();
        let mut samples = Vec::with_capacity(width * height * bands);
        for (k, plane) in planes.into_iter().enumerate() {
            if plane.len() != width * height {
                return Err(Error::Shape(format!(
                    "band {k} has {} samples, expected {}",
                    plane.len(),
                    width * height
                )));
            }
            samples.extend(plane);
        }
        Self::new(width, height, bands, bit_depth, samples)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn bit_depth(&self) -> u8 {
        self.bit_depth
    }

    /// `2^bit_depth - 1`.
    pub fn dynamic_range(&self) -> f64 {
        max_value(self.bit_depth)
    }

    pub fn plane_len(&self) -> usize {
        self.width * self.height
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn band(&self, k: usize) -> &[f64] {
        let n = self.plane_len();
        &self.samples[k * n..(k + 1) * n]
    }

    pub fn band_view(&self, k: usize) -> BandView<'_> {
        BandView {
            width: self.width,
            height: self.height,
            data: self.band(k),
        }
    }

    /// Copies band `k` out as a single-band image.
    pub fn band_image(&self, k: usize) -> RasterImage {
        RasterImage {
            width: self.width,
            height: self.height,
            bands: 1,
            bit_depth: self.bit_depth,
            samples: self.band(k).to_vec(),
        }
    }

    pub fn get(&self, band: usize, row: usize, col: usize) -> f64 {
        self.samples[band * self.plane_len() + row * self.width + col]
    }

    /// Clamps every sample to `[0, 2^bit_depth - 1]`.
    pub fn clamp_to_bit_depth(&mut self) {
        let hi = self.dynamic_range();
        for v in &mut self.samples {
            *v = v.clamp(0.0, hi);
        }
    }

    pub fn with_bit_depth(mut self, bit_depth: u8) -> Result<Self> {
        if !(1..=32).contains(&bit_depth) {
            return Err(Error::InvalidParameter(format!(
                "bit depth {bit_depth} outside 1..=32"
            )));
        }
        self.bit_depth = bit_depth;
        Ok(self)
    }

    /// Applies `f` to every sample, rejecting non-finite results.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<RasterImage> {
        Self::new(
            self.width,
            self.height,
            self.bands,
            self.bit_depth,
            self.samples.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn same_shape(&self, other: &RasterImage) -> bool {
        self.width == other.width && self.height == other.height && self.bands == other.bands
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.bands)
    }
}

/// `2^bits - 1` as a float.
pub fn max_value(bit_depth: u8) -> f64 {
    (2f64).powi(bit_depth as i32) - 1.0
}

/// Borrowed view of one band.
#[derive(Debug, Clone, Copy)]
pub struct BandView<'a> {
    pub width: usize,
    pub height: usize,
    pub data: &'a [f64],
}

impl<'a> BandView<'a> {
    pub fn new(width: usize, height: usize, data: &'a [f64]) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Shape(format!(
                "band view {width}x{height} over {} samples",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }
}

/// Acquisition parameters of a PAN/MS sensor pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    pub name: String,
    pub bands: usize,
    pub bit_depth: u8,
    /// PAN/MS ground-sample-distance ratio.
    pub ratio: usize,
}

impl SensorSpec {
    pub fn new(name: impl Into<String>, bands: usize, bit_depth: u8, ratio: usize) -> Result<Self> {
        let spec = Self {
            name: name.into(),
            bands,
            bit_depth,
            ratio,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ratio < 2 {
            return Err(Error::InvalidParameter(format!(
                "resolution ratio must be >= 2, got {}",
                self.ratio
            )));
        }
        if self.bands < 2 {
            return Err(Error::InvalidParameter(format!(
                "sensor needs >= 2 MS bands, got {}",
                self.bands
            )));
        }
        if !(1..=32).contains(&self.bit_depth) {
            return Err(Error::InvalidParameter(format!(
                "bit depth {} outside 1..=32",
                self.bit_depth
            )));
        }
        Ok(())
    }

    pub fn dynamic_range(&self) -> f64 {
        max_value(self.bit_depth)
    }

    /// Checks that `pan` is single-band at `ratio` times the extent of `ms`.
    pub fn check_pair(&self, pan: &RasterImage, ms: &RasterImage) -> Result<()> {
        check_pan_ms(pan, ms, self.ratio)?;
        if ms.bands() != self.bands {
            return Err(Error::Shape(format!(
                "sensor {} declares {} bands, MS has {}",
                self.name,
                self.bands,
                ms.bands()
            )));
        }
        Ok(())
    }
}

pub(crate) fn check_pan_ms(pan: &RasterImage, ms: &RasterImage, ratio: usize) -> Result<()> {
    if pan.bands() != 1 {
        return Err(Error::Shape(format!(
            "PAN must be single-band, got {} bands",
            pan.bands()
        )));
    }
    if pan.width() != ms.width() * ratio || pan.height() != ms.height() * ratio {
        return Err(Error::Shape(format!(
            "PAN {}x{} is not {ratio}x MS {}x{}",
            pan.width(),
            pan.height(),
            ms.width(),
            ms.height()
        )));
    }
    Ok(())
}
