use super::{check_pan_ms, RasterImage, SensorSpec};
use crate::error::{Error, Result};

/// Patch origins at PAN scale, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileGrid {
    pub patch_size: usize,
    pub stride: usize,
    pub origins: Vec<(usize, usize)>,
}

impl TileGrid {
    /// Lays out `patch_size` windows every `stride` pixels over a
    /// `width x height` PAN extent. Origins and patch size must map onto
    /// whole MS pixels at `ratio`.
    pub fn new(width: usize, height: usize, patch_size: usize, stride: usize, ratio: usize) -> Result<Self> {
        if patch_size == 0 || stride == 0 {
            return Err(Error::InvalidParameter("patch size and stride must be positive".into()));
        }
        if stride > patch_size {
            return Err(Error::InvalidParameter(format!(
                "stride {stride} exceeds patch size {patch_size}"
            )));
        }
        if ratio == 0 || patch_size % ratio != 0 || stride % ratio != 0 {
            return Err(Error::InvalidParameter(format!(
                "patch size {patch_size} and stride {stride} must be multiples of ratio {ratio}"
            )));
        }
        if patch_size > width || patch_size > height {
            return Err(Error::Shape(format!(
                "patch {patch_size} larger than image {width}x{height}"
            )));
        }
        let rows: Vec<usize> = (0..=height - patch_size).step_by(stride).collect();
        let cols: Vec<usize> = (0..=width - patch_size).step_by(stride).collect();
        let origins = rows
            .iter()
            .flat_map(|&r| cols.iter().map(move |&c| (r, c)))
            .collect();
        Ok(Self {
            patch_size,
            stride,
            origins,
        })
    }

    pub fn len(&self) -> usize {
        self.origins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origins.is_empty()
    }
}

/// Copies the `width x height` window at (`row`, `col`).
pub fn crop(img: &RasterImage, row: usize, col: usize, width: usize, height: usize) -> Result<RasterImage> {
    if row + height > img.height() || col + width > img.width() {
        return Err(Error::Shape(format!(
            "window {width}x{height}@({row},{col}) exceeds {}x{}",
            img.width(),
            img.height()
        )));
    }
    let mut samples = Vec::with_capacity(width * height * img.bands());
    for b in 0..img.bands() {
        let plane = img.band(b);
        for r in row..row + height {
            let start = r * img.width() + col;
            samples.extend_from_slice(&plane[start..start + width]);
        }
    }
    RasterImage::new(width, height, img.bands(), img.bit_depth(), samples)
}

/// Cuts co-located (PAN, MS) patch pairs in row-major order.
pub fn tile(
    pan: &RasterImage,
    ms: &RasterImage,
    spec: &SensorSpec,
    patch_size: usize,
    stride: usize,
) -> Result<Vec<(RasterImage, RasterImage)>> {
    let ratio = spec.ratio;
    check_pan_ms(pan, ms, ratio)?;
    let grid = TileGrid::new(pan.width(), pan.height(), patch_size, stride, ratio)?;
    let ms_size = patch_size / ratio;
    grid.origins
        .iter()
        .map(|&(r, c)| {
            Ok((
                crop(pan, r, c, patch_size, patch_size)?,
                crop(ms, r / ratio, c / ratio, ms_size, ms_size)?,
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec() -> SensorSpec {
        SensorSpec::new("t", 4, 10, 4).unwrap()
    }

    fn ramp(w: usize, h: usize, k: usize) -> RasterImage {
        RasterImage::new(w, h, k, 16, (0..w * h * k).map(|v| v as f64).collect()).unwrap()
    }

    #[test]
    fn training_geometry_yields_four_pairs() {
        let pan = ramp(512, 512, 1);
        let ms = ramp(128, 128, 4);
        let pairs = tile(&pan, &ms, &spec(), 256, 256).unwrap();
        assert_eq!(pairs.len(), 4);
        for (p, m) in &pairs {
            assert_eq!(p.dims(), (256, 256, 1));
            assert_eq!(m.dims(), (64, 64, 4));
        }
        // row-major: second pair starts at column 256 / 64
        assert_eq!(pairs[1].0.get(0, 0, 0), 256.0);
        assert_eq!(pairs[1].1.get(0, 0, 0), 64.0);
        assert_eq!(pairs[2].0.get(0, 0, 0), (256 * 512) as f64);
    }

    #[test]
    fn test_geometry_single_pair() {
        let pairs = tile(&ramp(400, 400, 1), &ramp(100, 100, 4), &spec(), 400, 400).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].0.dims(), (400, 400, 1));
        assert_eq!(pairs[0].1.dims(), (100, 100, 4));
    }

    #[test]
    fn overlapping_stride_count_matches_enumeration() {
        let (size, patch, stride) = (512usize, 256usize, 128usize);
        let mut expected = 0;
        for r in 0..size {
            for c in 0..size {
                if r % stride == 0 && c % stride == 0 && r + patch <= size && c + patch <= size {
                    expected += 1;
                }
            }
        }
        let pairs = tile(&ramp(512, 512, 1), &ramp(128, 128, 4), &spec(), patch, stride).unwrap();
        assert_eq!(pairs.len(), expected);
        assert_eq!(expected, 9);
    }

    #[test]
    fn misaligned_or_oversized_is_an_error() {
        assert!(tile(&ramp(512, 512, 1), &ramp(100, 128, 4), &spec(), 256, 256).is_err());
        assert!(tile(&ramp(512, 512, 1), &ramp(128, 128, 4), &spec(), 1024, 1024).is_err());
        assert!(tile(&ramp(512, 512, 1), &ramp(128, 128, 4), &spec(), 254, 254).is_err());
        assert!(TileGrid::new(64, 64, 16, 32, 4).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn non_overlapping_tiles_partition_the_image(nr in 1usize..4, nc in 1usize..4, pm in 1usize..4) {
            let patch = pm * 4;
            let (w, h) = (nc * patch, nr * patch);
            let pan = ramp(w, h, 1);
            let ms = ramp(w / 4, h / 4, 2);
            let pairs = tile(&pan, &ms, &spec(), patch, patch).unwrap();
            prop_assert_eq!(pairs.len(), nr * nc);
            let mut rebuilt = vec![f64::NAN; w * h];
            for (i, (p, _)) in pairs.iter().enumerate() {
                let (r0, c0) = ((i / nc) * patch, (i % nc) * patch);
                for r in 0..patch {
                    for c in 0..patch {
                        rebuilt[(r0 + r) * w + c0 + c] = p.get(0, r, c);
                    }
                }
            }
            prop_assert_eq!(rebuilt.as_slice(), pan.samples());
        }
    }
}
