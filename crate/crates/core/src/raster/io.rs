//! Raster file format.
//!
//! A raster is two files: `<name>.<ext>` holding the magic `PSRW`, a version
//! byte and the band-sequential little-endian `f32` payload, and the sidecar
//! `<name>.json` holding `{width, height, bands, bit_depth, sensor}`.
//!
//! Samples are widened to `f64` on read and narrowed to the nearest `f32` on
//! write, so any image whose samples are exactly representable in `f32`
//! (every integer digital number up to 2^24) round-trips bit for bit.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::RasterImage;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"PSRW";
pub const VERSION: u8 = 1;
const HEADER_LEN: usize = 5;

/// Sidecar metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RasterHeader {
    pub width: usize,
    pub height: usize,
    pub bands: usize,
    pub bit_depth: u8,
    pub sensor: Option<String>,
}

/// `<dir>/<stem>.json` for a raster at `<dir>/<stem>.<ext>`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn read_raster(path: impl AsRef<Path>) -> Result<RasterImage> {
    read_raster_with_header(path).map(|(img, _)| img)
}

/// Reads a raster and returns its sidecar alongside.
pub fn read_raster_with_header(path: impl AsRef<Path>) -> Result<(RasterImage, RasterHeader)> {
    let path = path.as_ref();
    let side = sidecar_path(path);
    if side == path {
        return Err(Error::Format(format!(
            "raster path {} collides with its sidecar",
            path.display()
        )));
    }
    let text = fs::read_to_string(&side).map_err(|e| Error::Sidecar {
        path: side.clone(),
        reason: e.to_string(),
    })?;
    let header: RasterHeader = serde_json::from_str(&text).map_err(|e| Error::Sidecar {
        path: side.clone(),
        reason: e.to_string(),
    })?;

    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(Error::Format(format!("{}: missing PSRW magic", path.display())));
    }
    if bytes[4] != VERSION {
        return Err(Error::Format(format!(
            "{}: unsupported version {}",
            path.display(),
            bytes[4]
        )));
    }
    let payload = &bytes[HEADER_LEN..];
    let count = header
        .width
        .checked_mul(header.height)
        .and_then(|n| n.checked_mul(header.bands))
        .ok_or_else(|| Error::Sidecar {
            path: side.clone(),
            reason: "dimensions overflow".into(),
        })?;
    if payload.len() != count * 4 {
        return Err(Error::Format(format!(
            "{}: sidecar declares {}x{}x{} = {count} samples, payload holds {} bytes",
            path.display(),
            header.width,
            header.height,
            header.bands,
            payload.len()
        )));
    }
    let samples = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let img = RasterImage::new(
        header.width,
        header.height,
        header.bands,
        header.bit_depth,
        samples,
    )?;
    Ok((img, header))
}

pub fn write_raster(img: &RasterImage, path: impl AsRef<Path>) -> Result<()> {
    write_raster_tagged(img, path, None)
}

/// Writes payload and sidecar, recording `sensor` in the sidecar.
///
/// Both files are written to a temporary name and renamed into place.
pub fn write_raster_tagged(img: &RasterImage, path: impl AsRef<Path>, sensor: Option<&str>) -> Result<()> {
    let path = path.as_ref();
    let side = sidecar_path(path);
    if side == path {
        return Err(Error::Format(format!(
            "raster path {} collides with its sidecar",
            path.display()
        )));
    }
    // RasterImage enforces these on construction; re-check since the payload
    // narrows to f32 and may overflow.
    if img.bands() == 0 {
        return Err(Error::Shape("cannot write a 0-band image".into()));
    }
    let mut bytes = Vec::with_capacity(HEADER_LEN + img.samples().len() * 4);
    bytes.extend_from_slice(MAGIC);
    bytes.push(VERSION);
    for (i, &v) in img.samples().iter().enumerate() {
        let narrow = v as f32;
        if !narrow.is_finite() {
            return Err(Error::NonFinite(i));
        }
        bytes.extend_from_slice(&narrow.to_le_bytes());
    }
    let header = RasterHeader {
        width: img.width(),
        height: img.height(),
        bands: img.bands(),
        bit_depth: img.bit_depth(),
        sensor: sensor.map(str::to_owned),
    };
    let mut json = serde_json::to_vec_pretty(&header).map_err(|e| Error::Sidecar {
        path: side.clone(),
        reason: e.to_string(),
    })?;
    json.push(b'\n');
    write_atomic(path, &bytes)?;
    write_atomic(&side, &json)
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidParameter(format!("{} has no file name", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tmpdir() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn zeros_round_trip() {
        let dir = tmpdir();
        let p = dir.path().join("z.psr");
        let img = RasterImage::filled(64, 64, 4, 11, 0.0).unwrap();
        write_raster(&img, &p).unwrap();
        let back = read_raster(&p).unwrap();
        assert_eq!(back.dims(), (64, 64, 4));
        assert!(back.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn file_layout_is_magic_version_payload() {
        let dir = tmpdir();
        let p = dir.path().join("a.psr");
        let img = RasterImage::new(2, 1, 1, 10, vec![1.0, 2.5]).unwrap();
        write_raster_tagged(&img, &p, Some("gf2")).unwrap();
        let bytes = fs::read(&p).unwrap();
        assert_eq!(&bytes[..5], b"PSRW\x01");
        assert_eq!(&bytes[5..9], &1.0f32.to_le_bytes());
        assert_eq!(&bytes[9..13], &2.5f32.to_le_bytes());
        let side: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("a.json")).unwrap()).unwrap();
        assert_eq!(side["width"], 2);
        assert_eq!(side["bands"], 1);
        assert_eq!(side["bit_depth"], 10);
        assert_eq!(side["sensor"], "gf2");
    }

    #[test]
    fn payload_length_mismatch_is_rejected() {
        let dir = tmpdir();
        let p = dir.path().join("m.psr");
        let img = RasterImage::filled(4, 4, 2, 10, 1.0).unwrap();
        write_raster(&img, &p).unwrap();
        let side = dir.path().join("m.json");
        fs::write(
            &side,
            r#"{"width":4,"height":4,"bands":3,"bit_depth":10,"sensor":null}"#,
        )
        .unwrap();
        assert!(matches!(read_raster(&p), Err(Error::Format(_))));
    }

    #[test]
    fn missing_or_corrupt_sidecar() {
        let dir = tmpdir();
        let p = dir.path().join("s.psr");
        let img = RasterImage::filled(2, 2, 1, 10, 1.0).unwrap();
        write_raster(&img, &p).unwrap();
        fs::write(dir.path().join("s.json"), "{not json").unwrap();
        assert!(matches!(read_raster(&p), Err(Error::Sidecar { .. })));
        fs::remove_file(dir.path().join("s.json")).unwrap();
        assert!(matches!(read_raster(&p), Err(Error::Sidecar { .. })));
    }

    #[test]
    fn bad_magic_and_non_finite_payload() {
        let dir = tmpdir();
        let p = dir.path().join("b.psr");
        let img = RasterImage::filled(1, 1, 1, 10, 1.0).unwrap();
        write_raster(&img, &p).unwrap();
        fs::write(&p, b"XXXX\x01\0\0\x80\x3f").unwrap();
        assert!(matches!(read_raster(&p), Err(Error::Format(_))));
        let mut nan = b"PSRW\x01".to_vec();
        nan.extend_from_slice(&f32::NAN.to_le_bytes());
        fs::write(&p, nan).unwrap();
        assert!(matches!(read_raster(&p), Err(Error::NonFinite(0))));
    }

    #[test]
    fn overflowing_sample_cannot_be_written() {
        let dir = tmpdir();
        let img = RasterImage::new(1, 1, 1, 32, vec![1e300]).unwrap();
        assert!(matches!(
            write_raster(&img, dir.path().join("o.psr")),
            Err(Error::NonFinite(0))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn ten_bit_images_round_trip_exactly(
            w in 1usize..12, h in 1usize..12, k in 1usize..5, seed in any::<u64>()
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let samples = (0..w * h * k).map(|_| rng.random_range(0..1024) as f64).collect();
            let img = RasterImage::new(w, h, k, 10, samples).unwrap();
            let dir = tmpdir();
            let p = dir.path().join("r.psr");
            write_raster(&img, &p).unwrap();
            prop_assert_eq!(read_raster(&p).unwrap(), img);
        }
    }
}
