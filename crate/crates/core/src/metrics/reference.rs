use super::NeumaierSum;
use crate::error::{Error, Result};
use crate::raster::{max_value, RasterImage, SensorSpec};

pub const SSIM_WINDOW: usize = 8;
pub const SSIM_STRIDE: usize = 8;

fn check_same(p: &RasterImage, r: &RasterImage, what: &str) -> Result<()> {
    if !p.same_shape(r) {
        return Err(Error::Shape(format!(
            "{what}: fused {:?} and reference {:?} differ",
            p.dims(),
            r.dims()
        )));
    }
    Ok(())
}

/// Spectral angle mapper in degrees, averaged over pixels.
///
/// Pixels where either spectrum has zero norm are skipped. The angle is
/// evaluated as `2 atan2(|p^ - r^|, |p^ + r^|)` on the unit vectors, which
/// equals `arccos` of the normalized dot product without its loss of
/// precision near 0 and 180 degrees.
pub fn sam(p: &RasterImage, r: &RasterImage) -> Result<f64> {
    check_same(p, r, "SAM")?;
    let k = p.bands();
    let n = p.plane_len();
    let mut sum = NeumaierSum::default();
    let mut count = 0usize;
    let mut pv = vec![0.0; k];
    let mut rv = vec![0.0; k];
    for i in 0..n {
        for b in 0..k {
            pv[b] = p.band(b)[i];
            rv[b] = r.band(b)[i];
        }
        let np = pv.iter().map(|v| v * v).sum::<f64>().sqrt();
        let nr = rv.iter().map(|v| v * v).sum::<f64>().sqrt();
        if np == 0.0 || nr == 0.0 {
            continue;
        }
        let (mut diff, mut plus) = (0.0, 0.0);
        for b in 0..k {
            let (a, c) = (pv[b] / np, rv[b] / nr);
            diff += (a - c) * (a - c);
            plus += (a + c) * (a + c);
        }
        sum.add(2.0 * diff.sqrt().atan2(plus.sqrt()));
        count += 1;
    }
    if count == 0 {
        return Err(Error::Degenerate("SAM: every pixel has a zero-norm spectrum".into()));
    }
    Ok((sum.total() / count as f64).to_degrees())
}

/// ERGAS with `h/l = 1/ratio`, normalizing each band RMSE by the reference
/// band mean.
pub fn ergas(p: &RasterImage, r: &RasterImage, spec: &SensorSpec) -> Result<f64> {
    check_same(p, r, "ERGAS")?;
    if spec.ratio == 0 {
        return Err(Error::InvalidParameter("ratio must be positive".into()));
    }
    let n = p.plane_len() as f64;
    let mut acc = NeumaierSum::default();
    for b in 0..p.bands() {
        let mean = r.band(b).iter().copied().collect::<NeumaierSum>().total() / n;
        if mean == 0.0 {
            return Err(Error::Degenerate(format!("ERGAS: reference band {b} has zero mean")));
        }
        let mse = p
            .band(b)
            .iter()
            .zip(r.band(b))
            .map(|(x, y)| (x - y) * (x - y))
            .collect::<NeumaierSum>()
            .total()
            / n;
        acc.add(mse / (mean * mean));
    }
    Ok(100.0 / spec.ratio as f64 * (acc.total() / p.bands() as f64).sqrt())
}

/// Mean SSIM over 8x8 windows at stride 8 and over bands.
pub fn ssim(p: &RasterImage, r: &RasterImage, bit_depth: u8) -> Result<f64> {
    ssim_with(p, r, bit_depth, SSIM_WINDOW, SSIM_STRIDE)
}

/// SSIM with uniform windows; statistics use population (1/N) moments and
/// `c1 = (0.01 L)^2`, `c2 = (0.03 L)^2`, `L = 2^bit_depth - 1`.
pub fn ssim_with(p: &RasterImage, r: &RasterImage, bit_depth: u8, window: usize, stride: usize) -> Result<f64> {
    check_same(p, r, "SSIM")?;
    if window == 0 || stride == 0 {
        return Err(Error::InvalidParameter("SSIM window and stride must be positive".into()));
    }
    if window > p.width() || window > p.height() {
        return Err(Error::Shape(format!(
            "SSIM window {window} larger than {}x{}",
            p.width(),
            p.height()
        )));
    }
    if !(1..=32).contains(&bit_depth) {
        return Err(Error::InvalidParameter(format!("bit depth {bit_depth} outside 1..=32")));
    }
    let l = max_value(bit_depth);
    let c1 = (0.01 * l).powi(2);
    let c2 = (0.03 * l).powi(2);
    let w = p.width();
    let nw = (window * window) as f64;
    let mut band_sum = NeumaierSum::default();
    for b in 0..p.bands() {
        let (x, y) = (p.band(b), r.band(b));
        let mut sum = NeumaierSum::default();
        let mut count = 0usize;
        for r0 in (0..=p.height() - window).step_by(stride) {
            for c0 in (0..=w - window).step_by(stride) {
                let idx = || (r0..r0 + window).flat_map(move |rr| (c0..c0 + window).map(move |cc| rr * w + cc));
                let (mut sx, mut sy) = (0.0, 0.0);
                for i in idx() {
                    sx += x[i];
                    sy += y[i];
                }
                let (mx, my) = (sx / nw, sy / nw);
                let (mut vxx, mut vyy, mut vxy) = (0.0, 0.0, 0.0);
                for i in idx() {
                    let (dx, dy) = (x[i] - mx, y[i] - my);
                    vxx += dx * dx;
                    vyy += dy * dy;
                    vxy += dx * dy;
                }
                let (vxx, vyy, vxy) = (vxx / nw, vyy / nw, vxy / nw);
                let s = (2.0 * mx * my + c1) * (2.0 * vxy + c2)
                    / ((mx * mx + my * my + c1) * (vxx + vyy + c2));
                sum.add(s);
                count += 1;
            }
        }
        band_sum.add(sum.total() / count as f64);
    }
    Ok(band_sum.total() / p.bands() as f64)
}
