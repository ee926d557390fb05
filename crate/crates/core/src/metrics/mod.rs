//! Quality metrics.
//!
//! No-reference metrics compare a fused product `P` with its own inputs:
//! the LR MS `X`, the PAN `Y` and the PAN reduced to MS scale. Reference
//! metrics (SAM, ERGAS, SSIM) compare `P` with a ground-truth image and are
//! used under the reduced-resolution protocol.
//!
//! The distortion indices are computed as
//!
//! ```text
//! D_lambda = sqrt( 2 / (K (K-1)) * sum_{i<j} |Q(P_i, P_j) - Q(X_i, X_j)| )
//! D_s      = sqrt( 1 / K         * sum_i    |Q(P_i, Y)   - Q(X_i, Y~)|  )
//! QNR      = (1 - D_lambda) (1 - D_s)
//! ```
//!
//! [`DistortionForm::Classical`] drops the square root for comparison with
//! tools that use the original QNR definition.

mod reference;
mod report;
mod stats;

pub use reference::{ergas, sam, ssim, ssim_with, SSIM_STRIDE, SSIM_WINDOW};
pub use report::{
    aggregate, evaluate_full, evaluate_reduced, FullEvalConfig, NoRefMetrics, PanReduction, QualityRecord,
    QualityReport, RefMetrics, CSV_COLUMNS,
};
pub use stats::{mean_std, NeumaierSum};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{BandView, RasterImage};

pub const DEFAULT_Q_WINDOW: usize = 32;
pub const MIN_Q_WINDOW: usize = 4;

/// How Q statistics are aggregated over an image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum QMode {
    /// One block covering the whole image.
    Global,
    /// Mean over `window x window` blocks placed every `stride` pixels.
    /// Sizes are given at the fused-product (PAN) scale.
    Windowed { window: usize, stride: usize },
}

impl Default for QMode {
    fn default() -> Self {
        QMode::Windowed {
            window: DEFAULT_Q_WINDOW,
            stride: DEFAULT_Q_WINDOW,
        }
    }
}

impl QMode {
    pub fn windowed(window: usize) -> Result<Self> {
        let mode = QMode::Windowed {
            window,
            stride: window,
        };
        mode.validate()?;
        Ok(mode)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            QMode::Global => Ok(()),
            QMode::Windowed { window, stride } => {
                if window < MIN_Q_WINDOW || stride == 0 {
                    Err(Error::InvalidParameter(format!(
                        "invalid Q window {window} / stride {stride}"
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// The same mode at `1/ratio` of the scale.
    pub fn downscaled(&self, ratio: usize) -> Result<QMode> {
        match *self {
            QMode::Global => Ok(QMode::Global),
            QMode::Windowed { window, stride } => {
                if ratio == 0 || window % ratio != 0 || stride % ratio != 0 {
                    return Err(Error::InvalidParameter(format!(
                        "Q window {window} / stride {stride} not divisible by ratio {ratio}"
                    )));
                }
                let scaled = QMode::Windowed {
                    window: window / ratio,
                    stride: stride / ratio,
                };
                scaled.validate()?;
                Ok(scaled)
            }
        }
    }
}

impl fmt::Display for QMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            QMode::Global => f.write_str("global"),
            QMode::Windowed { window, stride } if window == stride => write!(f, "windowed:{window}"),
            QMode::Windowed { window, stride } => write!(f, "windowed:{window}/{stride}"),
        }
    }
}

impl FromStr for QMode {
    type Err = Error;

    /// Parses `global`, `windowed` (default 32), `windowed:N` or
    /// `windowed:N/S`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("invalid Q mode '{s}'; use global or windowed:N"));
        let s = s.trim();
        if s == "global" {
            return Ok(QMode::Global);
        }
        if s == "windowed" {
            return Ok(QMode::default());
        }
        let spec = s.strip_prefix("windowed:").ok_or_else(bad)?;
        let (w, st) = match spec.split_once('/') {
            Some((w, st)) => (w, Some(st)),
            None => (spec, None),
        };
        let window: usize = w.parse().map_err(|_| bad())?;
        let stride: usize = match st {
            Some(st) => st.parse().map_err(|_| bad())?,
            None => window,
        };
        let mode = QMode::Windowed { window, stride };
        mode.validate()?;
        Ok(mode)
    }
}

impl TryFrom<String> for QMode {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<QMode> for String {
    fn from(m: QMode) -> String {
        m.to_string()
    }
}

/// Whether D_lambda / D_s take the square root of the mean difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistortionForm {
    #[default]
    Sqrt,
    Classical,
}

impl DistortionForm {
    fn finish(self, mean_abs_diff: f64) -> f64 {
        match self {
            DistortionForm::Sqrt => mean_abs_diff.sqrt(),
            DistortionForm::Classical => mean_abs_diff,
        }
    }
}

impl FromStr for DistortionForm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "sqrt" => Ok(DistortionForm::Sqrt),
            "classical" => Ok(DistortionForm::Classical),
            other => Err(Error::InvalidParameter(format!(
                "unknown distortion form '{other}'; use sqrt or classical"
            ))),
        }
    }
}

impl fmt::Display for DistortionForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistortionForm::Sqrt => "sqrt",
            DistortionForm::Classical => "classical",
        })
    }
}

/// Q of one block, or `None` when the block is skipped.
///
/// Moments use compensated sums so that pixel-replicated blocks give the
/// same Q as their originals.
fn block_q(a: &BandView<'_>, b: &BandView<'_>, r0: usize, c0: usize, bw: usize, bh: usize) -> Option<f64> {
    let n = (bw * bh) as f64;
    let rows = || (r0..r0 + bh).map(move |r| r * a.width + c0);
    let pairs = || {
        rows().flat_map(move |start| a.data[start..start + bw].iter().zip(&b.data[start..start + bw]))
    };
    let first = (a.data[r0 * a.width + c0], b.data[r0 * b.width + c0]);
    let mut sa = NeumaierSum::default();
    let mut sb = NeumaierSum::default();
    let mut a_const = true;
    let mut b_const = true;
    for (&x, &y) in pairs() {
        sa.add(x);
        sb.add(y);
        a_const &= x == first.0;
        b_const &= y == first.1;
    }
    if a_const && b_const {
        return (first.0 == first.1).then_some(1.0);
    }
    let ma = if a_const { first.0 } else { sa.total() / n };
    let mb = if b_const { first.1 } else { sb.total() / n };
    let mut vaa = NeumaierSum::default();
    let mut vbb = NeumaierSum::default();
    let mut vab = NeumaierSum::default();
    // a flat side contributes exactly zero variance and covariance
    for (&x, &y) in pairs() {
        let (dx, dy) = (x - ma, y - mb);
        if !a_const {
            vaa.add(dx * dx);
        }
        if !b_const {
            vbb.add(dy * dy);
        }
        if !(a_const || b_const) {
            vab.add(dx * dy);
        }
    }
    let den = (vaa.total() + vbb.total()) / n * (ma * ma + mb * mb);
    if den == 0.0 {
        return None;
    }
    Some(4.0 * (vab.total() / n) * ma * mb / den)
}

/// Universal image quality index between two single-band images.
///
/// Blocks whose denominator vanishes count as 1 when both are the same
/// constant and are skipped otherwise.
pub fn q_index(a: BandView<'_>, b: BandView<'_>, mode: QMode) -> Result<f64> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::Shape(format!(
            "Q operands {}x{} and {}x{} differ",
            a.width, a.height, b.width, b.height
        )));
    }
    mode.validate()?;
    let (bw, bh, stride) = match mode {
        QMode::Global => (a.width, a.height, a.width.max(a.height)),
        QMode::Windowed { window, stride } => {
            if window > a.width || window > a.height {
                return Err(Error::Shape(format!(
                    "Q window {window} larger than {}x{}",
                    a.width, a.height
                )));
            }
            (window, window, stride)
        }
    };
    if bw * bh < 2 {
        return Err(Error::Shape("Q needs at least 2 pixels per block".into()));
    }
    let mut sum = NeumaierSum::default();
    let mut count = 0usize;
    for r0 in (0..=a.height - bh).step_by(stride) {
        for c0 in (0..=a.width - bw).step_by(stride) {
            if let Some(q) = block_q(&a, &b, r0, c0, bw, bh) {
                sum.add(q);
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::Degenerate("every Q block was skipped".into()));
    }
    Ok(sum.total() / count as f64)
}

/// Integer ratio between the extents of `fine` and `coarse`.
fn scale_ratio(fine: &RasterImage, coarse: &RasterImage) -> Result<usize> {
    let ok = coarse.width() > 0
        && fine.width() % coarse.width() == 0
        && fine.height() % coarse.height() == 0
        && fine.width() / coarse.width() == fine.height() / coarse.height();
    if !ok {
        return Err(Error::Shape(format!(
            "{}x{} is not an integer multiple of {}x{}",
            fine.width(),
            fine.height(),
            coarse.width(),
            coarse.height()
        )));
    }
    Ok(fine.width() / coarse.width())
}

pub fn d_lambda(p: &RasterImage, x: &RasterImage, mode: QMode) -> Result<f64> {
    d_lambda_with(p, x, mode, DistortionForm::Sqrt)
}

/// Spectral distortion between fused `p` and LR MS `x`.
pub fn d_lambda_with(p: &RasterImage, x: &RasterImage, mode: QMode, form: DistortionForm) -> Result<f64> {
    let k = p.bands();
    if k < 2 || x.bands() != k {
        return Err(Error::Shape(format!(
            "D_lambda needs matching band counts >= 2, got {} and {}",
            k,
            x.bands()
        )));
    }
    let ratio = scale_ratio(p, x)?;
    let coarse = mode.downscaled(ratio)?;
    let mut sum = NeumaierSum::default();
    for i in 0..k {
        for j in i + 1..k {
            let qp = q_index(p.band_view(i), p.band_view(j), mode)?;
            let qx = q_index(x.band_view(i), x.band_view(j), coarse)?;
            sum.add((qp - qx).abs());
        }
    }
    let pairs = (k * (k - 1) / 2) as f64;
    Ok(form.finish(sum.total() / pairs))
}

pub fn d_s(p: &RasterImage, x: &RasterImage, y: &RasterImage, y_reduced: &RasterImage, mode: QMode) -> Result<f64> {
    d_s_with(p, x, y, y_reduced, mode, DistortionForm::Sqrt)
}

/// Spatial distortion of fused `p` given LR MS `x`, PAN `y` and the PAN
/// reduced to the scale of `x`.
pub fn d_s_with(
    p: &RasterImage,
    x: &RasterImage,
    y: &RasterImage,
    y_reduced: &RasterImage,
    mode: QMode,
    form: DistortionForm,
) -> Result<f64> {
    let k = p.bands();
    if x.bands() != k || k == 0 {
        return Err(Error::Shape(format!("band counts {} and {} differ", k, x.bands())));
    }
    if y.bands() != 1 || y_reduced.bands() != 1 {
        return Err(Error::Shape("PAN inputs must be single-band".into()));
    }
    if (y.width(), y.height()) != (p.width(), p.height()) {
        return Err(Error::Shape(format!(
            "PAN {}x{} does not match fused {}x{}",
            y.width(),
            y.height(),
            p.width(),
            p.height()
        )));
    }
    if (y_reduced.width(), y_reduced.height()) != (x.width(), x.height()) {
        return Err(Error::Shape(format!(
            "reduced PAN {}x{} does not match MS {}x{}",
            y_reduced.width(),
            y_reduced.height(),
            x.width(),
            x.height()
        )));
    }
    let ratio = scale_ratio(p, x)?;
    let coarse = mode.downscaled(ratio)?;
    let mut sum = NeumaierSum::default();
    for i in 0..k {
        let qp = q_index(p.band_view(i), y.band_view(0), mode)?;
        let qx = q_index(x.band_view(i), y_reduced.band_view(0), coarse)?;
        sum.add((qp - qx).abs());
    }
    Ok(form.finish(sum.total() / k as f64))
}

/// `(1 - D_lambda)(1 - D_s)`.
pub fn qnr(d_lambda: f64, d_s: f64) -> Result<f64> {
    for (name, v) in [("D_lambda", d_lambda), ("D_s", d_s)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidParameter(format!("{name} = {v} outside [0, 1]")));
        }
    }
    Ok((1.0 - d_lambda) * (1.0 - d_s))
}

/// `1 - QNR`, the no-reference training objective.
pub fn q_loss(p: &RasterImage, x: &RasterImage, y: &RasterImage, y_reduced: &RasterImage, mode: QMode) -> Result<f64> {
    let dl = d_lambda(p, x, mode)?;
    let ds = d_s(p, x, y, y_reduced, mode)?;
    Ok(1.0 - qnr(dl, ds)?)
}
