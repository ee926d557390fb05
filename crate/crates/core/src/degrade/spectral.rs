use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::NormalEquations;
use crate::raster::RasterImage;

/// Linear MS -> PAN response: one 3x3 kernel per band plus a bias.
///
/// `kernel[b][1 + dr][1 + dc]` weights band `b` at offset `(dr, dc)` from the
/// output pixel (correlation order, edges replicated).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralWeights {
    pub kernel: Vec<[[f64; 3]; 3]>,
    pub bias: f64,
    #[serde(rename = "K")]
    pub bands: usize,
    /// RMSE of the fit on the data it was solved from.
    pub residual_rmse: f64,
}

impl SpectralWeights {
    pub fn zeros(bands: usize, bias: f64) -> Self {
        Self {
            kernel: vec![[[0.0; 3]; 3]; bands],
            bias,
            bands,
            residual_rmse: 0.0,
        }
    }

    /// Center-tap-only weights, i.e. a per-pixel linear band combination.
    pub fn pointwise(weights: &[f64], bias: f64) -> Self {
        let mut w = Self::zeros(weights.len(), bias);
        for (k, &v) in weights.iter().enumerate() {
            w.kernel[k][1][1] = v;
        }
        w
    }

    pub fn center_taps(&self) -> Vec<f64> {
        self.kernel.iter().map(|k| k[1][1]).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel.len() != self.bands {
            return Err(Error::Shape(format!(
                "kernel holds {} bands, K = {}",
                self.kernel.len(),
                self.bands
            )));
        }
        let all = self.kernel.iter().flatten().flatten().chain([&self.bias]);
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite spectral weight".into()));
        }
        Ok(())
    }

    fn flat(&self) -> Vec<f64> {
        self.kernel.iter().flatten().flatten().copied().collect()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let w: Self = serde_json::from_str(text)
            .map_err(|e| Error::Format(format!("spectral weights: {e}")))?;
        w.validate()?;
        Ok(w)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("weights serialize")
    }
}

/// Writes the 9K edge-replicated neighborhood values of pixel `(r, c)`.
fn neighborhood(img: &RasterImage, r: usize, c: usize, out: &mut [f64]) {
    let (w, h, k) = img.dims();
    let mut i = 0;
    for b in 0..k {
        let plane = img.band(b);
        for dr in -1isize..=1 {
            let rr = (r as isize + dr).clamp(0, h as isize - 1) as usize;
            for dc in -1isize..=1 {
                let cc = (c as isize + dc).clamp(0, w as isize - 1) as usize;
                out[i] = plane[rr * w + cc];
                i += 1;
            }
        }
    }
}

/// Applies the spectral response, producing a single-band image.
pub fn spectral_degrade(img: &RasterImage, weights: &SpectralWeights) -> Result<RasterImage> {
    if img.bands() != weights.bands || weights.kernel.len() != weights.bands {
        return Err(Error::Shape(format!(
            "image has {} bands, weights expect {}",
            img.bands(),
            weights.bands
        )));
    }
    let flat = weights.flat();
    let (w, h, k) = img.dims();
    let mut nb = vec![0.0; 9 * k];
    let mut out = Vec::with_capacity(w * h);
    for r in 0..h {
        for c in 0..w {
            neighborhood(img, r, c, &mut nb);
            out.push(weights.bias + nb.iter().zip(&flat).map(|(x, a)| x * a).sum::<f64>());
        }
    }
    RasterImage::new(w, h, 1, img.bit_depth(), out)
}

/// Ridge least-squares fit of a [`SpectralWeights`] mapping `ms` onto the
/// co-located `pan_reduced`. See [`fit_spectral_weights_multi`].
pub fn fit_spectral_weights(ms: &RasterImage, pan_reduced: &RasterImage, ridge: f64) -> Result<SpectralWeights> {
    fit_spectral_weights_multi(&[(ms, pan_reduced)], ridge)
}

/// Solves one kernel jointly over several (MS, reduced PAN) pairs.
///
/// Minimizes `sum (f(X) - Y)^2 + ridge * |kernel|^2`; the bias is not
/// penalized. Features and target are centered before the normal equations
/// are formed, which keeps the Gram matrix well scaled for raw digital
/// numbers. With `ridge == 0` a rank-deficient design is an error.
pub fn fit_spectral_weights_multi(pairs: &[(&RasterImage, &RasterImage)], ridge: f64) -> Result<SpectralWeights> {
    if !(ridge.is_finite() && ridge >= 0.0) {
        return Err(Error::InvalidParameter(format!("ridge must be >= 0, got {ridge}")));
    }
    let (first_ms, _) = pairs
        .first()
        .ok_or_else(|| Error::InvalidParameter("no training pairs".into()))?;
    let k = first_ms.bands();
    let n_feat = 9 * k;
    for (ms, pan) in pairs {
        if ms.bands() != k {
            return Err(Error::Shape(format!("band count {} != {k}", ms.bands())));
        }
        if pan.bands() != 1 || pan.width() != ms.width() || pan.height() != ms.height() {
            return Err(Error::Shape(format!(
                "reduced PAN {}x{}x{} does not match MS {}x{}",
                pan.width(),
                pan.height(),
                pan.bands(),
                ms.width(),
                ms.height()
            )));
        }
    }

    let mut nb = vec![0.0; n_feat];
    let mut feat_sum = vec![0.0; n_feat];
    let mut target_sum = 0.0;
    let mut count = 0usize;
    for_each_sample(pairs, &mut nb, |x, y| {
        for (s, v) in feat_sum.iter_mut().zip(x) {
            *s += v;
        }
        target_sum += y;
        count += 1;
    });
    let n = count as f64;
    let feat_mean: Vec<f64> = feat_sum.iter().map(|s| s / n).collect();
    let target_mean = target_sum / n;

    let mut ne = NormalEquations::new(n_feat);
    let mut centered = vec![0.0; n_feat];
    for_each_sample(pairs, &mut nb, |x, y| {
        for ((c, v), m) in centered.iter_mut().zip(x).zip(&feat_mean) {
            *c = v - m;
        }
        ne.add_row(&centered, y - target_mean);
    });
    let flat = ne.solve(ridge).ok_or_else(|| {
        Error::Singular(format!(
            "spectral normal equations are rank deficient at ridge {ridge}; retry with ridge > 0"
        ))
    })?;

    let bias = target_mean - flat.iter().zip(&feat_mean).map(|(a, m)| a * m).sum::<f64>();
    let mut kernel = vec![[[0.0; 3]; 3]; k];
    for (i, v) in flat.iter().enumerate() {
        kernel[i / 9][(i % 9) / 3][i % 3] = *v;
    }
    let mut weights = SpectralWeights {
        kernel,
        bias,
        bands: k,
        residual_rmse: 0.0,
    };

    let mut sse = 0.0;
    for (ms, pan) in pairs {
        let fitted = spectral_degrade(ms, &weights)?;
        sse += fitted
            .samples()
            .iter()
            .zip(pan.samples())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
    }
    weights.residual_rmse = (sse / n).sqrt();
    Ok(weights)
}

fn for_each_sample(pairs: &[(&RasterImage, &RasterImage)], nb: &mut [f64], mut f: impl FnMut(&[f64], f64)) {
    for (ms, pan) in pairs {
        let w = ms.width();
        let target = pan.band(0);
        for r in 0..ms.height() {
            for c in 0..w {
                neighborhood(ms, r, c, nb);
                f(nb, target[r * w + c]);
            }
        }
    }
}
