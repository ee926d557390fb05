//! Band-dependent spatial detail injection.
//!
//! Each fused band is `P_i = U_i + gamma_i * Y - sum_j beta_ij * U_j`, i.e.
//! `U_i + gamma_i * (Y - sum_j w_ij U_j)` with `beta_ij = gamma_i * w_ij`.
//! The K + 1 coefficients per band are a linear least-squares fit at the
//! reduced scale, where the original MS serves as the target, and are then
//! reused unchanged at full scale.

use serde::{Deserialize, Serialize};

use super::prepare;
use crate::degrade::{wald_degrade, DegradeConfig};
use crate::error::{Error, Result};
use crate::linalg::NormalEquations;
use crate::raster::{upsample, Interpolation, RasterImage, SensorSpec};

/// Ridge added when the reduced-scale system is singular; escalated by
/// 100x until the factorization succeeds.
const FALLBACK_RIDGE: f64 = 1e-6;
const FALLBACK_STEPS: i32 = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BdsdCoefficients {
    /// PAN gain per band.
    pub gamma: Vec<f64>,
    /// `beta[i][j]`: weight of upsampled band `j` subtracted from band `i`.
    pub beta: Vec<Vec<f64>>,
    /// RMSE of the fit over all bands at the reduced scale.
    pub residual_rmse: f64,
}

impl BdsdCoefficients {
    pub fn zeros(bands: usize) -> Self {
        Self {
            gamma: vec![0.0; bands],
            beta: vec![vec![0.0; bands]; bands],
            residual_rmse: 0.0,
        }
    }
}

/// Fits the coefficients from a reduced pair and the reference MS.
///
/// `pan_reduced` and `ms_reference` share one grid; `ms_reduced` sits at
/// `1/ratio` of it.
pub fn bdsd_fit(
    pan_reduced: &RasterImage,
    ms_reduced: &RasterImage,
    ms_reference: &RasterImage,
    ratio: usize,
) -> Result<BdsdCoefficients> {
    let up = upsample(ms_reduced, ratio, Interpolation::Bicubic)?;
    if pan_reduced.bands() != 1
        || pan_reduced.width() != up.width()
        || pan_reduced.height() != up.height()
        || !up.same_shape(ms_reference)
    {
        return Err(Error::Shape(format!(
            "reduced PAN {:?}, upsampled MS {:?} and reference {:?} must share one grid",
            pan_reduced.dims(),
            up.dims(),
            ms_reference.dims()
        )));
    }
    let k = up.bands();
    let n = up.plane_len();
    let y = pan_reduced.band(0);

    // The design matrix [Y, U_1..U_K] is the same for every band.
    let mut ne = NormalEquations::new(k + 1);
    let mut rhs = vec![vec![0.0; k + 1]; k];
    let mut row = vec![0.0; k + 1];
    let mut targets = vec![0.0; k];
    for p in 0..n {
        row[0] = y[p];
        for j in 0..k {
            row[j + 1] = up.band(j)[p];
        }
        ne.add_row(&row, 0.0);
        for i in 0..k {
            targets[i] = ms_reference.band(i)[p] - row[i + 1];
            for (acc, x) in rhs[i].iter_mut().zip(&row) {
                *acc += x * targets[i];
            }
        }
    }
    let mut coeffs = BdsdCoefficients::zeros(k);
    let mut sse = 0.0;
    for i in 0..k {
        let sol = solve_with_fallback(&ne, &rhs[i])
            .ok_or_else(|| Error::Singular(format!("BDSD system for band {i}")))?;
        coeffs.gamma[i] = sol[0];
        for j in 0..k {
            coeffs.beta[i][j] = -sol[j + 1];
        }
        for p in 0..n {
            let mut fit = sol[0] * y[p];
            for j in 0..k {
                fit += sol[j + 1] * up.band(j)[p];
            }
            let target = ms_reference.band(i)[p] - up.band(i)[p];
            sse += (fit - target) * (fit - target);
        }
    }
    coeffs.residual_rmse = (sse / (n * k) as f64).sqrt();
    Ok(coeffs)
}

fn solve_with_fallback(ne: &NormalEquations, rhs: &[f64]) -> Option<Vec<f64>> {
    let mut sys = ne.clone();
    sys.set_rhs(rhs);
    sys.solve(0.0).or_else(|| {
        (0..FALLBACK_STEPS).find_map(|step| sys.solve_regularized(FALLBACK_RIDGE * 100f64.powi(step)))
    })
}

/// Applies fitted coefficients at full scale.
pub fn bdsd_apply(
    pan: &RasterImage,
    ms: &RasterImage,
    spec: &SensorSpec,
    coeffs: &BdsdCoefficients,
) -> Result<RasterImage> {
    let p = prepare(pan, ms, spec)?;
    let k = p.upsampled.bands();
    if coeffs.gamma.len() != k || coeffs.beta.len() != k || coeffs.beta.iter().any(|r| r.len() != k) {
        return Err(Error::Shape(format!("coefficients do not cover {k} bands")));
    }
    let planes = (0..k)
        .map(|i| {
            let mut out: Vec<f64> = p
                .upsampled
                .band(i)
                .iter()
                .zip(p.pan)
                .map(|(u, y)| u + coeffs.gamma[i] * y)
                .collect();
            for j in 0..k {
                let bij = coeffs.beta[i][j];
                for (o, u) in out.iter_mut().zip(p.upsampled.band(j)) {
                    *o -= bij * u;
                }
            }
            out
        })
        .collect();
    RasterImage::from_bands(p.width, p.height, ms.bit_depth(), planes)
}

/// Wald-degrades the pair, fits at the reduced scale and applies at full
/// scale.
pub fn fuse_bdsd(pan: &RasterImage, ms: &RasterImage, spec: &SensorSpec) -> Result<RasterImage> {
    crate::raster::check_pan_ms(pan, ms, spec.ratio)?;
    let cfg = DegradeConfig::for_ratio(spec.ratio);
    let (pan_r, ms_r) = wald_degrade(pan, ms, &cfg)?;
    let coeffs = bdsd_fit(&pan_r, &ms_r, ms, spec.ratio)?;
    bdsd_apply(pan, ms, spec, &coeffs)
}
