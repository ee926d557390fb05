//! Per-patch quality records, their aggregates, and the JSON/CSV forms.

use serde::{Deserialize, Serialize};

use super::{d_lambda_with, d_s_with, ergas, mean_std, qnr, sam, ssim, DistortionForm, QMode};
use crate::degrade::{spatial_degrade, DegradeConfig};
use crate::error::{Error, Result};
use crate::raster::{RasterImage, SensorSpec};

pub const CSV_COLUMNS: [&str; 7] = ["patch_id", "d_lambda", "d_s", "qnr", "sam", "ergas", "ssim"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoRefMetrics {
    pub d_lambda: f64,
    pub d_s: f64,
    pub qnr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefMetrics {
    /// Degrees.
    pub sam: f64,
    pub ergas: f64,
    pub ssim: f64,
}

/// Where the PAN at MS scale comes from.
#[derive(Debug, Clone, Copy)]
pub enum PanReduction<'a> {
    /// Blur and decimate the PAN.
    Degrade(&'a DegradeConfig),
    /// Use a caller-supplied reduced PAN.
    Provided(&'a RasterImage),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FullEvalConfig {
    pub q_mode: QMode,
    pub form: DistortionForm,
}

/// D_lambda, D_s and QNR of fused `p` against its inputs.
pub fn evaluate_full(
    p: &RasterImage,
    x: &RasterImage,
    y: &RasterImage,
    reduction: PanReduction<'_>,
    cfg: &FullEvalConfig,
) -> Result<NoRefMetrics> {
    let owned;
    let y_reduced = match reduction {
        PanReduction::Provided(img) => img,
        PanReduction::Degrade(dc) => {
            owned = spatial_degrade(y, dc)?;
            &owned
        }
    };
    let d_lambda = d_lambda_with(p, x, cfg.q_mode, cfg.form)?;
    let d_s = d_s_with(p, x, y, y_reduced, cfg.q_mode, cfg.form)?;
    Ok(NoRefMetrics {
        d_lambda,
        d_s,
        qnr: qnr(d_lambda, d_s)?,
    })
}

/// SAM, ERGAS and SSIM of `p` against `ground_truth`.
pub fn evaluate_reduced(p: &RasterImage, ground_truth: &RasterImage, spec: &SensorSpec) -> Result<RefMetrics> {
    Ok(RefMetrics {
        sam: sam(p, ground_truth)?,
        ergas: ergas(p, ground_truth, spec)?,
        ssim: ssim(p, ground_truth, spec.bit_depth)?,
    })
}

/// One row of a report. Metrics that were not computed are `None`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct QualityRecord {
    pub patch_id: String,
    pub d_lambda: Option<f64>,
    pub d_s: Option<f64>,
    pub qnr: Option<f64>,
    pub sam: Option<f64>,
    pub ergas: Option<f64>,
    pub ssim: Option<f64>,
}

impl QualityRecord {
    pub fn new(patch_id: impl Into<String>) -> Self {
        Self {
            patch_id: patch_id.into(),
            ..Self::default()
        }
    }

    pub fn with_full(mut self, m: NoRefMetrics) -> Self {
        self.d_lambda = Some(m.d_lambda);
        self.d_s = Some(m.d_s);
        self.qnr = Some(m.qnr);
        self
    }

    pub fn with_reduced(mut self, m: RefMetrics) -> Self {
        self.sam = Some(m.sam);
        self.ergas = Some(m.ergas);
        self.ssim = Some(m.ssim);
        self
    }

    /// Metric values in column order (without `patch_id`).
    pub fn values(&self) -> [Option<f64>; 6] {
        [self.d_lambda, self.d_s, self.qnr, self.sam, self.ergas, self.ssim]
    }

    fn from_values(patch_id: &str, v: [Option<f64>; 6]) -> Self {
        Self {
            patch_id: patch_id.into(),
            d_lambda: v[0],
            d_s: v[1],
            qnr: v[2],
            sam: v[3],
            ergas: v[4],
            ssim: v[5],
        }
    }

    /// Checks declared ranges and `qnr = (1 - d_lambda)(1 - d_s)`.
    pub fn check_invariants(&self) -> Result<()> {
        let in_range = |name: &str, v: Option<f64>, lo: f64, hi: f64| match v {
            Some(v) if !(lo..=hi).contains(&v) || !v.is_finite() => Err(Error::Degenerate(format!(
                "{}: {name} = {v} outside [{lo}, {hi}]",
                self.patch_id
            ))),
            _ => Ok(()),
        };
        in_range("d_lambda", self.d_lambda, 0.0, 1.0)?;
        in_range("d_s", self.d_s, 0.0, 1.0)?;
        in_range("qnr", self.qnr, 0.0, 1.0)?;
        in_range("sam", self.sam, 0.0, 180.0)?;
        in_range("ergas", self.ergas, 0.0, f64::MAX)?;
        in_range("ssim", self.ssim, -1.0, 1.0)?;
        if let (Some(dl), Some(ds), Some(q)) = (self.d_lambda, self.d_s, self.qnr) {
            if ((1.0 - dl) * (1.0 - ds) - q).abs() > 1e-12 {
                return Err(Error::Degenerate(format!(
                    "{}: qnr {q} != (1 - {dl})(1 - {ds})",
                    self.patch_id
                )));
            }
        }
        Ok(())
    }
}

/// Per-patch records for one method plus mean/std aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub method: String,
    /// Q aggregation used for the no-reference metrics.
    pub q_mode: QMode,
    pub distortion_form: DistortionForm,
    pub records: Vec<QualityRecord>,
    pub mean: QualityRecord,
    pub std: QualityRecord,
}

impl QualityReport {
    pub fn new(method: impl Into<String>, q_mode: QMode, distortion_form: DistortionForm, records: Vec<QualityRecord>) -> Self {
        let (mean, std) = aggregate(&records);
        Self {
            method: method.into(),
            q_mode,
            distortion_form,
            records,
            mean,
            std,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(format!("quality report: {e}")))
    }

    /// CSV with a header, one row per patch, then `mean` and `std` rows.
    /// Missing metrics are empty cells.
    pub fn to_csv(&self) -> String {
        let mut out = CSV_COLUMNS.join(",");
        out.push('\n');
        for rec in self.records.iter().chain([&self.mean, &self.std]) {
            out.push_str(&csv_field(&rec.patch_id));
            for v in rec.values() {
                out.push(',');
                if let Some(v) = v {
                    out.push_str(&v.to_string());
                }
            }
            out.push('\n');
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

/// Mean and sample standard deviation per metric over the records that
/// carry it.
pub fn aggregate(records: &[QualityRecord]) -> (QualityRecord, QualityRecord) {
    let mut means = [None; 6];
    let mut stds = [None; 6];
    for m in 0..6 {
        let vals: Vec<f64> = records.iter().filter_map(|r| r.values()[m]).collect();
        if let Some((mu, sd)) = mean_std(&vals) {
            means[m] = Some(mu);
            stds[m] = Some(sd);
        }
    }
    (
        QualityRecord::from_values("mean", means),
        QualityRecord::from_values("std", stds),
    )
}
