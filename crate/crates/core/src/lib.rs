//! Pan-sharpening toolkit: raster handling, Wald-protocol degradation,
//! classical fusion baselines and the QNR/reference quality metrics.

pub mod degrade;
pub mod error;
pub mod filter;
pub mod fusion;
pub mod linalg;
pub mod metrics;
pub mod raster;
pub mod synth;

pub use degrade::{
    decimate, fit_spectral_weights, gaussian_blur, spatial_degrade, spectral_degrade,
    wald_degrade, DegradeConfig, SpectralWeights,
};
pub use error::{Error, Result};
pub use fusion::{fuse, FusionMethod, FusionTag};
pub use metrics::{
    d_lambda, d_s, ergas, evaluate_full, evaluate_reduced, q_index, q_loss, qnr, sam, ssim,
    DistortionForm, QMode, QualityRecord, QualityReport,
};
pub use raster::{read_raster, tile, upsample, write_raster, Interpolation, RasterImage, SensorSpec};
pub use synth::{generate_scene, Scene, SceneSpec};
