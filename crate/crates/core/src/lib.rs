//! Density estimation and deconvolution with periodized Meyer wavelets.
//!
//! All wavelet quantities live in the Fourier domain: empirical Fourier
//! coefficients of the sample are mapped to wavelet coefficients through
//! folded FFTs, thresholded with data-driven random thresholds, and the
//! estimate is synthesized back on a dyadic grid.
//!
//! Numerical types are generic over [`scalar::Real`] (`f32` or `f64`); the
//! aliases below fix the scalar for the common cases.

pub mod cli;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod meyer;
pub mod scalar;
pub mod spectral;
pub mod threshold;
pub mod transform;
pub mod truth;

pub use error::{Error, Result};
pub use estimator::{fit, postprocess, FitOptions, FittedEstimate, PostProcess, RescaleMap};
pub use harness::{run_experiment, ExperimentConfig, Mode, RiskReport};
pub use meyer::{build_band_table, BasisSpec};
pub use spectral::NoiseModel;
pub use transform::{forward_fast, forward_reference, reconstruct};
pub use truth::{DensityKind, TruthModel};

pub type BandTable64 = meyer::BandTable<f64>;
pub type BandTable32 = meyer::BandTable<f32>;
pub type CoeffSet64 = transform::CoeffSet<f64>;
pub type CoeffSet32 = transform::CoeffSet<f32>;
pub type EmpiricalFourier64 = spectral::EmpiricalFourier<f64>;
pub type EmpiricalFourier32 = spectral::EmpiricalFourier<f32>;
pub type VarianceTable64 = threshold::VarianceTable<f64>;
pub type VarianceTable32 = threshold::VarianceTable<f32>;
pub type FastTransform64 = transform::FastTransform<f64>;
pub type FastTransform32 = transform::FastTransform<f32>;
