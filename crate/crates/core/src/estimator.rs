//! End-to-end density estimation from raw data.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::Mode;
use crate::meyer::{build_band_table, BasisSpec};
use crate::scalar::Real;
use crate::spectral::{deconvolution_weights, EmpiricalFourier, NoiseModel};
use crate::threshold::{
    coarse_level, delta_deconv, delta_direct, estimate_variance_with, hard_threshold,
    level_threshold_table, random_threshold, select_hyperparams_deconv, select_hyperparams_direct,
    warn_if_outside_theory, Hyperparams, ThresholdParams,
};
use crate::transform::{CoeffSet, FastTransform};

/// Affine map `x -> (x - a) / b` from data units onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RescaleMap {
    a: f64,
    b: f64,
}

pub const DEFAULT_MARGIN: f64 = 0.05;

impl RescaleMap {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && b > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "rescale map needs finite a and b > 0, got a = {a}, b = {b}"
            )));
        }
        Ok(Self { a, b })
    }

    pub fn identity() -> Self {
        Self { a: 0.0, b: 1.0 }
    }

    /// `a = min - margin * range`, `b = (1 + 2 margin) * range`.
    pub fn from_samples(samples: &[f64], margin: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySamples);
        }
        if let Some(index) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample { index });
        }
        if !(margin.is_finite() && margin >= 0.0) {
            return Err(Error::InvalidConfig(format!("margin must be nonnegative, got {margin}")));
        }
        let (lo, hi) = samples
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let range = hi - lo;
        if !(range > 0.0) {
            return Err(Error::DegenerateSamples);
        }
        Self::new(lo - margin * range, (1.0 + 2.0 * margin) * range)
    }

    pub fn offset(&self) -> f64 {
        self.a
    }

    pub fn scale(&self) -> f64 {
        self.b
    }

    pub fn is_identity(&self) -> bool {
        self.a == 0.0 && self.b == 1.0
    }

    pub fn forward(&self, x: f64) -> f64 {
        (x - self.a) / self.b
    }

    pub fn inverse(&self, u: f64) -> f64 {
        self.a + self.b * u
    }

    /// Density factor from `[0, 1]` units back to data units.
    pub fn jacobian(&self) -> f64 {
        1.0 / self.b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PostProcess {
    #[default]
    Raw,
    Clip,
    #[serde(rename = "clip-renorm")]
    ClipRenormalize,
}

impl FromStr for PostProcess {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(PostProcess::Raw),
            "clip" => Ok(PostProcess::Clip),
            "clip-renorm" | "clip-renormalize" => Ok(PostProcess::ClipRenormalize),
            other => Err(Error::InvalidConfig(format!("unknown post-processing '{other}'"))),
        }
    }
}

/// Applies `policy` to grid values spaced `dx` apart.
pub fn postprocess<T: Real>(values: &[T], dx: f64, policy: PostProcess) -> Result<Vec<T>> {
    let clipped = || values.iter().map(|&v| v.max(T::zero()));
    match policy {
        PostProcess::Raw => Ok(values.to_vec()),
        PostProcess::Clip => Ok(clipped().collect()),
        PostProcess::ClipRenormalize => {
            let mass: T = clipped().sum::<T>() * T::lit(dx);
            if !(mass > T::zero()) {
                return Err(Error::AllZeroEstimate);
            }
            Ok(clipped().map(|v| v / mass).collect())
        }
    }
}

/// Which thresholds the estimate uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdRule {
    /// Data-driven `tau_{j,k}` from the estimated variance bounds.
    #[default]
    Random,
    /// `delta sqrt(j / n)`.
    Level,
}

/// How samples are mapped onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rescale {
    Auto { margin: f64 },
    Fixed(RescaleMap),
}

impl Default for Rescale {
    fn default() -> Self {
        Rescale::Auto {
            margin: DEFAULT_MARGIN,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub j0: Option<u32>,
    pub j1: Option<u32>,
    pub delta: Option<f64>,
    /// Defaults to [`DEFAULT_ALPHA_DIRECT`] or [`DEFAULT_ALPHA_DECONV`].
    pub alpha: Option<f64>,
    pub depth: Option<u32>,
    /// Evaluation grid size; defaults to `max(512, 2^J)`.
    pub grid: Option<usize>,
    pub rescale: Rescale,
    pub post: PostProcess,
    pub rule: ThresholdRule,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            j0: None,
            j1: None,
            delta: None,
            alpha: None,
            depth: None,
            grid: None,
            rescale: Rescale::default(),
            post: PostProcess::Raw,
            rule: ThresholdRule::Random,
        }
    }
}

pub const DEFAULT_GRID: usize = 512;
pub const DEFAULT_ALPHA_DIRECT: f64 = 0.0;
pub const DEFAULT_ALPHA_DECONV: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct FittedEstimate<T> {
    pub hyper: Hyperparams,
    pub spec: BasisSpec,
    pub map: RescaleMap,
    /// Noise model after rescaling to `[0, 1]` units.
    pub noise: NoiseModel,
    /// Empirical coefficients before thresholding.
    pub empirical: CoeffSet<T>,
    /// Coefficients of the estimate.
    pub coeffs: CoeffSet<T>,
    /// Grid points in data units.
    pub x: Vec<f64>,
    /// Density in data units, post-processed.
    pub density: Vec<T>,
}

impl<T: Real> FittedEstimate<T> {
    /// Grid spacing in data units.
    pub fn dx(&self) -> f64 {
        self.map.scale() / self.x.len() as f64
    }

    pub fn kept(&self) -> usize {
        self.coeffs
            .levels()
            .flat_map(|(_, b)| b.iter())
            .filter(|b| **b != T::zero())
            .count()
    }
}

fn rescale_noise(noise: &NoiseModel, map: &RescaleMap) -> Result<NoiseModel> {
    match noise {
        NoiseModel::Identity => Ok(NoiseModel::Identity),
        NoiseModel::Laplace { sigma } => NoiseModel::laplace(sigma / map.scale()),
        NoiseModel::Custom { .. } if map.is_identity() => Ok(noise.clone()),
        NoiseModel::Custom { .. } => Err(Error::InvalidConfig(
            "a custom noise model needs samples already on [0, 1] (disable rescaling)".into(),
        )),
    }
}

fn hyperparams(n: usize, mode: Mode, nu: f64, opts: &FitOptions) -> Result<Hyperparams> {
    let alpha = opts.alpha.unwrap_or(match mode {
        Mode::Direct => DEFAULT_ALPHA_DIRECT,
        Mode::Deconvolve => DEFAULT_ALPHA_DECONV,
    });
    let auto = match mode {
        Mode::Direct => select_hyperparams_direct(n, alpha)?,
        Mode::Deconvolve => select_hyperparams_deconv(n, nu, alpha)?,
    };
    let j1 = opts.j1.unwrap_or(auto.j1);
    let j0 = opts.j0.unwrap_or_else(|| coarse_level(n).min(j1));
    let delta = match (opts.delta, opts.j1) {
        (Some(d), _) => d,
        (None, None) => auto.delta,
        (None, Some(j1)) => match mode {
            Mode::Direct => delta_direct(n, j1, alpha),
            Mode::Deconvolve => delta_deconv(n, j1, nu, alpha),
        },
    };
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "delta = {delta} is not usable; pass an explicit nonnegative delta"
        )));
    }
    warn_if_outside_theory(n, j1, nu, delta);
    Ok(Hyperparams { j0, j1, delta })
}

/// Fits the thresholded wavelet estimator.
///
/// In deconvolution mode `noise` describes the errors in data units and
/// `samples` are the contaminated observations.
pub fn fit<T: Real>(
    samples: &[f64],
    mode: Mode,
    noise: Option<&NoiseModel>,
    opts: &FitOptions,
) -> Result<FittedEstimate<T>> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let n = samples.len();
    if n < 3 {
        return Err(Error::InvalidConfig(format!("need at least 3 samples, got {n}")));
    }
    let noise = match (mode, noise) {
        (Mode::Direct, _) => &NoiseModel::Identity,
        (Mode::Deconvolve, Some(h)) => h,
        (Mode::Deconvolve, None) => return Err(Error::MissingNoiseModel),
    };
    let map = match opts.rescale {
        Rescale::Auto { margin } => RescaleMap::from_samples(samples, margin)?,
        Rescale::Fixed(m) => m,
    };
    let noise = rescale_noise(noise, &map)?;
    let u: Vec<f64> = samples.iter().map(|&x| map.forward(x)).collect();

    let hyper = hyperparams(n, mode, noise.nu(), opts)?;
    let depth = opts
        .depth
        .unwrap_or_else(|| BasisSpec::default_depth(n, hyper.j1));
    let spec = BasisSpec::new(hyper.j0, hyper.j1, depth)?;
    let table = build_band_table::<T>(&spec)?;
    let weights = deconvolution_weights(&table, &noise)?;
    let plan = FastTransform::new(&spec);

    let fourier = match mode {
        Mode::Direct => EmpiricalFourier::from_samples(&u, spec.fourier_len())?,
        Mode::Deconvolve => EmpiricalFourier::from_observations(&u, spec.fourier_len())?,
    };
    let empirical = plan.forward(&fourier, &weights)?;
    let tau = match opts.rule {
        ThresholdRule::Random => {
            let vt = estimate_variance_with(&plan, &u, &weights)?;
            random_threshold(&vt, &ThresholdParams::new(hyper.delta, n)?)
        }
        ThresholdRule::Level => level_threshold_table(&spec, hyper.delta, n),
    };
    let coeffs = hard_threshold(&empirical, &tau, hyper.j1);

    let grid = opts
        .grid
        .unwrap_or_else(|| DEFAULT_GRID.max(spec.grid_size()));
    let on_unit = plan.reconstruct(&coeffs, &table, grid)?;
    let jac = T::lit(map.jacobian());
    let scaled: Vec<T> = on_unit.into_iter().map(|v| v * jac).collect();
    let x = (0..grid)
        .map(|p| map.inverse(p as f64 / grid as f64))
        .collect();
    let density = postprocess(&scaled, map.scale() / grid as f64, opts.post)?;
    log::debug!(
        "fit: n = {n}, j0 = {}, j1 = {}, delta = {}, J = {depth}",
        hyper.j0,
        hyper.j1,
        hyper.delta
    );
    Ok(FittedEstimate {
        hyper,
        spec,
        map,
        noise,
        empirical,
        coeffs,
        x,
        density,
    })
}
