//! Empirical Fourier coefficients of samples and the noise model used for
//! deconvolution.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use rand::Rng;

use crate::error::{Error, Result};
use crate::meyer::{Band, BandTable};
use crate::scalar::{phasor_powers, Real};

/// Default lower bound on `|h_l|` before dividing by it.
pub const DEFAULT_H_FLOOR: f64 = 1e-12;

/// Fourier coefficients `(1/n) sum_m exp(-2 pi i l X_m)` for `l in (-L/2, L/2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalFourier<T> {
    sample_size: Option<usize>,
    half: usize,
    values: Vec<Complex<T>>,
}

impl<T: Real> EmpiricalFourier<T> {
    /// Coefficients of samples that must already lie in `[0, 1]`.
    pub fn from_samples(samples: &[f64], len: usize) -> Result<Self> {
        for (index, &value) in samples.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFiniteSample { index });
            }
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::SampleOutOfRange { index, value });
            }
        }
        Self::from_observations(samples, len)
    }

    /// Coefficients of arbitrary real observations. Noisy samples `Y = X + e`
    /// may leave `[0, 1]`; integer frequencies make the periodization implicit.
    pub fn from_observations(samples: &[f64], len: usize) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySamples);
        }
        check_len(len)?;
        if let Some(index) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample { index });
        }
        let half = len / 2;
        let mut acc = vec![Complex::new(T::zero(), T::zero()); half + 1];
        let mut powers = Vec::with_capacity(half + 1);
        for &x in samples {
            phasor_powers::<T>(x, half, &mut powers);
            for (a, p) in acc.iter_mut().zip(&powers) {
                *a = *a + *p;
            }
        }
        let inv_n = T::one() / T::lit(samples.len() as f64);
        let positive: Vec<Complex<T>> = acc.into_iter().map(|a| a * inv_n).collect();
        let mut out = Self::assemble(half, &positive);
        out.sample_size = Some(samples.len());
        Ok(out)
    }

    /// Table from exact coefficients `f(l)` for `l >= 0`; negative frequencies
    /// are filled by conjugate symmetry.
    pub fn from_fn(len: usize, mut f: impl FnMut(i64) -> Complex<T>) -> Result<Self> {
        check_len(len)?;
        let half = len / 2;
        let positive: Vec<Complex<T>> = (0..=half as i64).map(&mut f).collect();
        Ok(Self::assemble(half, &positive))
    }

    /// Table from arbitrary values on `l in (-L/2, L/2]`, in increasing `l`.
    pub fn from_values(values: Vec<Complex<T>>) -> Result<Self> {
        check_len(values.len())?;
        Ok(Self {
            sample_size: None,
            half: values.len() / 2,
            values,
        })
    }

    fn assemble(half: usize, positive: &[Complex<T>]) -> Self {
        let mut values = Vec::with_capacity(2 * half);
        for l in (1..half).rev() {
            values.push(positive[l].conj());
        }
        values.extend_from_slice(positive);
        Self {
            sample_size: None,
            half,
            values,
        }
    }

    /// `n` for tables built from samples, `None` for exact tables.
    pub fn sample_size(&self) -> Option<usize> {
        self.sample_size
    }

    /// Table length `L`.
    pub fn len(&self) -> usize {
        2 * self.half
    }

    pub fn is_empty(&self) -> bool {
        self.half == 0
    }

    pub fn max_freq(&self) -> i64 {
        self.half as i64
    }

    pub fn contains(&self, l: i64) -> bool {
        l > -(self.half as i64) && l <= self.half as i64
    }

    pub fn get(&self, l: i64) -> Option<Complex<T>> {
        if self.contains(l) {
            Some(self.values[(l + self.half as i64 - 1) as usize])
        } else {
            None
        }
    }

    /// Panics when `l` is outside the table.
    pub fn at(&self, l: i64) -> Complex<T> {
        self.get(l)
            .unwrap_or_else(|| panic!("frequency {l} outside the Fourier table"))
    }

    /// Values in increasing `l`, starting at `l = -L/2 + 1`.
    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, Complex<T>)> + '_ {
        let start = 1 - self.half as i64;
        self.values
            .iter()
            .enumerate()
            .map(move |(i, v)| (start + i as i64, *v))
    }

    /// Linear combination `a * self + b * other` on identical grids.
    pub fn combine(&self, a: T, other: &Self, b: T) -> Self {
        assert_eq!(self.half, other.half, "Fourier tables of different length");
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| *x * a + *y * b)
            .collect();
        Self {
            sample_size: None,
            half: self.half,
            values,
        }
    }
}

fn check_len(len: usize) -> Result<()> {
    if len < 2 || !len.is_power_of_two() {
        return Err(Error::NotPowerOfTwo {
            what: "Fourier table length",
            value: len,
        });
    }
    Ok(())
}

/// Direct-sum alias used by the CLI and tests: samples in `[0, 1]`, table length `len`.
pub fn empirical_fourier<T: Real>(samples: &[f64], len: usize) -> Result<EmpiricalFourier<T>> {
    EmpiricalFourier::from_samples(samples, len)
}

type FourierFn = Arc<dyn Fn(i64) -> Complex<f64> + Send + Sync>;

/// Error density, described by its Fourier coefficients.
#[derive(Clone)]
pub enum NoiseModel {
    Identity,
    /// Laplace errors with standard deviation `sigma`:
    /// `h(x) = exp(-sqrt(2)|x| / sigma) / (sqrt(2) sigma)`.
    Laplace { sigma: f64 },
    /// User supplied `h_l` and declared degree of ill-posedness.
    Custom { fourier: FourierFn, nu: f64 },
}

impl fmt::Debug for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseModel::Identity => write!(f, "Identity"),
            NoiseModel::Laplace { sigma } => write!(f, "Laplace {{ sigma: {sigma} }}"),
            NoiseModel::Custom { nu, .. } => write!(f, "Custom {{ nu: {nu} }}"),
        }
    }
}

impl NoiseModel {
    pub fn laplace(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "noise standard deviation must be positive, got {sigma}"
            )));
        }
        Ok(NoiseModel::Laplace { sigma })
    }

    pub fn custom(nu: f64, fourier: impl Fn(i64) -> Complex<f64> + Send + Sync + 'static) -> Self {
        NoiseModel::Custom {
            fourier: Arc::new(fourier),
            nu,
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, NoiseModel::Identity)
    }

    /// `h_l = E exp(-2 pi i l e)`.
    pub fn fourier(&self, l: i64) -> Complex<f64> {
        match self {
            NoiseModel::Identity => Complex::new(1.0, 0.0),
            NoiseModel::Laplace { sigma } => {
                let pl = std::f64::consts::PI * l as f64;
                Complex::new(1.0 / (1.0 + 2.0 * sigma * sigma * pl * pl), 0.0)
            }
            NoiseModel::Custom { fourier, .. } => fourier(l),
        }
    }

    /// Degree of ill-posedness.
    pub fn nu(&self) -> f64 {
        match self {
            NoiseModel::Identity => 0.0,
            NoiseModel::Laplace { .. } => 2.0,
            NoiseModel::Custom { nu, .. } => *nu,
        }
    }

    /// Draws one error. `None` for custom models, which carry no sampler.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<f64> {
        match self {
            NoiseModel::Identity => Some(0.0),
            NoiseModel::Laplace { sigma } => {
                let scale = sigma / std::f64::consts::SQRT_2;
                let u: f64 = rng.gen::<f64>() - 0.5;
                Some(-scale * u.signum() * (1.0 - 2.0 * u.abs()).ln())
            }
            NoiseModel::Custom { .. } => None,
        }
    }

    /// Empirical `(min, max)` of `|h_l| |l|^nu` over `1 <= |l| <= max_freq`,
    /// i.e. the constants of the ordinary smooth sandwich on that range.
    pub fn sandwich_constants(&self, max_freq: i64) -> (f64, f64) {
        let nu = self.nu();
        (1..=max_freq)
            .flat_map(|l| [l, -l])
            .map(|l| self.fourier(l).norm() * (l.abs() as f64).powf(nu))
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }
}

/// Table of deconvolution weights `psi_l / h_l`; same layout as the basis table.
pub type WeightTable<T> = BandTable<T>;

fn weight_band<T: Real>(band: &Band<T>, noise: &NoiseModel, floor: f64) -> Result<Band<T>> {
    let mut values = Vec::with_capacity(band.len());
    for (l, v) in band.iter() {
        let h = noise.fourier(l);
        let modulus = h.norm();
        if !(modulus >= floor) {
            return Err(Error::IllPosedBand {
                level: band.level(),
                freq: l,
                modulus,
                floor,
            });
        }
        let h = Complex::new(T::lit(h.re), T::lit(h.im));
        values.push(v / h);
    }
    Ok(band.map_values(values))
}

/// Divides every band entry by `h_l`. Identity noise returns the table unchanged.
pub fn deconvolution_weights<T: Real>(
    table: &BandTable<T>,
    noise: &NoiseModel,
) -> Result<WeightTable<T>> {
    deconvolution_weights_with_floor(table, noise, DEFAULT_H_FLOOR)
}

pub fn deconvolution_weights_with_floor<T: Real>(
    table: &BandTable<T>,
    noise: &NoiseModel,
    floor: f64,
) -> Result<WeightTable<T>> {
    if noise.is_identity() {
        return Ok(table.clone());
    }
    let scaling = weight_band(table.scaling(), noise, floor)?;
    let wavelets = table
        .wavelets()
        .iter()
        .map(|b| weight_band(b, noise, floor))
        .collect::<Result<Vec<_>>>()?;
    Ok(BandTable::from_parts(*table.spec(), scaling, wavelets))
}

/// `eta_j = sum_{l in C_j} |w_l|`; the same for every translate `k`.
pub fn eta<T: Real>(band: &Band<T>) -> T {
    band.values().iter().map(|v| v.norm()).sum()
}
