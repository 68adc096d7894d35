//! Periodized Meyer wavelet basis, built entirely on the Fourier side.
//!
//! The continuous Meyer scaling function and wavelet are band-limited, so the
//! Fourier coefficients of their periodized versions on `[0, 1]` are samples of
//! the continuous transforms at the integer frequencies:
//!
//! ```text
//! psi^{j,k}_l = 2^{-j/2} exp(-2 pi i l k / 2^j) psihat(2 pi l / 2^j)
//! ```
//!
//! Only the `k = 0` column of every level is stored. Any other translate is
//! recovered by the phase rule above, see [`Band::coefficient`].

use std::io::Write;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{unit_root, Real};

/// Smooth ramp `nu: [0, 1] -> [0, 1]` used in the transition bands.
///
/// Stored as cubic polynomial coefficients in increasing degree. The default is
/// `3 t^2 - 2 t^3`, the only cubic with `nu(0) = 0`, `nu(1) = 1` and
/// `nu(t) + nu(1 - t) = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxiliaryFunction {
    coeffs: [f64; 4],
}

impl Default for AuxiliaryFunction {
    fn default() -> Self {
        Self::cubic()
    }
}

impl AuxiliaryFunction {
    pub const fn cubic() -> Self {
        Self {
            coeffs: [0.0, 0.0, 3.0, -2.0],
        }
    }

    /// Accepts a cubic only if it satisfies the endpoint, symmetry and
    /// monotonicity conditions that orthonormality of the basis relies on.
    pub fn from_coeffs(coeffs: [f64; 4]) -> Result<Self> {
        let aux = Self { coeffs };
        let bad = |msg: &str| Err(Error::InvalidSpec(format!("auxiliary function: {msg}")));
        if aux.eval_f64(0.0).abs() > 1e-12 || (aux.eval_f64(1.0) - 1.0).abs() > 1e-12 {
            return bad("endpoints must map 0 -> 0 and 1 -> 1");
        }
        let mut prev = 0.0;
        for i in 0..=1000 {
            let t = i as f64 / 1000.0;
            let v = aux.eval_f64(t);
            if (v + aux.eval_f64(1.0 - t) - 1.0).abs() > 1e-12 {
                return bad("nu(t) + nu(1 - t) must equal 1");
            }
            if v < prev - 1e-12 {
                return bad("must be nondecreasing on [0, 1]");
            }
            prev = v;
        }
        Ok(aux)
    }

    pub fn coeffs(&self) -> [f64; 4] {
        self.coeffs
    }

    fn eval_f64(&self, t: f64) -> f64 {
        let [a, b, c, d] = self.coeffs;
        a + t * (b + t * (c + t * d))
    }

    /// Evaluates the ramp, clamping `t` to `[0, 1]`.
    pub fn eval<T: Real>(&self, t: T) -> T {
        let t = t.max(T::zero()).min(T::one());
        let [a, b, c, d] = self.coeffs.map(T::lit);
        a + t * (b + t * (c + t * d))
    }
}

/// `|phihat|` as a function of the cyclic frequency `s = |omega| / (2 pi)`.
fn scaling_profile<T: Real>(aux: &AuxiliaryFunction, s: T) -> T {
    let three = T::lit(3.0);
    let x = three * s.abs();
    if x <= T::one() {
        T::one()
    } else if x >= T::lit(2.0) {
        T::zero()
    } else {
        (T::FRAC_PI_2() * aux.eval(x - T::one())).cos()
    }
}

/// `|psihat|` as a function of the cyclic frequency `s = |omega| / (2 pi)`.
fn wavelet_profile<T: Real>(aux: &AuxiliaryFunction, s: T) -> T {
    let two = T::lit(2.0);
    let x = T::lit(3.0) * s.abs();
    if x <= T::one() || x >= T::lit(4.0) {
        T::zero()
    } else if x < two {
        (T::FRAC_PI_2() * aux.eval(x - T::one())).sin()
    } else {
        (T::FRAC_PI_2() * aux.eval(x / two - T::one())).cos()
    }
}

/// Fourier transform of the Meyer scaling function, `int phi(x) exp(-i omega x) dx`.
///
/// Real and even: 1 on `|omega| <= 2 pi / 3`, 0 beyond `4 pi / 3`.
pub fn meyer_scaling_ft<T: Real>(omega: T) -> T {
    scaling_profile(&AuxiliaryFunction::cubic(), omega / T::TAU())
}

/// Fourier transform of the Meyer wavelet, supported on `2 pi / 3 <= |omega| <= 8 pi / 3`,
/// carrying the phase `exp(i omega / 2)`.
pub fn meyer_wavelet_ft<T: Real>(omega: T) -> Complex<T> {
    let modulus = wavelet_profile(&AuxiliaryFunction::cubic(), omega / T::TAU());
    let half = omega / T::lit(2.0);
    Complex::new(half.cos(), half.sin()) * modulus
}

/// Resolution bookkeeping: coarse level `j0`, finest thresholded level `j1` and
/// transform depth `J`, with wavelet levels `j0..J`.
///
/// The nominal grid has `N = 2^J` points. The finest wavelet band reaches
/// `|l| < 2N / 3`, so empirical Fourier coefficients are taken on the doubled
/// range `l in (-N, N]`, see [`BasisSpec::fourier_len`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct BasisSpec {
    j0: u32,
    j1: u32,
    depth: u32,
}

impl BasisSpec {
    pub const MAX_DEPTH: u32 = 26;

    pub fn new(j0: u32, j1: u32, depth: u32) -> Result<Self> {
        if j0 > j1 {
            return Err(Error::InvalidSpec(format!("j0 = {j0} exceeds j1 = {j1}")));
        }
        if j1 >= depth {
            return Err(Error::InvalidSpec(format!(
                "j1 = {j1} must be below the depth J = {depth}"
            )));
        }
        if depth > Self::MAX_DEPTH {
            return Err(Error::InvalidSpec(format!(
                "depth J = {depth} exceeds {}",
                Self::MAX_DEPTH
            )));
        }
        Ok(Self { j0, j1, depth })
    }

    /// Default depth for a sample of size `n`: `J = max(8, ceil(log2 n))`,
    /// raised if needed so that `j1 < J`.
    pub fn default_depth(n: usize, j1: u32) -> u32 {
        let log = if n <= 1 {
            0
        } else {
            usize::BITS - (n - 1).leading_zeros()
        };
        log.max(8).max(j1 + 1)
    }

    /// Builds a spec with the default depth and checks `N >= n`.
    pub fn for_sample_size(n: usize, j0: u32, j1: u32) -> Result<Self> {
        let spec = Self::new(j0, j1, Self::default_depth(n, j1))?;
        spec.check_sample_size(n)?;
        Ok(spec)
    }

    pub fn check_sample_size(&self, n: usize) -> Result<()> {
        if self.grid_size() < n {
            return Err(Error::InvalidSpec(format!(
                "N = {} is smaller than the sample size {n}",
                self.grid_size()
            )));
        }
        Ok(())
    }

    pub fn j0(&self) -> u32 {
        self.j0
    }

    pub fn j1(&self) -> u32 {
        self.j1
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// `N = 2^J`.
    pub fn grid_size(&self) -> usize {
        1usize << self.depth
    }

    /// Length of the empirical Fourier table that covers every band: `2N`.
    pub fn fourier_len(&self) -> usize {
        2 * self.grid_size()
    }

    pub fn with_j1(&self, j1: u32) -> Result<Self> {
        Self::new(self.j0, j1, self.depth)
    }

    /// Wavelet levels `j0..J`.
    pub fn levels(&self) -> std::ops::Range<u32> {
        self.j0..self.depth
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandKind {
    Scaling,
    Wavelet,
}

/// One level of the table: the frequency set and the `k = 0` Fourier coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Band<T> {
    pub(crate) level: u32,
    pub(crate) kind: BandKind,
    pub(crate) freqs: Vec<i64>,
    pub(crate) values: Vec<Complex<T>>,
}

impl<T: Real> Band<T> {
    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn kind(&self) -> BandKind {
        self.kind
    }

    pub fn freqs(&self) -> &[i64] {
        &self.freqs
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    /// Number of translates at this level, `2^j`.
    pub fn period(&self) -> usize {
        1usize << self.level
    }

    pub fn max_abs_freq(&self) -> i64 {
        self.freqs.iter().map(|l| l.abs()).max().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, Complex<T>)> + '_ {
        self.freqs.iter().copied().zip(self.values.iter().copied())
    }

    /// Fourier coefficient of the translate `k` at the `idx`-th band frequency.
    pub fn coefficient(&self, idx: usize, k: usize) -> Complex<T> {
        let l = self.freqs[idx];
        self.values[idx] * unit_root::<T>(-l * k as i64, self.period() as i64)
    }

    /// Replaces the stored values, keeping the frequency set.
    pub(crate) fn map_values(&self, values: Vec<Complex<T>>) -> Self {
        debug_assert_eq!(values.len(), self.freqs.len());
        Self {
            level: self.level,
            kind: self.kind,
            freqs: self.freqs.clone(),
            values,
        }
    }
}

/// Scaling band at `j0` plus one wavelet band for each level `j0..J`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandTable<T> {
    spec: BasisSpec,
    scaling: Band<T>,
    wavelets: Vec<Band<T>>,
}

impl<T: Real> BandTable<T> {
    pub(crate) fn from_parts(spec: BasisSpec, scaling: Band<T>, wavelets: Vec<Band<T>>) -> Self {
        Self {
            spec,
            scaling,
            wavelets,
        }
    }

    pub fn spec(&self) -> &BasisSpec {
        &self.spec
    }

    pub fn scaling(&self) -> &Band<T> {
        &self.scaling
    }

    pub fn wavelets(&self) -> &[Band<T>] {
        &self.wavelets
    }

    /// Wavelet band at level `j`, if `j0 <= j < J`.
    pub fn wavelet(&self, j: u32) -> Option<&Band<T>> {
        j.checked_sub(self.spec.j0)
            .and_then(|i| self.wavelets.get(i as usize))
    }

    /// Largest `|l|` over all bands.
    pub fn max_freq(&self) -> i64 {
        self.wavelets
            .iter()
            .map(Band::max_abs_freq)
            .chain(std::iter::once(self.scaling.max_abs_freq()))
            .max()
            .unwrap_or(0)
    }

    /// Writes `level,l,re,im` rows, optionally restricted to one wavelet level.
    /// The scaling band is written with kind `phi`, wavelet bands with `psi`.
    pub fn write_csv<W: Write + ?Sized>(&self, out: &mut W, level: Option<u32>) -> std::io::Result<()> {
        writeln!(out, "kind,level,l,re,im")?;
        let bands = std::iter::once(&self.scaling).chain(self.wavelets.iter());
        for band in bands {
            let keep = match level {
                Some(j) => band.level == j,
                None => true,
            };
            if !keep {
                continue;
            }
            let tag = match band.kind {
                BandKind::Scaling => "phi",
                BandKind::Wavelet => "psi",
            };
            for (l, v) in band.iter() {
                writeln!(
                    out,
                    "{tag},{},{l},{:.16e},{:.16e}",
                    band.level,
                    v.re.to_f64_lossy(),
                    v.im.to_f64_lossy()
                )?;
            }
        }
        Ok(())
    }
}

/// Integer frequencies where the level-`j` periodized wavelet is nonzero:
/// `2^j < 3|l| < 2^{j+2}`.
pub fn wavelet_band_freqs(j: u32) -> Vec<i64> {
    let lo = 1i64 << j;
    let hi = 1i64 << (j + 2);
    let mut pos: Vec<i64> = (1..=hi / 3 + 1).filter(|&l| 3 * l > lo && 3 * l < hi).collect();
    let mut out: Vec<i64> = pos.iter().rev().map(|&l| -l).collect();
    out.append(&mut pos);
    out
}

/// Integer frequencies where the level-`j` periodized scaling function is nonzero:
/// `3|l| < 2^{j+1}`.
pub fn scaling_band_freqs(j: u32) -> Vec<i64> {
    let hi = 1i64 << (j + 1);
    let m = (hi - 1) / 3;
    (-m..=m).collect()
}

fn tabulate_wavelet<T: Real>(aux: &AuxiliaryFunction, j: u32) -> Band<T> {
    let freqs = wavelet_band_freqs(j);
    let period = 1i64 << j;
    let norm = T::lit(2f64.powf(-(j as f64) / 2.0));
    let values = freqs
        .iter()
        .map(|&l| {
            let s = T::lit(l as f64) / T::lit(period as f64);
            // exp(i omega / 2) with omega = 2 pi l / 2^j
            let phase = unit_root::<T>(l, 2 * period);
            phase * (wavelet_profile(aux, s) * norm)
        })
        .collect();
    Band {
        level: j,
        kind: BandKind::Wavelet,
        freqs,
        values,
    }
}

fn tabulate_scaling<T: Real>(aux: &AuxiliaryFunction, j: u32) -> Band<T> {
    let freqs = scaling_band_freqs(j);
    let period = 1i64 << j;
    let norm = T::lit(2f64.powf(-(j as f64) / 2.0));
    let values = freqs
        .iter()
        .map(|&l| {
            let s = T::lit(l as f64) / T::lit(period as f64);
            Complex::new(scaling_profile(aux, s) * norm, T::zero())
        })
        .collect();
    Band {
        level: j,
        kind: BandKind::Scaling,
        freqs,
        values,
    }
}

/// Tabulates the periodized Meyer basis for `spec`.
///
/// Fails if any band would leave the Fourier range `(-N, N]` of the spec.
pub fn build_band_table<T: Real>(spec: &BasisSpec) -> Result<BandTable<T>> {
    build_band_table_with(spec, &AuxiliaryFunction::cubic())
}

pub fn build_band_table_with<T: Real>(
    spec: &BasisSpec,
    aux: &AuxiliaryFunction,
) -> Result<BandTable<T>> {
    let limit = spec.grid_size() as i64;
    let scaling = tabulate_scaling(aux, spec.j0);
    let wavelets: Vec<Band<T>> = spec.levels().map(|j| tabulate_wavelet(aux, j)).collect();
    for band in std::iter::once(&scaling).chain(wavelets.iter()) {
        if let Some(&l) = band.freqs.iter().find(|&&l| l <= -limit || l > limit) {
            return Err(Error::BandOutsideGrid {
                level: band.level,
                freq: l,
                limit,
            });
        }
    }
    Ok(BandTable::from_parts(*spec, scaling, wavelets))
}
