//! Forward coefficient estimation from Fourier tables and grid reconstruction.
//!
//! With `w_l` the `k = 0` weights of a level (basis values, or basis values
//! divided by `h_l` when deconvolving), every coefficient of the level is
//!
//! ```text
//! beta_k = sum_{l in C_j} conj(w_l) exp(2 pi i l k / 2^j) fhat_l
//! ```
//!
//! [`forward_reference`] evaluates that sum term by term. [`FastTransform`]
//! folds the band modulo `2^j` and applies one inverse DFT of length `2^j` per
//! level, which costs `O(N log N)` over all levels.

use std::sync::{Arc, OnceLock};

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::meyer::{Band, BandTable, BasisSpec};
use crate::scalar::{unit_root, Real};
use crate::spectral::{EmpiricalFourier, WeightTable};

/// Scaling coefficients at `j0` and wavelet coefficients for levels `j0..J`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffSet<T> {
    spec: BasisSpec,
    scaling: Vec<T>,
    wavelets: Vec<Vec<T>>,
}

impl<T: Real> CoeffSet<T> {
    pub fn zeros(spec: BasisSpec) -> Self {
        Self {
            spec,
            scaling: vec![T::zero(); 1 << spec.j0()],
            wavelets: spec.levels().map(|j| vec![T::zero(); 1 << j]).collect(),
        }
    }

    pub fn from_parts(spec: BasisSpec, scaling: Vec<T>, wavelets: Vec<Vec<T>>) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if scaling.len() != 1 << spec.j0() {
            return bad(format!(
                "expected {} scaling coefficients, got {}",
                1 << spec.j0(),
                scaling.len()
            ));
        }
        if wavelets.len() != spec.levels().len() {
            return bad(format!(
                "expected {} wavelet levels, got {}",
                spec.levels().len(),
                wavelets.len()
            ));
        }
        for (j, level) in spec.levels().zip(&wavelets) {
            if level.len() != 1 << j {
                return bad(format!("level {j}: expected {} coefficients", 1 << j));
            }
        }
        Ok(Self {
            spec,
            scaling,
            wavelets,
        })
    }

    pub fn spec(&self) -> &BasisSpec {
        &self.spec
    }

    pub fn scaling(&self) -> &[T] {
        &self.scaling
    }

    pub fn scaling_mut(&mut self) -> &mut [T] {
        &mut self.scaling
    }

    /// Coefficients of level `j`; panics outside `j0..J`.
    pub fn wavelet(&self, j: u32) -> &[T] {
        &self.wavelets[(j - self.spec.j0()) as usize]
    }

    pub fn wavelet_mut(&mut self, j: u32) -> &mut [T] {
        let i = (j - self.spec.j0()) as usize;
        &mut self.wavelets[i]
    }

    /// `(j, coefficients)` for every wavelet level.
    pub fn levels(&self) -> impl Iterator<Item = (u32, &[T])> + '_ {
        self.spec
            .levels()
            .zip(self.wavelets.iter().map(|v| v.as_slice()))
    }

    /// All coefficients, scaling first, then wavelet levels in order.
    pub fn iter_all(&self) -> impl Iterator<Item = T> + '_ {
        self.scaling
            .iter()
            .chain(self.wavelets.iter().flatten())
            .copied()
    }

    /// Sum of squared coefficient differences.
    pub fn squared_distance(&self, other: &Self) -> T {
        assert_eq!(self.spec, other.spec, "coefficient sets on different specs");
        self.iter_all()
            .zip(other.iter_all())
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

fn check_coverage<T: Real>(fourier: &EmpiricalFourier<T>, weights: &WeightTable<T>) -> Result<()> {
    let bands = std::iter::once(weights.scaling()).chain(weights.wavelets().iter());
    for band in bands {
        if let Some(&l) = band.freqs().iter().find(|&&l| !fourier.contains(l)) {
            return Err(Error::BandOutsideGrid {
                level: band.level(),
                freq: l,
                limit: fourier.max_freq(),
            });
        }
    }
    Ok(())
}

pub(crate) fn take_real<T: Real>(level: u32, k: usize, z: Complex<T>) -> Result<T> {
    let tol = T::lit(T::RESIDUE_TOL) * (T::one() + z.re.abs());
    if z.im.abs() > tol || !z.re.is_finite() {
        return Err(Error::ImaginaryResidue {
            level,
            k,
            real: z.re.to_f64_lossy(),
            imag: z.im.to_f64_lossy(),
        });
    }
    Ok(z.re)
}

fn reference_band<T: Real>(band: &Band<T>, fourier: &EmpiricalFourier<T>) -> Result<Vec<T>> {
    let m = band.period() as i64;
    (0..band.period())
        .map(|k| {
            let z: Complex<T> = band
                .iter()
                .map(|(l, w)| w.conj() * unit_root::<T>(l * k as i64, m) * fourier.at(l))
                .sum();
            take_real(band.level(), k, z)
        })
        .collect()
}

/// Coefficients by direct summation over every `(j, k)` and band frequency.
pub fn forward_reference<T: Real>(
    fourier: &EmpiricalFourier<T>,
    weights: &WeightTable<T>,
) -> Result<CoeffSet<T>> {
    check_coverage(fourier, weights)?;
    let scaling = reference_band(weights.scaling(), fourier)?;
    let wavelets = weights
        .wavelets()
        .iter()
        .map(|b| reference_band(b, fourier))
        .collect::<Result<Vec<_>>>()?;
    CoeffSet::from_parts(*weights.spec(), scaling, wavelets)
}

/// Per-level FFT plans for one basis spec, reusable across many transforms.
#[derive(Clone)]
pub struct FastTransform<T: Real> {
    spec: BasisSpec,
    // indexed by level 0..J, planned on first use
    inverse: OnceLock<Vec<Arc<dyn Fft<T>>>>,
    forward: OnceLock<Vec<Arc<dyn Fft<T>>>>,
}

impl<T: Real> std::fmt::Debug for FastTransform<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FastTransform")
            .field("spec", &self.spec)
            .finish()
    }
}

impl<T: Real> FastTransform<T> {
    pub fn new(spec: &BasisSpec) -> Self {
        Self {
            spec: *spec,
            inverse: OnceLock::new(),
            forward: OnceLock::new(),
        }
    }

    fn plans(&self, inverse: bool) -> &[Arc<dyn Fft<T>>] {
        let (cell, dir) = if inverse {
            (&self.inverse, rustfft::FftDirection::Inverse)
        } else {
            (&self.forward, rustfft::FftDirection::Forward)
        };
        cell.get_or_init(|| {
            let mut planner = FftPlanner::new();
            (0..self.spec.depth()).map(|j| planner.plan_fft(1 << j, dir)).collect()
        })
    }

    pub fn spec(&self) -> &BasisSpec {
        &self.spec
    }

    /// Folds `conj(w_l) * g(l)` modulo `2^j` into `buf`.
    fn fold_into(band: &Band<T>, buf: &mut Vec<Complex<T>>, mut g: impl FnMut(usize, i64) -> Complex<T>) {
        let m = band.period();
        buf.clear();
        buf.resize(m, Complex::new(T::zero(), T::zero()));
        for (i, (l, w)) in band.iter().enumerate() {
            let r = l.rem_euclid(m as i64) as usize;
            buf[r] = buf[r] + w.conj() * g(i, l);
        }
    }

    /// `out[k] = sum_l conj(w_l) exp(2 pi i l k / 2^j) g(l)` for all `k`, complex.
    pub(crate) fn level_sums(
        &self,
        band: &Band<T>,
        buf: &mut Vec<Complex<T>>,
        g: impl FnMut(usize, i64) -> Complex<T>,
    ) {
        Self::fold_into(band, buf, g);
        self.plans(true)[band.level() as usize].process(buf);
    }

    fn band(&self, band: &Band<T>, fourier: &EmpiricalFourier<T>) -> Result<Vec<T>> {
        let mut buf = Vec::with_capacity(band.period());
        self.level_sums(band, &mut buf, |_, l| fourier.at(l));
        buf.iter()
            .enumerate()
            .map(|(k, z)| take_real(band.level(), k, *z))
            .collect()
    }

    pub fn forward(
        &self,
        fourier: &EmpiricalFourier<T>,
        weights: &WeightTable<T>,
    ) -> Result<CoeffSet<T>> {
        assert_eq!(&self.spec, weights.spec(), "plan and weights disagree on the spec");
        check_coverage(fourier, weights)?;
        let scaling = self.band(weights.scaling(), fourier)?;
        let wavelets = weights
            .wavelets()
            .iter()
            .map(|b| self.band(b, fourier))
            .collect::<Result<Vec<_>>>()?;
        CoeffSet::from_parts(self.spec, scaling, wavelets)
    }

    /// Fourier coefficients `ghat_l` of the expansion, accumulated modulo `len`.
    pub fn synthesize_spectrum(
        &self,
        coeffs: &CoeffSet<T>,
        table: &BandTable<T>,
        len: usize,
    ) -> Vec<Complex<T>> {
        assert_eq!(coeffs.spec(), table.spec(), "coefficients and table disagree on the spec");
        let mut spectrum = vec![Complex::new(T::zero(), T::zero()); len];
        let mut buf = Vec::new();
        let plans = self.plans(false);
        let mut add = |band: &Band<T>, c: &[T]| {
            buf.clear();
            buf.extend(c.iter().map(|&v| Complex::new(v, T::zero())));
            plans[band.level() as usize].process(&mut buf);
            let m = band.period() as i64;
            for (l, w) in band.iter() {
                let idx = l.rem_euclid(len as i64) as usize;
                spectrum[idx] = spectrum[idx] + w * buf[l.rem_euclid(m) as usize];
            }
        };
        add(table.scaling(), coeffs.scaling());
        for (band, (_, c)) in table.wavelets().iter().zip(coeffs.levels()) {
            add(band, c);
        }
        spectrum
    }

    /// Evaluates the expansion on `{0, 1/G, ..., (G-1)/G}`.
    pub fn reconstruct(
        &self,
        coeffs: &CoeffSet<T>,
        table: &BandTable<T>,
        grid: usize,
    ) -> Result<Vec<T>> {
        if !grid.is_power_of_two() {
            return Err(Error::NotPowerOfTwo {
                what: "grid size",
                value: grid,
            });
        }
        if grid < self.spec.grid_size() {
            return Err(Error::GridTooSmall {
                grid,
                required: self.spec.grid_size(),
            });
        }
        let mut spectrum = self.synthesize_spectrum(coeffs, table, grid);
        let scale: T = spectrum.iter().map(|z| z.norm()).sum();
        FftPlanner::new().plan_fft_inverse(grid).process(&mut spectrum);
        let tol = T::lit(T::RESIDUE_TOL) * (T::one() + scale);
        spectrum
            .iter()
            .enumerate()
            .map(|(p, z)| {
                if z.im.abs() > tol {
                    Err(Error::ImaginaryResidue {
                        level: self.spec.depth(),
                        k: p,
                        real: z.re.to_f64_lossy(),
                        imag: z.im.to_f64_lossy(),
                    })
                } else {
                    Ok(z.re)
                }
            })
            .collect()
    }
}

/// One-shot fast forward transform.
pub fn forward_fast<T: Real>(
    fourier: &EmpiricalFourier<T>,
    weights: &WeightTable<T>,
) -> Result<CoeffSet<T>> {
    FastTransform::new(weights.spec()).forward(fourier, weights)
}

/// One-shot reconstruction on a grid of `grid` points.
pub fn reconstruct<T: Real>(
    coeffs: &CoeffSet<T>,
    table: &BandTable<T>,
    grid: usize,
) -> Result<Vec<T>> {
    FastTransform::new(table.spec()).reconstruct(coeffs, table, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meyer::build_band_table;
    use crate::spectral::empirical_fourier;

    fn setup(j0: u32, depth: u32) -> (BasisSpec, BandTable<f64>) {
        let spec = BasisSpec::new(j0, j0, depth).unwrap();
        (spec, build_band_table(&spec).unwrap())
    }

    fn uniform_table(spec: &BasisSpec) -> EmpiricalFourier<f64> {
        EmpiricalFourier::from_fn(spec.fourier_len(), |l| {
            Complex::new(if l == 0 { 1.0 } else { 0.0 }, 0.0)
        })
        .unwrap()
    }

    #[test]
    fn constant_density_coefficients() {
        let (spec, table) = setup(3, 8);
        let f = uniform_table(&spec);
        for c in [forward_reference(&f, &table).unwrap(), forward_fast(&f, &table).unwrap()] {
            for &v in c.scaling() {
                assert!((v - 2f64.powf(-1.5)).abs() < 1e-15);
            }
            for (_, level) in c.levels() {
                assert!(level.iter().all(|v| *v == 0.0));
            }
        }
    }

    #[test]
    fn constant_reconstructs_to_one() {
        let (spec, table) = setup(3, 8);
        let c = forward_fast(&uniform_table(&spec), &table).unwrap();
        let g = reconstruct(&c, &table, 512).unwrap();
        assert!(g.iter().all(|v| (v - 1.0).abs() < 1e-9));
    }

    #[test]
    fn grid_checks() {
        let (spec, table) = setup(3, 8);
        let c = CoeffSet::zeros(spec);
        assert!(matches!(
            reconstruct(&c, &table, 128),
            Err(Error::GridTooSmall { .. })
        ));
        assert!(matches!(
            reconstruct(&c, &table, 300),
            Err(Error::NotPowerOfTwo { .. })
        ));
    }

    #[test]
    fn short_fourier_table_is_rejected() {
        let (_, table) = setup(3, 8);
        let f: EmpiricalFourier<f64> = empirical_fourier(&[0.3, 0.6], 256).unwrap();
        assert!(matches!(
            forward_fast(&f, &table),
            Err(Error::BandOutsideGrid { level: 7, .. })
        ));
    }

    #[test]
    fn thresholded_reconstruction_keeps_negative_lobes() {
        let (spec, table) = setup(3, 8);
        let f: EmpiricalFourier<f64> =
            empirical_fourier(&[0.5, 0.51, 0.49, 0.5], spec.fourier_len()).unwrap();
        let mut c = forward_fast(&f, &table).unwrap();
        c.scaling_mut().iter_mut().for_each(|v| *v = 0.0);
        let g = reconstruct(&c, &table, 512).unwrap();
        assert!(g.iter().any(|v| *v < -1e-3));
    }

    #[test]
    fn coeffset_shape_is_validated() {
        let spec = BasisSpec::new(2, 3, 5).unwrap();
        assert!(CoeffSet::<f64>::from_parts(spec, vec![0.0; 3], vec![]).is_err());
        let ok = CoeffSet::<f64>::from_parts(
            spec,
            vec![0.0; 4],
            vec![vec![0.0; 4], vec![0.0; 8], vec![0.0; 16]],
        );
        assert!(ok.is_ok());
    }

    #[test]
    fn f32_transform_agrees_with_f64() {
        let spec = BasisSpec::new(3, 4, 8).unwrap();
        let t32: BandTable<f32> = build_band_table(&spec).unwrap();
        let t64: BandTable<f64> = build_band_table(&spec).unwrap();
        let xs = [0.21, 0.4, 0.43, 0.5, 0.77];
        let f32t: EmpiricalFourier<f32> = empirical_fourier(&xs, spec.fourier_len()).unwrap();
        let f64t: EmpiricalFourier<f64> = empirical_fourier(&xs, spec.fourier_len()).unwrap();
        let a = forward_fast(&f32t, &t32).unwrap();
        let b = forward_fast(&f64t, &t64).unwrap();
        for (x, y) in a.iter_all().zip(b.iter_all()) {
            assert!((x as f64 - y).abs() < 1e-4);
        }
    }
}
