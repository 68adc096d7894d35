//! Variance estimation, random thresholds, hard thresholding and the
//! hyperparameter rules for `j0`, `j1` and `delta`.
//!
//! `ln` is the natural logarithm everywhere except inside the hyperparameter
//! formulas, which use `log2` explicitly.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::meyer::BasisSpec;
use crate::scalar::{phasor_powers, Real};
use crate::spectral::{eta, EmpiricalFourier, WeightTable};
use crate::transform::{CoeffSet, FastTransform};

/// `kappa = 4/3 + sqrt(5/3)` in the random threshold.
pub const KAPPA: f64 = 4.0 / 3.0 + 1.290_994_448_735_805_6;

/// Estimated variance bounds for every wavelet coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceTable<T> {
    spec: BasisSpec,
    n: usize,
    vhat: Vec<Vec<T>>,
    sigma2hat: Vec<Vec<T>>,
    eta: Vec<T>,
}

impl<T: Real> VarianceTable<T> {
    pub fn spec(&self) -> &BasisSpec {
        &self.spec
    }

    pub fn sample_size(&self) -> usize {
        self.n
    }

    /// `Vhat_{j,k}` for level `j`.
    pub fn vhat(&self, j: u32) -> &[T] {
        &self.vhat[(j - self.spec.j0()) as usize]
    }

    /// `sigma2hat_{j,k} = Vhat_{j,k} - |betahat_{j,k}|^2 / n`, floored at zero.
    pub fn sigma2hat(&self, j: u32) -> &[T] {
        &self.sigma2hat[(j - self.spec.j0()) as usize]
    }

    pub fn eta(&self, j: u32) -> T {
        self.eta[(j - self.spec.j0()) as usize]
    }
}

/// Computes `Vhat_{j,k} = (1/n^2) sum_m |g_{j,k}(Y_m)|^2`, where
/// `g_{j,k}(y) = sum_l conj(w^{j,k}_l) exp(-2 pi i l y)` is the per-sample
/// contribution to `betahat_{j,k}`.
///
/// For each sample the values `g_{j,k}(Y_m)` of a whole level come from one
/// folded inverse DFT, exactly as in the fast forward transform.
pub fn estimate_variance<T: Real>(
    samples: &[f64],
    weights: &WeightTable<T>,
) -> Result<VarianceTable<T>> {
    estimate_variance_with(&FastTransform::new(weights.spec()), samples, weights)
}

pub fn estimate_variance_with<T: Real>(
    plan: &FastTransform<T>,
    samples: &[f64],
    weights: &WeightTable<T>,
) -> Result<VarianceTable<T>> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if let Some(index) = samples.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteSample { index });
    }
    let spec = *weights.spec();
    let max_freq = weights.max_freq() as usize;
    let zero = Complex::new(T::zero(), T::zero());
    let mut sq: Vec<Vec<T>> = weights
        .wavelets()
        .iter()
        .map(|b| vec![T::zero(); b.period()])
        .collect();
    let mut sums: Vec<Vec<Complex<T>>> = weights
        .wavelets()
        .iter()
        .map(|b| vec![zero; b.period()])
        .collect();
    let mut powers = Vec::with_capacity(max_freq + 1);
    let mut buf = Vec::new();
    for &y in samples {
        phasor_powers::<T>(y, max_freq, &mut powers);
        for (i, band) in weights.wavelets().iter().enumerate() {
            plan.level_sums(band, &mut buf, |_, l| {
                let p = powers[l.unsigned_abs() as usize];
                if l < 0 {
                    p.conj()
                } else {
                    p
                }
            });
            for (k, g) in buf.iter().enumerate() {
                sq[i][k] = sq[i][k] + g.norm_sqr();
                sums[i][k] = sums[i][k] + *g;
            }
        }
    }
    let n = T::lit(samples.len() as f64);
    let mut vhat = Vec::with_capacity(sq.len());
    let mut sigma2hat = Vec::with_capacity(sq.len());
    for (level_sq, level_sum) in sq.into_iter().zip(sums) {
        let v: Vec<T> = level_sq.into_iter().map(|s| s / (n * n)).collect();
        let s2: Vec<T> = v
            .iter()
            .zip(&level_sum)
            .map(|(&vk, sk)| {
                let beta = *sk / n;
                (vk - beta.norm_sqr() / n).max(T::zero())
            })
            .collect();
        vhat.push(v);
        sigma2hat.push(s2);
    }
    let eta = weights.wavelets().iter().map(eta).collect();
    Ok(VarianceTable {
        spec,
        n: samples.len(),
        vhat,
        sigma2hat,
        eta,
    })
}

/// Reference evaluation of `Vhat` through the double sum
/// `(1/n) sum_{l,l'} conj(w_l) w_l' fhat_{l - l'}`.
pub fn estimate_variance_double_sum<T: Real>(
    samples: &[f64],
    weights: &WeightTable<T>,
) -> Result<Vec<Vec<T>>> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let span = (2 * weights.max_freq() + 1) as usize;
    let len = (2 * span).next_power_of_two();
    let diff: EmpiricalFourier<T> = EmpiricalFourier::from_observations(samples, len)?;
    let n = T::lit(samples.len() as f64);
    weights
        .wavelets()
        .iter()
        .map(|band| {
            (0..band.period())
                .map(|k| {
                    let w: Vec<Complex<T>> =
                        (0..band.len()).map(|i| band.coefficient(i, k)).collect();
                    let mut acc = Complex::new(T::zero(), T::zero());
                    for (a, &la) in band.freqs().iter().enumerate() {
                        for (b, &lb) in band.freqs().iter().enumerate() {
                            acc = acc + w[a].conj() * w[b] * diff.at(la - lb);
                        }
                    }
                    crate::transform::take_real(band.level(), k, acc / n)
                })
                .collect()
        })
        .collect()
}

/// Tuning constant `delta` with `ln n` precomputed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdParams {
    delta: f64,
    n: usize,
    log_n: f64,
}

impl ThresholdParams {
    pub fn new(delta: f64, n: usize) -> Result<Self> {
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "delta must be finite and nonnegative, got {delta}"
            )));
        }
        if n == 0 {
            return Err(Error::EmptySamples);
        }
        Ok(Self {
            delta,
            n,
            log_n: (n as f64).ln(),
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn kappa(&self) -> f64 {
        KAPPA
    }

    pub fn log_n(&self) -> f64 {
        self.log_n
    }

    /// `tau` for one coefficient from its variance bound and the level's `eta`.
    pub fn tau(&self, vhat: f64, eta: f64) -> f64 {
        let n = self.n as f64;
        let dl = self.delta * self.log_n;
        let e2 = eta * eta / (n * n);
        let inner = vhat + (2.0 * dl * vhat * e2).sqrt() + dl * KAPPA * e2;
        (2.0 * dl * inner).sqrt() + dl / (3.0 * n) * eta
    }
}

/// Per-coefficient thresholds for every wavelet level.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdTable<T> {
    spec: BasisSpec,
    levels: Vec<Vec<T>>,
}

impl<T: Real> ThresholdTable<T> {
    /// Table from explicit per-level thresholds for levels `j0..J`.
    pub fn from_levels(spec: BasisSpec, levels: Vec<Vec<T>>) -> Result<Self> {
        let shape_ok = levels.len() == spec.levels().len()
            && spec.levels().zip(&levels).all(|(j, l)| l.len() == 1 << j);
        if !shape_ok {
            return Err(Error::InvalidSpec("threshold table shape does not match the spec".into()));
        }
        if levels.iter().flatten().any(|t| !(*t >= T::zero())) {
            return Err(Error::InvalidConfig("thresholds must be nonnegative".into()));
        }
        Ok(Self { spec, levels })
    }

    pub fn level(&self, j: u32) -> &[T] {
        &self.levels[(j - self.spec.j0()) as usize]
    }

    pub fn spec(&self) -> &BasisSpec {
        &self.spec
    }
}

/// Random thresholds from the estimated variance bounds.
pub fn random_threshold<T: Real>(vt: &VarianceTable<T>, params: &ThresholdParams) -> ThresholdTable<T> {
    let levels = vt
        .vhat
        .iter()
        .zip(&vt.eta)
        .map(|(v, &e)| {
            let e = e.to_f64_lossy();
            v.iter()
                .map(|&vk| T::lit(params.tau(vk.to_f64_lossy(), e)))
                .collect()
        })
        .collect();
    ThresholdTable {
        spec: vt.spec,
        levels,
    }
}

/// Level-dependent threshold `delta sqrt(j / n)`.
pub fn level_threshold(delta: f64, n: usize, j: u32) -> f64 {
    delta * (j as f64 / n as f64).sqrt()
}

/// [`level_threshold`] laid out as a threshold table.
pub fn level_threshold_table<T: Real>(spec: &BasisSpec, delta: f64, n: usize) -> ThresholdTable<T> {
    let levels = spec
        .levels()
        .map(|j| vec![T::lit(level_threshold(delta, n, j)); 1 << j])
        .collect();
    ThresholdTable {
        spec: *spec,
        levels,
    }
}

/// Keeps `beta_{j,k}` iff `|beta_{j,k}| >= tau_{j,k}` for `j0 <= j <= j1`, zeroes
/// every level above `j1`; scaling coefficients pass through.
pub fn hard_threshold<T: Real>(coeffs: &CoeffSet<T>, tau: &ThresholdTable<T>, j1: u32) -> CoeffSet<T> {
    let spec = *coeffs.spec();
    assert_eq!(spec, tau.spec, "thresholds built for a different spec");
    assert!(j1 >= spec.j0() && j1 < spec.depth(), "j1 = {j1} out of range");
    let mut out = coeffs.clone();
    for j in spec.levels() {
        let t = tau.level(j);
        for (k, b) in out.wavelet_mut(j).iter_mut().enumerate() {
            if j > j1 || b.abs() < t[k] {
                *b = T::zero();
            }
        }
    }
    out
}

/// Resolution levels and tuning constant.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Hyperparams {
    pub j0: u32,
    pub j1: u32,
    pub delta: f64,
}

fn check_n(n: usize) -> Result<()> {
    if n < 3 {
        return Err(Error::InvalidConfig(format!(
            "hyperparameter rules need n >= 3, got {n}"
        )));
    }
    Ok(())
}

/// `j0 = floor(log2(ln n)) + 1`.
pub fn coarse_level(n: usize) -> u32 {
    ((n as f64).ln().log2().floor() + 1.0).max(0.0) as u32
}

/// `delta = (j1 - 1 - alpha log2(ln n)) / log2 n` for a given `j1`.
pub fn delta_direct(n: usize, j1: u32, alpha: f64) -> f64 {
    let nf = n as f64;
    (j1 as f64 - 1.0 - alpha * nf.ln().log2()) / nf.log2()
}

/// `delta = (2 nu + 1)(j1 - 1 - alpha log2(ln n)) / log2 n` for a given `j1`.
pub fn delta_deconv(n: usize, j1: u32, nu: f64, alpha: f64) -> f64 {
    (2.0 * nu + 1.0) * delta_direct(n, j1, alpha)
}

/// Direct estimation: `j1 = floor(log2(n)/2) + 1` and [`delta_direct`].
pub fn select_hyperparams_direct(n: usize, alpha: f64) -> Result<Hyperparams> {
    check_n(n)?;
    let j0 = coarse_level(n);
    let j1 = ((n as f64).log2() / 2.0).floor() as u32 + 1;
    if j1 < j0 {
        log::warn!("selected j1 = {j1} is below j0 = {j0} for n = {n}");
    }
    Ok(Hyperparams {
        j0,
        j1,
        delta: delta_direct(n, j1, alpha),
    })
}

/// Deconvolution: `j1 = j0` and [`delta_deconv`].
pub fn select_hyperparams_deconv(n: usize, nu: f64, alpha: f64) -> Result<Hyperparams> {
    check_n(n)?;
    if nu < 0.0 || alpha < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "nu and alpha must be nonnegative, got nu = {nu}, alpha = {alpha}"
        )));
    }
    let j0 = coarse_level(n);
    let delta = delta_deconv(n, j0, nu, alpha);
    if delta <= 0.0 {
        log::warn!("selected delta = {delta} is not positive (n = {n}, alpha = {alpha})");
    }
    Ok(Hyperparams { j0, j1: j0, delta })
}

/// Smallest `delta` covered by the oracle inequalities for a given `j1`:
/// `(1 + nu/(nu+1)) eta*` with `eta* = (nu+1)(j1-1)/log2 n`.
pub fn theory_lower_bound(n: usize, j1: u32, nu: f64) -> f64 {
    let eta_star = (nu + 1.0) * (j1 as f64 - 1.0) / (n as f64).log2();
    (1.0 + nu / (nu + 1.0)) * eta_star
}

/// Logs a warning when `delta` falls below [`theory_lower_bound`].
pub fn warn_if_outside_theory(n: usize, j1: u32, nu: f64, delta: f64) -> bool {
    let bound = theory_lower_bound(n, j1, nu);
    let outside = delta < bound - 1e-12;
    if outside {
        log::warn!("delta = {delta} is below the oracle-inequality range (> {bound:.4})");
    }
    outside
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meyer::{build_band_table, BandTable};
    use crate::spectral::{deconvolution_weights, empirical_fourier, NoiseModel};
    use crate::transform::forward_fast;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kappa_value() {
        assert!((KAPPA - (4.0 / 3.0 + (5.0f64 / 3.0).sqrt())).abs() < 1e-15);
        assert!((KAPPA - 2.62433).abs() < 1e-5);
    }

    #[test]
    fn tau_examples() {
        let p = ThresholdParams::new(0.0, 200).unwrap();
        assert_eq!(p.tau(0.3, 4.0), 0.0);
        let p = ThresholdParams::new(0.5, 200).unwrap();
        assert_eq!(p.tau(0.0, 0.0), 0.0);
        assert!(p.tau(0.0, 1.0) > 0.0);
    }

    #[test]
    fn tau_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let v = rng.gen::<f64>() * 0.1;
            let e = rng.gen::<f64>() * 10.0;
            let d = rng.gen::<f64>() * 3.0;
            let base = ThresholdParams::new(d, 150).unwrap();
            let more = ThresholdParams::new(d + 0.1, 150).unwrap();
            assert!(more.tau(v, e) >= base.tau(v, e));
            assert!(base.tau(v + 0.01, e) >= base.tau(v, e));
            assert!(base.tau(v, e + 0.5) >= base.tau(v, e));
        }
    }

    #[test]
    fn hard_threshold_keeps_boundary() {
        let spec = BasisSpec::new(0, 0, 1).unwrap();
        let c = CoeffSet::from_parts(spec, vec![0.7], vec![vec![0.5]]).unwrap();
        let tau = |t: f64| ThresholdTable {
            spec,
            levels: vec![vec![t]],
        };
        assert_eq!(hard_threshold(&c, &tau(0.3), 0).wavelet(0)[0], 0.5);
        assert_eq!(hard_threshold(&c, &tau(0.5), 0).wavelet(0)[0], 0.5);
        assert_eq!(hard_threshold(&c, &tau(0.6), 0).wavelet(0)[0], 0.0);
        assert_eq!(hard_threshold(&c, &tau(0.6), 0).scaling()[0], 0.7);
        let c = CoeffSet::from_parts(spec, vec![0.7], vec![vec![0.2]]).unwrap();
        assert_eq!(hard_threshold(&c, &tau(0.3), 0).wavelet(0)[0], 0.0);
    }

    #[test]
    fn levels_above_j1_are_zeroed() {
        let spec = BasisSpec::new(1, 1, 3).unwrap();
        let c = CoeffSet::from_parts(spec, vec![1.0; 2], vec![vec![1.0; 2], vec![1.0; 4]]).unwrap();
        let tau = level_threshold_table(&spec, 0.0, 10);
        let out = hard_threshold(&c, &tau, 1);
        assert_eq!(out.wavelet(1), &[1.0, 1.0]);
        assert_eq!(out.wavelet(2), &[0.0; 4]);
    }

    #[test]
    fn level_threshold_examples() {
        assert!((level_threshold(1.0, 100, 4) - 0.2).abs() < 1e-15);
        assert_eq!(level_threshold(0.0, 100, 4), 0.0);
        assert!((level_threshold(0.8, 200, 4) - 0.113_137).abs() < 1e-6);
    }

    #[test]
    fn selector_values() {
        let h = select_hyperparams_direct(200, 0.0).unwrap();
        assert_eq!((h.j0, h.j1), (3, 4));
        assert!((h.delta - 0.3925).abs() < 1e-3);
        let h = select_hyperparams_direct(200, 0.5).unwrap();
        assert!((h.delta - 0.2351).abs() < 1e-3);
        assert_eq!(select_hyperparams_direct(100, 0.0).unwrap().j1, 4);
        let h = select_hyperparams_deconv(200, 2.0, 0.5).unwrap();
        assert_eq!((h.j0, h.j1), (3, 3));
        assert!((h.delta - 0.5215).abs() < 1e-3);
        let h = select_hyperparams_deconv(100, 2.0, 0.5).unwrap();
        assert_eq!(h.j1, 3);
        assert!((h.delta - 0.6761).abs() < 1e-3);
        assert!(select_hyperparams_direct(2, 0.0).is_err());
    }

    #[test]
    fn deconv_selector_reduces_to_direct_formula() {
        for n in [50, 200, 1000] {
            let h = select_hyperparams_deconv(n, 0.0, 0.0).unwrap();
            assert!((h.delta - (h.j1 as f64 - 1.0) / (n as f64).log2()).abs() < 1e-15);
        }
    }

    #[test]
    fn theory_range_warning() {
        assert!(!warn_if_outside_theory(200, 4, 0.0, 0.3925));
        assert!(warn_if_outside_theory(200, 4, 0.0, 0.2));
    }

    fn table(j0: u32, depth: u32) -> BandTable<f64> {
        build_band_table(&BasisSpec::new(j0, j0, depth).unwrap()).unwrap()
    }

    #[test]
    fn single_sample_variance() {
        let t = table(2, 6);
        let vt = estimate_variance(&[0.37], &t).unwrap();
        let f: EmpiricalFourier<f64> = empirical_fourier(&[0.37], t.spec().fourier_len()).unwrap();
        let c = forward_fast(&f, &t).unwrap();
        for j in t.spec().levels() {
            for (k, &v) in vt.vhat(j).iter().enumerate() {
                assert!((v - c.wavelet(j)[k].powi(2)).abs() < 1e-12);
                assert_eq!(vt.sigma2hat(j)[k], 0.0);
            }
        }
    }

    #[test]
    fn both_variance_forms_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = table(2, 6);
        let noise = NoiseModel::laplace(0.05).unwrap();
        let w = deconvolution_weights(&t, &noise).unwrap();
        for weights in [&t, &w] {
            let ys: Vec<f64> = (0..40).map(|_| rng.gen::<f64>() * 1.4 - 0.2).collect();
            let fast = estimate_variance(&ys, weights).unwrap();
            let slow = estimate_variance_double_sum(&ys, weights).unwrap();
            for (j, level) in weights.spec().levels().zip(&slow) {
                for (k, &s) in level.iter().enumerate() {
                    let f = fast.vhat(j)[k];
                    assert!((f - s).abs() <= 1e-10 * (1.0 + s.abs()), "({j},{k}) {f} vs {s}");
                    assert!(fast.sigma2hat(j)[k] <= f);
                }
            }
        }
    }

    #[test]
    fn eta_is_stored_per_level() {
        let t = table(3, 8);
        let vt = estimate_variance(&[0.1, 0.2, 0.9], &t).unwrap();
        for band in t.wavelets() {
            assert_eq!(vt.eta(band.level()), eta(band));
        }
    }

    #[test]
    fn zero_delta_gives_zero_thresholds() {
        let t = table(3, 8);
        let vt = estimate_variance(&[0.1, 0.2, 0.9, 0.45], &t).unwrap();
        let tau = random_threshold(&vt, &ThresholdParams::new(0.0, 4).unwrap());
        for j in t.spec().levels() {
            assert!(tau.level(j).iter().all(|&x| x == 0.0));
        }
    }
}
