//! Ground truth for benchmarking: the four test densities, their exact Fourier
//! and wavelet coefficients, exact coefficient variances and the oracle risk.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use num_complex::Complex;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use rand::SeedableRng;
use rustfft::FftPlanner;
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::meyer::{Band, BandTable, BasisSpec};
use crate::spectral::{EmpiricalFourier, NoiseModel, WeightTable};
use crate::transform::{CoeffSet, FastTransform};

/// Points of the composite rule used for the Gaussian mixture coefficients.
const MIXTURE_QUADRATURE_POINTS: usize = 1 << 16;

/// The four benchmark densities on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityKind {
    /// `5 * 1[0.4, 0.6](x)`
    Uniform,
    /// `10 exp(-10 (x - 0.2))` for `x >= 0.2`
    Exponential,
    /// `10 exp(-20 |x - 0.5|)`
    Laplace,
    /// `0.4 N(0.4, 0.05^2) + 0.6 N(0.6, 0.05^2)`
    MixtGauss,
}

impl DensityKind {
    pub const ALL: [DensityKind; 4] = [
        DensityKind::Uniform,
        DensityKind::Exponential,
        DensityKind::Laplace,
        DensityKind::MixtGauss,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            DensityKind::Uniform => "uniform",
            DensityKind::Exponential => "exponential",
            DensityKind::Laplace => "laplace",
            DensityKind::MixtGauss => "mixtgauss",
        }
    }
}

impl fmt::Display for DensityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DensityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" => Ok(DensityKind::Uniform),
            "exponential" => Ok(DensityKind::Exponential),
            "laplace" => Ok(DensityKind::Laplace),
            "mixtgauss" => Ok(DensityKind::MixtGauss),
            other => Err(Error::InvalidConfig(format!("unknown density '{other}'"))),
        }
    }
}

const MIX_WEIGHTS: [f64; 2] = [0.4, 0.6];
const MIX_MEANS: [f64; 2] = [0.4, 0.6];
const MIX_SD: f64 = 0.05;

/// A test density with samplers and exact Fourier quantities.
#[derive(Debug)]
pub struct TruthModel {
    kind: DensityKind,
    mixture_table: OnceLock<Vec<Complex<f64>>>,
}

impl Clone for TruthModel {
    fn clone(&self) -> Self {
        Self::new(self.kind)
    }
}

/// Samples drawn from a [`TruthModel`], with the count of draws that fell
/// outside `[0, 1]` and were clamped to the nearest endpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleDraw {
    pub values: Vec<f64>,
    pub clamped: usize,
}

impl TruthModel {
    pub fn new(kind: DensityKind) -> Self {
        Self {
            kind,
            mixture_table: OnceLock::new(),
        }
    }

    pub fn kind(&self) -> DensityKind {
        self.kind
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match self.kind {
            DensityKind::Uniform => {
                if (0.4..=0.6).contains(&x) {
                    5.0
                } else {
                    0.0
                }
            }
            DensityKind::Exponential => {
                if x >= 0.2 {
                    10.0 * (-10.0 * (x - 0.2)).exp()
                } else {
                    0.0
                }
            }
            DensityKind::Laplace => 10.0 * (-20.0 * (x - 0.5).abs()).exp(),
            DensityKind::MixtGauss => {
                let norm = 1.0 / (MIX_SD * (2.0 * std::f64::consts::PI).sqrt());
                MIX_WEIGHTS
                    .iter()
                    .zip(MIX_MEANS)
                    .map(|(w, m)| w * norm * (-0.5 * ((x - m) / MIX_SD).powi(2)).exp())
                    .sum()
            }
        }
    }

    /// CDF of the density as written, on the whole line.
    pub fn cdf(&self, x: f64) -> f64 {
        match self.kind {
            DensityKind::Uniform => ((x - 0.4) / 0.2).clamp(0.0, 1.0),
            DensityKind::Exponential => {
                if x < 0.2 {
                    0.0
                } else {
                    1.0 - (-10.0 * (x - 0.2)).exp()
                }
            }
            DensityKind::Laplace => {
                if x < 0.5 {
                    0.5 * (20.0 * (x - 0.5)).exp()
                } else {
                    1.0 - 0.5 * (-20.0 * (x - 0.5)).exp()
                }
            }
            DensityKind::MixtGauss => MIX_WEIGHTS
                .iter()
                .zip(MIX_MEANS)
                .map(|(w, m)| w * 0.5 * (1.0 + erf((x - m) / (MIX_SD * std::f64::consts::SQRT_2))))
                .sum(),
        }
    }

    /// Standard deviation of the density as written.
    pub fn std_dev(&self) -> f64 {
        match self.kind {
            DensityKind::Uniform => 0.2 / 12f64.sqrt(),
            DensityKind::Exponential => 0.1,
            DensityKind::Laplace => std::f64::consts::SQRT_2 / 20.0,
            DensityKind::MixtGauss => {
                let mean: f64 = MIX_WEIGHTS.iter().zip(MIX_MEANS).map(|(w, m)| w * m).sum();
                let second: f64 = MIX_WEIGHTS
                    .iter()
                    .zip(MIX_MEANS)
                    .map(|(w, m)| w * (MIX_SD * MIX_SD + m * m))
                    .sum();
                (second - mean * mean).sqrt()
            }
        }
    }

    /// `max f`, for diagnostics.
    pub fn sup_norm(&self) -> f64 {
        match self.kind {
            DensityKind::Uniform => 5.0,
            DensityKind::Exponential | DensityKind::Laplace => 10.0,
            DensityKind::MixtGauss => (0..=10_000)
                .map(|i| self.pdf(i as f64 / 10_000.0))
                .fold(0.0, f64::max),
        }
    }

    /// One draw, unclamped.
    pub fn sample_raw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            DensityKind::Uniform => 0.4 + 0.2 * rng.gen::<f64>(),
            DensityKind::Exponential => 0.2 + Exp::new(10.0).expect("rate is positive").sample(rng),
            DensityKind::Laplace => {
                let u: f64 = rng.gen::<f64>() - 0.5;
                0.5 - u.signum() * (1.0 - 2.0 * u.abs()).ln() / 20.0
            }
            DensityKind::MixtGauss => {
                let c = usize::from(rng.gen::<f64>() >= MIX_WEIGHTS[0]);
                Normal::new(MIX_MEANS[c], MIX_SD)
                    .expect("standard deviation is positive")
                    .sample(rng)
            }
        }
    }

    /// `n` draws clamped into `[0, 1]`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> SampleDraw {
        let mut clamped = 0;
        let values = (0..n)
            .map(|_| {
                let x = self.sample_raw(rng);
                if (0.0..=1.0).contains(&x) {
                    x
                } else {
                    clamped += 1;
                    x.clamp(0.0, 1.0)
                }
            })
            .collect();
        SampleDraw { values, clamped }
    }

    fn mixture_table(&self) -> &[Complex<f64>] {
        self.mixture_table.get_or_init(|| {
            let m = MIXTURE_QUADRATURE_POINTS;
            let mut buf: Vec<Complex<f64>> = (0..m)
                .map(|p| Complex::new(self.pdf(p as f64 / m as f64) / m as f64, 0.0))
                .collect();
            FftPlanner::new().plan_fft_forward(m).process(&mut buf);
            buf.truncate(m / 2);
            buf
        })
    }

    /// Exact Fourier coefficient `f_l = int_0^1 f(u) exp(-2 pi i l u) du`.
    ///
    /// Closed forms for the piecewise densities (restricted to `[0, 1]`, so the
    /// Exponential has `f_0 = 1 - e^{-8}`); composite quadrature on `2^16`
    /// points for the Gaussian mixture.
    pub fn fourier(&self, l: i64) -> Complex<f64> {
        use std::f64::consts::{PI, TAU};
        let lf = l as f64;
        match self.kind {
            DensityKind::Uniform => {
                if l == 0 {
                    return Complex::new(1.0, 0.0);
                }
                let a = 0.2 * PI * lf;
                Complex::from_polar(a.sin() / a, -PI * lf)
            }
            DensityKind::Exponential => {
                let a = Complex::new(10.0, TAU * lf);
                let e02 = Complex::from_polar(1.0, -TAU * 0.2 * lf);
                (e02 - Complex::new((-8.0f64).exp(), 0.0)) * 10.0 / a
            }
            DensityKind::Laplace => {
                let c = 20.0;
                let w = TAU * lf;
                let sign = if l.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                let mag = 20.0 * (c - (-10.0f64).exp() * c * sign) / (c * c + w * w);
                Complex::new(mag * sign, 0.0)
            }
            DensityKind::MixtGauss => {
                let table = self.mixture_table();
                let idx = l.unsigned_abs() as usize;
                if idx < table.len() {
                    if l >= 0 {
                        table[idx]
                    } else {
                        table[idx].conj()
                    }
                } else {
                    mixture_characteristic(l)
                }
            }
        }
    }

    /// Exact table on `l in (-len/2, len/2]`.
    pub fn fourier_table(&self, len: usize) -> Result<EmpiricalFourier<f64>> {
        EmpiricalFourier::from_fn(len, |l| self.fourier(l))
    }

    /// True scaling and wavelet coefficients in the basis `table`.
    pub fn true_coeffs(&self, table: &BandTable<f64>) -> Result<CoeffSet<f64>> {
        let fourier = self.fourier_table(table.spec().fourier_len())?;
        FastTransform::new(table.spec()).forward(&fourier, table)
    }
}

/// Gaussian characteristic function of the mixture on the whole line; agrees
/// with the `[0, 1]` coefficients up to the mass outside the unit interval.
pub fn mixture_characteristic(l: i64) -> Complex<f64> {
    use std::f64::consts::{PI, TAU};
    let lf = l as f64;
    MIX_WEIGHTS
        .iter()
        .zip(MIX_MEANS)
        .map(|(w, m)| {
            Complex::from_polar(
                w * (-2.0 * PI * PI * MIX_SD * MIX_SD * lf * lf).exp(),
                -TAU * m * lf,
            )
        })
        .sum()
}

/// Deterministic generator for replicate `rep` of a run seeded with `seed`.
/// Each replicate gets its own ChaCha stream.
pub fn replicate_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

/// `V_k = (1/n) sum_{l,l'} conj(w^k_l) w^k_{l'} fY_{l-l'}` for every translate
/// of one band, given the Fourier coefficients `fY_d` of the observations.
pub fn band_variance(fy: impl Fn(i64) -> Complex<f64>, weights: &Band<f64>, n: usize) -> Vec<f64> {
    let m = weights.period();
    let max = weights.max_abs_freq();
    let fy: Vec<Complex<f64>> = (-2 * max..=2 * max).map(fy).collect();
    let mut acc = vec![Complex::new(0.0, 0.0); m];
    for (la, wa) in weights.iter() {
        for (lb, wb) in weights.iter() {
            let d = la - lb;
            let r = d.rem_euclid(m as i64) as usize;
            acc[r] += wa.conj() * wb * fy[(d + 2 * max) as usize];
        }
    }
    FftPlanner::new().plan_fft_inverse(m).process(&mut acc);
    acc.iter()
        .map(|z| {
            debug_assert!(z.im.abs() <= 1e-10 * (1.0 + z.re.abs()));
            z.re / n as f64
        })
        .collect()
}

/// [`band_variance`] with `fY_d = f_d h_d`.
fn exact_band_variance(
    truth: &TruthModel,
    noise: &NoiseModel,
    weights: &Band<f64>,
    n: usize,
) -> Vec<f64> {
    band_variance(|d| truth.fourier(d) * noise.fourier(d), weights, n)
}

/// Exact `(V_{j,k}, sigma^2_{j,k})` for one coefficient of `band`, where
/// `sigma^2 = V - beta^2 / n`.
pub fn exact_variance(
    truth: &TruthModel,
    noise: &NoiseModel,
    weights: &Band<f64>,
    beta: f64,
    n: usize,
    k: usize,
) -> (f64, f64) {
    let v = exact_band_variance(truth, noise, weights, n)[k];
    (v, v - beta * beta / n as f64)
}

/// Exact per-coefficient variances and true coefficients for one `(density,
/// noise, n)` configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleQuantities {
    spec: BasisSpec,
    n: usize,
    truth: CoeffSet<f64>,
    scaling_v: Vec<f64>,
    scaling_sigma2: Vec<f64>,
    v: Vec<Vec<f64>>,
    sigma2: Vec<Vec<f64>>,
}

/// Three-term decomposition of the oracle risk.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OracleRisk {
    pub scaling_variance: f64,
    pub min_term: f64,
    pub tail: f64,
}

impl OracleRisk {
    pub fn total(&self) -> f64 {
        self.scaling_variance + self.min_term + self.tail
    }
}

impl OracleQuantities {
    /// `table` is the plain basis, `weights` the (possibly deconvolution)
    /// weights the estimator uses.
    pub fn compute(
        truth: &TruthModel,
        noise: &NoiseModel,
        table: &BandTable<f64>,
        weights: &WeightTable<f64>,
        n: usize,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptySamples);
        }
        let coeffs = truth.true_coeffs(table)?;
        let sigma2_of = |v: &[f64], beta: &[f64]| -> Vec<f64> {
            v.iter()
                .zip(beta)
                .map(|(v, b)| v - b * b / n as f64)
                .collect()
        };
        let scaling_v = exact_band_variance(truth, noise, weights.scaling(), n);
        let scaling_sigma2 = sigma2_of(&scaling_v, coeffs.scaling());
        let mut v = Vec::new();
        let mut sigma2 = Vec::new();
        for (band, (_, beta)) in weights.wavelets().iter().zip(coeffs.levels()) {
            let vj = exact_band_variance(truth, noise, band, n);
            sigma2.push(sigma2_of(&vj, beta));
            v.push(vj);
        }
        Ok(Self {
            spec: *table.spec(),
            n,
            truth: coeffs,
            scaling_v,
            scaling_sigma2,
            v,
            sigma2,
        })
    }

    #[cfg(test)]
    pub(crate) fn from_parts(truth: CoeffSet<f64>, n: usize, sigma2: f64) -> Self {
        let spec = *truth.spec();
        let scaling_v = vec![sigma2; truth.scaling().len()];
        let v: Vec<Vec<f64>> = truth.levels().map(|(_, b)| vec![sigma2; b.len()]).collect();
        Self {
            spec,
            n,
            scaling_sigma2: scaling_v.clone(),
            scaling_v,
            sigma2: v.clone(),
            v,
            truth,
        }
    }

    pub fn spec(&self) -> &BasisSpec {
        &self.spec
    }

    pub fn sample_size(&self) -> usize {
        self.n
    }

    pub fn true_coeffs(&self) -> &CoeffSet<f64> {
        &self.truth
    }

    pub fn scaling_v(&self) -> &[f64] {
        &self.scaling_v
    }

    pub fn scaling_sigma2(&self) -> &[f64] {
        &self.scaling_sigma2
    }

    fn idx(&self, j: u32) -> usize {
        (j - self.spec.j0()) as usize
    }

    pub fn v(&self, j: u32) -> &[f64] {
        &self.v[self.idx(j)]
    }

    pub fn sigma2(&self, j: u32) -> &[f64] {
        &self.sigma2[self.idx(j)]
    }

    /// Oracle keep-mask at level `j`: `beta^2 >= sigma^2`.
    pub fn keep(&self, j: u32) -> Vec<bool> {
        self.truth
            .wavelet(j)
            .iter()
            .zip(self.sigma2(j))
            .map(|(b, s)| b * b >= *s)
            .collect()
    }

    /// Oracle risk with thresholding up to `j1` and the bias tail summed up to
    /// level `tail_end - 1`.
    pub fn risk(&self, j1: u32, tail_end: u32) -> OracleRisk {
        assert!(j1 >= self.spec.j0() && j1 < self.spec.depth(), "j1 = {j1} out of range");
        let tail_end = tail_end.min(self.spec.depth());
        let scaling_variance = self.scaling_sigma2.iter().sum();
        let mut min_term = 0.0;
        let mut tail = 0.0;
        for (j, beta) in self.truth.levels() {
            if j <= j1 {
                min_term += beta
                    .iter()
                    .zip(self.sigma2(j))
                    .map(|(b, s)| (b * b).min(*s))
                    .sum::<f64>();
            } else if j < tail_end {
                tail += beta.iter().map(|b| b * b).sum::<f64>();
            }
        }
        OracleRisk {
            scaling_variance,
            min_term,
            tail,
        }
    }

    /// Writes `j,k,abs_beta,sigma,keep` rows for every wavelet coefficient.
    pub fn write_csv<W: std::io::Write + ?Sized>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "j,k,abs_beta,sigma,keep")?;
        for (j, beta) in self.truth.levels() {
            for (k, (b, s)) in beta.iter().zip(self.sigma2(j)).enumerate() {
                let keep = u8::from(b * b >= *s);
                writeln!(out, "{j},{k},{:.16e},{:.16e},{keep}", b.abs(), s.max(0.0).sqrt())?;
            }
        }
        Ok(())
    }
}

/// Keeps `betahat_{j,k}` where the oracle mask is set and `j <= j1`.
pub fn oracle_estimator(coeffs: &CoeffSet<f64>, oq: &OracleQuantities, j1: u32) -> CoeffSet<f64> {
    let mut out = coeffs.clone();
    for j in coeffs.spec().levels() {
        let keep = oq.keep(j);
        for (b, k) in out.wavelet_mut(j).iter_mut().zip(keep) {
            if j > j1 || !k {
                *b = 0.0;
            }
        }
    }
    out
}

/// Total oracle risk, see [`OracleQuantities::risk`].
pub fn oracle_risk(oq: &OracleQuantities, j1: u32, tail_end: u32) -> f64 {
    oq.risk(j1, tail_end).total()
}
