//! Scalar abstraction for the Fourier-domain kernels.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive};
use rustfft::FftNum;

/// Floating point scalar usable by the basis, transform and threshold kernels.
pub trait Real:
    Float + FloatConst + FromPrimitive + FftNum + Sum + Debug + Display + Send + Sync + 'static
{
    /// Relative tolerance on the imaginary residue of a coefficient that must be real.
    const RESIDUE_TOL: f64;

    /// Lossless for f64, rounding for f32.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal fits the scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {
    const RESIDUE_TOL: f64 = 1e-3;
}

impl Real for f64 {
    const RESIDUE_TOL: f64 = 1e-9;
}

/// `exp(2 pi i * num / den)` with the numerator reduced modulo `den` before the
/// angle is formed, so large integer frequencies lose no phase accuracy.
#[inline]
pub fn unit_root<T: Real>(num: i64, den: i64) -> Complex<T> {
    let r = num.rem_euclid(den);
    let angle = T::TAU() * T::lit(r as f64) / T::lit(den as f64);
    Complex::new(angle.cos(), angle.sin())
}

/// Powers `z^l = exp(-2 pi i l y)` for `l = 0..=max_freq`.
///
/// Uses the multiplicative recurrence, re-anchored on an exact evaluation every
/// `ANCHOR` steps to bound the accumulated rounding error.
pub fn phasor_powers<T: Real>(y: f64, max_freq: usize, out: &mut Vec<Complex<T>>) {
    const ANCHOR: usize = 32;
    out.clear();
    out.reserve(max_freq + 1);
    let frac = y - y.floor();
    let step = {
        let a = -std::f64::consts::TAU * frac;
        Complex::new(T::lit(a.cos()), T::lit(a.sin()))
    };
    let mut z = Complex::new(T::one(), T::zero());
    for l in 0..=max_freq {
        if l % ANCHOR == 0 && l > 0 {
            // exact anchor: frac * l reduced to [0, 1)
            let t = frac * l as f64;
            let a = -std::f64::consts::TAU * (t - t.floor());
            z = Complex::new(T::lit(a.cos()), T::lit(a.sin()));
        }
        out.push(z);
        z = z * step;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phasor_powers_match_direct_evaluation() {
        let mut buf = Vec::new();
        for &y in &[0.0, 0.123456789, 0.5, 0.999, 3.75, -1.3] {
            phasor_powers::<f64>(y, 700, &mut buf);
            for (l, z) in buf.iter().enumerate() {
                let t = (y - y.floor()) * l as f64;
                let a = -std::f64::consts::TAU * (t - t.floor());
                assert!((z.re - a.cos()).abs() < 1e-12, "y={y} l={l}");
                assert!((z.im - a.sin()).abs() < 1e-12, "y={y} l={l}");
            }
        }
    }

    #[test]
    fn unit_root_reduces_numerator() {
        let a: Complex<f64> = unit_root(1 + 8 * 1_000_000, 8);
        let b: Complex<f64> = unit_root(1, 8);
        assert!((a - b).norm() < 1e-15);
        let c: Complex<f64> = unit_root(-3, 4);
        assert!((c - Complex::new(0.0, 1.0)).norm() < 1e-15);
    }
}
