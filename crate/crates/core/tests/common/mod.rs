#![allow(dead_code)]

use std::f64::consts::PI;

use meyer_density::meyer::Band;
use num_complex::Complex64;

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on P_m.
pub fn gauss_legendre(m: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Composite rule over `pieces` equal panels of `[a, b]`.
pub fn integrate<V>(a: f64, b: f64, pieces: usize, rule: &[(f64, f64)], g: impl Fn(f64) -> V) -> V
where
    V: std::ops::Add<Output = V> + std::ops::Mul<f64, Output = V> + Default,
{
    let h = (b - a) / pieces as f64;
    let mut acc = V::default();
    for p in 0..pieces {
        let lo = a + p as f64 * h;
        for &(x, w) in rule {
            acc = acc + g(lo + 0.5 * h * (x + 1.0)) * (0.5 * h * w);
        }
    }
    acc
}

/// Periodized basis function at translate `k`: `sum_l c_l exp(2 pi i l x)`.
pub fn eval_periodized(band: &Band<f64>, k: usize, x: f64) -> f64 {
    (0..band.len())
        .map(|i| {
            let l = band.freqs()[i];
            let c = band.coefficient(i, k);
            let phase = 2.0 * PI * (l as f64 * x).rem_euclid(1.0);
            (c * Complex64::from_polar(1.0, phase)).re
        })
        .sum()
}

/// Independent Meyer wavelet transform with cubic ramp.
pub fn psi_hat(omega: f64) -> Complex64 {
    let ramp = |t: f64| {
        let t = t.clamp(0.0, 1.0);
        t * t * (3.0 - 2.0 * t)
    };
    let w = omega.abs();
    let two_pi = 2.0 * PI;
    let mag = if w <= two_pi / 3.0 || w >= 4.0 * two_pi / 3.0 {
        0.0
    } else if w <= 2.0 * two_pi / 3.0 {
        (PI / 2.0 * ramp(3.0 * w / two_pi - 1.0)).sin()
    } else {
        (PI / 2.0 * ramp(3.0 * w / (2.0 * two_pi) - 1.0)).cos()
    };
    Complex64::from_polar(mag, omega / 2.0)
}

/// Mean and standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}
