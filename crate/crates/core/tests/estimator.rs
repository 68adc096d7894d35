use meyer_density::estimator::{fit, FitOptions, PostProcess, Rescale, RescaleMap, ThresholdRule};
use meyer_density::harness::Mode;
use meyer_density::spectral::NoiseModel;
use meyer_density::truth::{replicate_rng, DensityKind, TruthModel};
use num_complex::Complex64;
use proptest::prelude::*;

fn mixture(n: usize, seed: u64) -> Vec<f64> {
    TruthModel::new(DensityKind::MixtGauss).sample(&mut replicate_rng(seed, 0), n).values
}

fn mass(density: &[f64], dx: f64) -> f64 {
    density.iter().sum::<f64>() * dx
}

#[test]
fn automatic_fit_of_the_mixture_is_bimodal() {
    let xs = mixture(200, 1);
    let est = fit::<f64>(&xs, Mode::Direct, None, &FitOptions::default()).unwrap();
    assert_eq!((est.hyper.j0, est.hyper.j1), (3, 4));
    assert!((est.hyper.delta - 0.3925).abs() < 5e-5);
    // local maxima near both component means
    let peak = |lo: f64, hi: f64| {
        est.x
            .iter()
            .zip(&est.density)
            .filter(|(x, _)| (lo..hi).contains(*x))
            .map(|(_, v)| *v)
            .fold(f64::MIN, f64::max)
    };
    let valley = peak(0.48, 0.52);
    assert!(peak(0.36, 0.44) > 1.2 * valley && peak(0.56, 0.64) > 1.2 * valley);
    assert!((mass(&est.density, est.dx()) - 1.0).abs() < 0.02);
}

#[test]
fn fit_is_affine_equivariant() {
    let xs = mixture(200, 2);
    let (a, b) = (-3.0, 7.5);
    let ys: Vec<f64> = xs.iter().map(|x| a + b * x).collect();
    let opts = FitOptions::default();
    let fx = fit::<f64>(&xs, Mode::Direct, None, &opts).unwrap();
    let fy = fit::<f64>(&ys, Mode::Direct, None, &opts).unwrap();
    for (p, q) in fx.coeffs.iter_all().zip(fy.coeffs.iter_all()) {
        assert!((p - q).abs() < 1e-9);
    }
    for ((x, y), (u, v)) in fx.x.iter().zip(&fy.x).zip(fx.density.iter().zip(&fy.density)) {
        assert!((a + b * x - y).abs() < 1e-9);
        assert!((u / b - v).abs() < 1e-9);
    }
}

#[test]
fn identity_noise_deconvolution_equals_direct_fit() {
    let xs = mixture(200, 3);
    let opts = FitOptions {
        j1: Some(4),
        delta: Some(0.3925),
        ..FitOptions::default()
    };
    let direct = fit::<f64>(&xs, Mode::Direct, None, &opts).unwrap();
    let deconv = fit::<f64>(&xs, Mode::Deconvolve, Some(&NoiseModel::Identity), &opts).unwrap();
    for (p, q) in direct.density.iter().zip(&deconv.density) {
        assert!((p - q).abs() < 1e-12);
    }
    // a flat custom model takes the division path and agrees as well
    let flat = NoiseModel::custom(0.0, |_| Complex64::new(1.0, 0.0));
    let unit = FitOptions {
        rescale: Rescale::Fixed(RescaleMap::identity()),
        ..opts
    };
    let a = fit::<f64>(&xs, Mode::Direct, None, &unit).unwrap();
    let b = fit::<f64>(&xs, Mode::Deconvolve, Some(&flat), &unit).unwrap();
    for (p, q) in a.density.iter().zip(&b.density) {
        assert!((p - q).abs() < 1e-12);
    }
}

#[test]
fn deconvolution_recovers_the_mixture() {
    let truth = TruthModel::new(DensityKind::MixtGauss);
    let sigma = truth.std_dev() / 3.0;
    let noise = NoiseModel::laplace(sigma).unwrap();
    let mut rng = replicate_rng(9, 0);
    let ys: Vec<f64> = (0..1000)
        .map(|_| truth.sample_raw(&mut rng) + noise.sample(&mut rng).unwrap())
        .collect();
    let est = fit::<f64>(&ys, Mode::Deconvolve, Some(&noise), &FitOptions::default()).unwrap();
    assert_eq!(est.hyper.j1, est.hyper.j0);
    let l1: f64 = est
        .x
        .iter()
        .zip(&est.density)
        .map(|(x, v)| (v - truth.pdf(*x)).abs())
        .sum::<f64>()
        * est.dx();
    assert!(l1 < 0.5, "L1 error {l1}");
}

#[test]
fn post_processing_policies() {
    let xs = mixture(100, 4);
    for (post, exact) in [(PostProcess::Raw, false), (PostProcess::Clip, false), (PostProcess::ClipRenormalize, true)] {
        let opts = FitOptions {
            post,
            ..FitOptions::default()
        };
        let est = fit::<f64>(&xs, Mode::Direct, None, &opts).unwrap();
        let m = mass(&est.density, est.dx());
        if exact {
            assert!((m - 1.0).abs() < 1e-12, "{m}");
        } else {
            assert!((m - 1.0).abs() < 0.05, "{post:?}: {m}");
        }
        if post != PostProcess::Raw {
            assert!(est.density.iter().all(|v| *v >= 0.0));
        }
    }
}

#[test]
fn raw_estimates_integrate_to_one() {
    for seed in 0..5 {
        let est = fit::<f64>(&mixture(150, seed), Mode::Direct, None, &FitOptions::default()).unwrap();
        // the scaling coefficients carry the unit mass exactly
        assert!((mass(&est.density, est.dx()) - 1.0).abs() < 1e-9);
    }
}

#[test]
fn fixed_identity_map_is_kept() {
    let xs = mixture(200, 5);
    let opts = FitOptions {
        rescale: Rescale::Fixed(RescaleMap::identity()),
        ..FitOptions::default()
    };
    let est = fit::<f64>(&xs, Mode::Direct, None, &opts).unwrap();
    assert!(est.map.is_identity());
    assert_eq!(est.x[1], 1.0 / est.x.len() as f64);
}

#[test]
fn level_rule_and_explicit_hyperparameters() {
    let xs = mixture(200, 6);
    let opts = FitOptions {
        rule: ThresholdRule::Level,
        delta: Some(0.8),
        j1: Some(5),
        grid: Some(1024),
        ..FitOptions::default()
    };
    let est = fit::<f64>(&xs, Mode::Direct, None, &opts).unwrap();
    assert_eq!(est.hyper.j1, 5);
    assert_eq!(est.density.len(), 1024);
    let t = 0.8 * (5.0f64 / 200.0).sqrt();
    assert!(est.coeffs.wavelet(5).iter().all(|b| *b == 0.0 || b.abs() >= t));
}

#[test]
fn single_precision_agrees() {
    let xs = mixture(200, 7);
    let a = fit::<f32>(&xs, Mode::Direct, None, &FitOptions::default()).unwrap();
    let b = fit::<f64>(&xs, Mode::Direct, None, &FitOptions::default()).unwrap();
    for (p, q) in a.density.iter().zip(&b.density) {
        assert!((*p as f64 - q).abs() < 1e-3 * (1.0 + q.abs()));
    }
}

#[test]
fn bad_inputs_are_rejected() {
    assert!(fit::<f64>(&[], Mode::Direct, None, &FitOptions::default()).is_err());
    assert!(fit::<f64>(&[0.1, 0.2], Mode::Direct, None, &FitOptions::default()).is_err());
    assert!(fit::<f64>(&[0.5; 10], Mode::Direct, None, &FitOptions::default()).is_err());
    assert!(fit::<f64>(&mixture(50, 0), Mode::Deconvolve, None, &FitOptions::default()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rescale_map_inverts(xs in prop::collection::vec(-1e3..1e3f64, 2..50), margin in 0.0..0.3f64) {
        prop_assume!(xs.iter().any(|x| *x != xs[0]));
        let m = RescaleMap::from_samples(&xs, margin).unwrap();
        for &x in &xs {
            let u = m.forward(x);
            prop_assert!((0.0..=1.0).contains(&u));
            prop_assert!((m.inverse(u) - x).abs() < 1e-12 * (1.0 + x.abs()));
        }
        prop_assert!((m.jacobian() * m.scale() - 1.0).abs() < 1e-15);
    }
}
