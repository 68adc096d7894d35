mod common;

use common::mean_se;
use meyer_density::meyer::{build_band_table, BandTable, BasisSpec};
use meyer_density::spectral::{deconvolution_weights, empirical_fourier, NoiseModel};
use meyer_density::transform::FastTransform;
use meyer_density::truth::{exact_variance, replicate_rng, DensityKind, OracleQuantities, TruthModel};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

#[test]
fn samplers_pass_kolmogorov_smirnov() {
    let n = 100_000;
    let critical = 1.628 / (n as f64).sqrt();
    for kind in DensityKind::ALL {
        let truth = TruthModel::new(kind);
        let mut rng = replicate_rng(7, kind as u64);
        let mut xs: Vec<f64> = (0..n).map(|_| truth.sample_raw(&mut rng)).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let d = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let c = truth.cdf(x);
                (c - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - c).abs())
            })
            .fold(0.0, f64::max);
        assert!(d < critical, "{kind}: D = {d} vs {critical}");
    }
}

#[test]
fn histograms_match_the_density() {
    let n = 1_000_000;
    let bins = 256;
    for kind in DensityKind::ALL {
        let truth = TruthModel::new(kind);
        let mut rng = replicate_rng(8, kind as u64);
        let mut counts = vec![0usize; bins];
        for x in truth.sample(&mut rng, n).values {
            counts[((x * bins as f64) as usize).min(bins - 1)] += 1;
        }
        let l1: f64 = counts
            .iter()
            .enumerate()
            .map(|(b, &c)| {
                let mass = truth.cdf((b + 1) as f64 / bins as f64) - truth.cdf(b as f64 / bins as f64);
                (c as f64 / n as f64 - mass).abs()
            })
            .sum();
        assert!(l1 < 0.02, "{kind}: L1 = {l1}");
    }
}

#[test]
fn mixture_cdf_matches_an_independent_normal_cdf() {
    let truth = TruthModel::new(DensityKind::MixtGauss);
    let a = Normal::new(0.4, 0.05).unwrap();
    let b = Normal::new(0.6, 0.05).unwrap();
    for x in [0.1, 0.35, 0.5, 0.62, 0.9] {
        let expected = 0.4 * a.cdf(x) + 0.6 * b.cdf(x);
        assert!((truth.cdf(x) - expected).abs() < 1e-6, "x = {x}");
    }
}

/// Draws from the density restricted to [0, 1]. Clamping would pile rare
/// out-of-range draws onto the endpoints, which the exact formulas exclude.
fn restricted_sample(truth: &TruthModel, rng: &mut rand_chacha::ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let x = truth.sample_raw(rng);
        if (0.0..=1.0).contains(&x) {
            out.push(x);
        }
    }
    out
}

#[test]
fn exact_variance_matches_monte_carlo() {
    let n = 200;
    let reps = 5000u64;
    let spec = BasisSpec::new(3, 4, 8).unwrap();
    let table: BandTable<f64> = build_band_table(&spec).unwrap();
    let plan = FastTransform::new(&spec);
    for kind in [DensityKind::MixtGauss, DensityKind::Laplace] {
        let truth = TruthModel::new(kind);
        let beta = truth.true_coeffs(&table).unwrap();
        let j = 4;
        let band = table.wavelet(j).unwrap();
        let picks: Vec<usize> = vec![0, 6, 8];
        let draws: Vec<Vec<f64>> = (0..reps)
            .into_par_iter()
            .map(|rep| {
                let xs = restricted_sample(&truth, &mut replicate_rng(99, rep), n);
                let f = empirical_fourier(&xs, spec.fourier_len()).unwrap();
                let c = plan.forward(&f, &table).unwrap();
                picks.iter().map(|&k| c.wavelet(j)[k]).collect()
            })
            .collect();
        for (i, &k) in picks.iter().enumerate() {
            let xs: Vec<f64> = draws.iter().map(|d| d[i]).collect();
            let (m, _) = mean_se(&xs);
            let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (reps - 1) as f64;
            // standard error of a sample variance, from the fourth central moment
            let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / reps as f64;
            let se = ((m4 - var * var) / reps as f64).sqrt();
            let (_, sigma2) = exact_variance(&truth, &NoiseModel::Identity, band, beta.wavelet(j)[k], n, k);
            assert!((var - sigma2).abs() < 4.0 * se, "{kind} k = {k}: {var} +- {se} vs {sigma2}");
        }
    }
}

#[test]
fn laplace_variance_grows_with_the_level() {
    let spec = BasisSpec::new(3, 3, 8).unwrap();
    let table: BandTable<f64> = build_band_table(&spec).unwrap();
    let noise = NoiseModel::laplace(0.05).unwrap();
    let weights = deconvolution_weights(&table, &noise).unwrap();
    let oq = OracleQuantities::compute(&TruthModel::new(DensityKind::MixtGauss), &noise, &table, &weights, 200)
        .unwrap();
    let mean_v = |j: u32| oq.v(j).iter().sum::<f64>() / oq.v(j).len() as f64;
    for j in 3..5 {
        let growth = (mean_v(j + 1) / mean_v(j)).log2();
        // 2^(4j) growth, tempered at coarse levels where h_l is still close to 1
        assert!((1.5..=4.5).contains(&growth), "j = {j}: log2 ratio {growth}");
    }
    assert!(mean_v(5) / mean_v(3) > 16.0);
}

#[test]
fn oracle_mask_and_risk_at_n_200() {
    let spec = BasisSpec::new(3, 4, 8).unwrap();
    let table: BandTable<f64> = build_band_table(&spec).unwrap();
    for kind in DensityKind::ALL {
        let oq = OracleQuantities::compute(&TruthModel::new(kind), &NoiseModel::Identity, &table, &table, 200)
            .unwrap();
        let dropped = (3..=4).map(|j| oq.keep(j).iter().filter(|k| !**k).count()).sum::<usize>();
        eprintln!("{kind}: {dropped} coefficients dropped at j <= 4");
        if kind == DensityKind::MixtGauss {
            assert!(dropped > 0);
        }
        assert!(oq.risk(4, 8).total() > 0.0);
    }
}

#[test]
fn mixture_oracle_risk_golden_value() {
    let spec = BasisSpec::new(3, 4, 8).unwrap();
    let table: BandTable<f64> = build_band_table(&spec).unwrap();
    let oq = OracleQuantities::compute(
        &TruthModel::new(DensityKind::MixtGauss),
        &NoiseModel::Identity,
        &table,
        &table,
        200,
    )
    .unwrap();
    let r = oq.risk(4, 8);
    eprintln!("oracle risk {:.16e} = {:?}", r.total(), r);
    assert!((r.total() - GOLDEN_ORACLE_RISK).abs() < 1e-12 * GOLDEN_ORACLE_RISK);
}

const GOLDEN_ORACLE_RISK: f64 = 6.7027019985437503e-2;
